//! Key-agreement quality metrics: disagreement ratio, generation rate and
//! maximum run lengths.

use crate::bits::BitKey;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub skdr: f64,
    pub skgr_bits_per_probe: f64,
    /// Longest run of zeros.
    pub l0: usize,
    /// Longest run of ones.
    pub l1: usize,
    pub key_bits: usize,
    pub probes: usize,
}

impl MetricsReport {
    /// Metrics of one probe's initial key pair; runs are measured on `key_a`.
    pub fn for_initial_keys(key_a: &BitKey, key_g: &BitKey, probes: usize) -> Result<Self> {
        let (l0, l1) = max_run_lengths(key_a)?;
        Ok(MetricsReport {
            skdr: skdr(key_a, key_g)?,
            skgr_bits_per_probe: skgr(key_a.len(), probes)?,
            l0,
            l1,
            key_bits: key_a.len(),
            probes,
        })
    }
}

/// Fraction of positions where the two initial keys differ.
pub fn skdr(key_a: &BitKey, key_g: &BitKey) -> Result<f64> {
    if key_a.is_empty() {
        return Err(Error::param("SKDR of empty keys is undefined"));
    }
    Ok(key_a.hamming(key_g)? as f64 / key_a.len() as f64)
}

/// Key bits per channel probe.
pub fn skgr(key_bits: usize, probes: usize) -> Result<f64> {
    if probes == 0 {
        return Err(Error::param("SKGR needs at least one probe"));
    }
    Ok(key_bits as f64 / probes as f64)
}

/// Longest runs of consecutive zeros and ones, `(l0, l1)`.
pub fn max_run_lengths(bits: &BitKey) -> Result<(usize, usize)> {
    if bits.is_empty() {
        return Err(Error::param("run lengths of an empty key"));
    }
    let mut best = [0usize; 2];
    let mut run = 0usize;
    let mut prev = None;
    for &b in bits.bits() {
        run = if prev == Some(b) { run + 1 } else { 1 };
        prev = Some(b);
        let slot = &mut best[b as usize];
        *slot = (*slot).max(run);
    }
    Ok((best[0], best[1]))
}
