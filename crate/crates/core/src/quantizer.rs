//! Shuffle preprocessing and adaptive dual-threshold quantization.
//!
//! Both parties cut their amplitude vectors into blocks of `m`, derive
//! `mean +/- alpha * spread` thresholds per block and censor values strictly
//! between them. A sends its censored positions, G answers with the union of
//! both censored sets, and each side quantizes the surviving positions:
//! `1` at or above the upper threshold, `0` at or below the lower one.
//!
//! A value the other party kept can still fall inside this party's gap, since
//! thresholds are computed independently. Such a value maps to the nearer
//! threshold, ties going to `1`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::bits::BitKey;
use crate::cfr::CfrAmplitudes;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    /// One bit per retained value.
    #[default]
    Plain,
    /// `0 -> 01`, `1 -> 10`.
    DGray,
}

/// How `sigma` in `mean +/- alpha * sigma` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spread {
    /// Population standard deviation.
    #[default]
    StdDev,
    /// Population variance.
    Variance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerConfig {
    pub alpha: f64,
    pub block_size: usize,
    pub shuffle_enabled: bool,
    pub shuffle_seed: u64,
    pub encoding: Encoding,
    pub spread: Spread,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            alpha: 0.5,
            block_size: 64,
            shuffle_enabled: true,
            shuffle_seed: 0x5EED,
            encoding: Encoding::Plain,
            spread: Spread::StdDev,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::param(format!("alpha {} must be finite and >= 0", self.alpha)));
        }
        if self.block_size < 2 {
            return Err(Error::param(format!("block size {} below 2", self.block_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub q_plus: f64,
    pub q_minus: f64,
}

impl ThresholdPair {
    /// Strictly between the thresholds; such values are censored.
    pub fn censors(&self, v: f64) -> bool {
        v < self.q_plus && v > self.q_minus
    }

    pub fn quantize(&self, v: f64) -> bool {
        if v >= self.q_plus {
            true
        } else if v <= self.q_minus {
            false
        } else {
            v - self.q_minus >= self.q_plus - v
        }
    }
}

/// Per-block thresholds of one party. `pairs[i]` covers positions
/// `i * block_size .. (i + 1) * block_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockThresholds {
    pub block_size: usize,
    pub pairs: Vec<ThresholdPair>,
}

impl BlockThresholds {
    pub fn for_position(&self, i: usize) -> Option<&ThresholdPair> {
        self.pairs.get(i / self.block_size)
    }
}

/// Strictly increasing positions into the (possibly shuffled) amplitudes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexList {
    indices: Vec<usize>,
}

impl IndexList {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("index list must be strictly increasing"));
        }
        Ok(IndexList { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &IndexList) -> IndexList {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.indices, &other.indices);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            merged.push(next);
        }
        IndexList { indices: merged }
    }

    /// Positions in `0..len` not in this list.
    pub fn complement(&self, len: usize) -> IndexList {
        IndexList {
            indices: (0..len).filter(|&i| !self.contains(i)).collect(),
        }
    }

    /// Wire form: ASCII decimal, comma separated, newline terminated.
    pub fn to_wire(&self) -> String {
        let mut s = self
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        s.push('\n');
        s
    }

    pub fn from_wire(s: &str) -> Result<Self> {
        let body = s
            .strip_suffix('\n')
            .ok_or_else(|| Error::param("index list is not newline terminated"))?;
        if body.is_empty() {
            return Ok(IndexList::default());
        }
        let indices = body
            .split(',')
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::param(format!("bad index {t:?} in index list")))
            })
            .collect::<Result<Vec<_>>>()?;
        IndexList::new(indices)
    }
}

impl fmt::Display for IndexList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_wire().trim_end())
    }
}

impl FromStr for IndexList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.ends_with('\n') {
            IndexList::from_wire(s)
        } else {
            IndexList::from_wire(&format!("{s}\n"))
        }
    }
}

/// Seeded uniform permutation of `0..len`; element `i` of the shuffled
/// vector is element `perm[i]` of the original.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut seed::rng(seed));
    perm
}

pub fn shuffle(amps: &CfrAmplitudes, seed: u64) -> Result<CfrAmplitudes> {
    if amps.is_empty() {
        return Err(Error::param("cannot shuffle an empty amplitude vector"));
    }
    let values = amps.values();
    CfrAmplitudes::new(permutation(values.len(), seed).into_iter().map(|i| values[i]).collect())
}

pub fn compute_thresholds(block: &[f64], alpha: f64, spread: Spread) -> Result<ThresholdPair> {
    if block.is_empty() {
        return Err(Error::param("threshold block is empty"));
    }
    let n = block.len() as f64;
    let mean = block.iter().sum::<f64>() / n;
    let variance = block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sigma = match spread {
        Spread::StdDev => variance.sqrt(),
        Spread::Variance => variance,
    };
    Ok(ThresholdPair {
        q_plus: mean + alpha * sigma,
        q_minus: mean - alpha * sigma,
    })
}

/// One party's thresholds and locally censored positions. A trailing block
/// shorter than two values gets no thresholds and is censored whole.
pub fn local_censoring(values: &[f64], config: &QuantizerConfig) -> Result<(BlockThresholds, IndexList)> {
    config.validate()?;
    let m = config.block_size;
    let mut pairs = Vec::with_capacity(values.len().div_ceil(m));
    let mut censored = Vec::new();
    for (b, block) in values.chunks(m).enumerate() {
        let start = b * m;
        if block.len() < 2 {
            censored.extend(start..start + block.len());
            continue;
        }
        let pair = compute_thresholds(block, config.alpha, config.spread)?;
        censored.extend(
            block
                .iter()
                .enumerate()
                .filter(|(_, &v)| pair.censors(v))
                .map(|(i, _)| start + i),
        );
        pairs.push(pair);
    }
    Ok((BlockThresholds { block_size: m, pairs }, IndexList { indices: censored }))
}

/// Result of the two-message censoring exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoringExchange {
    /// Positions both parties quantize.
    pub retained: IndexList,
    pub thresholds_a: BlockThresholds,
    pub thresholds_g: BlockThresholds,
    /// Message 1, A -> G: A's censored positions.
    pub message_a: IndexList,
    /// Message 2, G -> A: union of both censored sets.
    pub message_g: IndexList,
}

pub fn censoring_exchange(
    amps_a: &CfrAmplitudes,
    amps_g: &CfrAmplitudes,
    config: &QuantizerConfig,
) -> Result<CensoringExchange> {
    if amps_a.len() != amps_g.len() {
        return Err(Error::param(format!(
            "amplitude vectors differ in length ({} vs {})",
            amps_a.len(),
            amps_g.len()
        )));
    }
    let (thresholds_a, message_a) = local_censoring(amps_a.values(), config)?;
    let (thresholds_g, censored_g) = local_censoring(amps_g.values(), config)?;
    let message_g = censored_g.union(&message_a);
    Ok(CensoringExchange {
        retained: message_g.complement(amps_a.len()),
        thresholds_a,
        thresholds_g,
        message_a,
        message_g,
    })
}

pub fn quantize(
    amps: &CfrAmplitudes,
    retained: &IndexList,
    thresholds: &BlockThresholds,
    encoding: Encoding,
) -> Result<BitKey> {
    if retained.is_empty() {
        return Err(Error::param("no amplitudes survived censoring"));
    }
    let values = amps.values();
    let mut bits = Vec::with_capacity(retained.len() * 2);
    for &i in retained.indices() {
        let v = *values
            .get(i)
            .ok_or_else(|| Error::param(format!("retained index {i} out of range")))?;
        let pair = thresholds
            .for_position(i)
            .ok_or_else(|| Error::param(format!("no thresholds cover index {i}")))?;
        let bit = pair.quantize(v);
        match encoding {
            Encoding::Plain => bits.push(bit),
            Encoding::DGray => bits.extend([bit, !bit]),
        }
    }
    Ok(BitKey::initial(bits))
}

/// Initial keys of both parties plus the public exchange that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPair {
    pub key_a: BitKey,
    pub key_g: BitKey,
    pub exchange: CensoringExchange,
}

fn preprocess(amps: &CfrAmplitudes, config: &QuantizerConfig) -> Result<CfrAmplitudes> {
    if config.shuffle_enabled {
        shuffle(amps, config.shuffle_seed)
    } else {
        Ok(amps.clone())
    }
}

pub fn quantize_pipeline(
    amps_a: &CfrAmplitudes,
    amps_g: &CfrAmplitudes,
    config: &QuantizerConfig,
) -> Result<QuantizedPair> {
    config.validate()?;
    if amps_a.len() != amps_g.len() {
        return Err(Error::param(format!(
            "amplitude vectors differ in length ({} vs {})",
            amps_a.len(),
            amps_g.len()
        )));
    }
    let a = preprocess(amps_a, config)?;
    let g = preprocess(amps_g, config)?;
    let exchange = censoring_exchange(&a, &g, config)?;
    let key_a = quantize(&a, &exchange.retained, &exchange.thresholds_a, config.encoding)?;
    let key_g = quantize(&g, &exchange.retained, &exchange.thresholds_g, config.encoding)?;
    Ok(QuantizedPair { key_a, key_g, exchange })
}

/// The eavesdropper's key: it applies the public shuffle rule to its own
/// amplitudes, computes its own thresholds, and keeps the positions left by
/// the overheard union message.
pub fn eavesdropper_key(
    amps_e: &CfrAmplitudes,
    overheard_union: &IndexList,
    config: &QuantizerConfig,
) -> Result<BitKey> {
    let e = preprocess(amps_e, config)?;
    let (thresholds, _) = local_censoring(e.values(), config)?;
    let retained = overheard_union.complement(e.len());
    quantize(&e, &retained, &thresholds, config.encoding)
}
