//! LoRa upchirp and preamble generation, plus preamble detection in raw
//! captures.
//!
//! Everything is complex baseband. A symbol lasts `T = 2^sf / bw` seconds and
//! is sampled at `t = n / fs` for `n = 0..N_sym`, so the endpoint `t = T` is
//! not included and sample 0 has phase exactly 0.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Normalized correlation a detection peak must reach.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.5;

/// Multipath delay spread, in samples, whose energy counts toward a peak.
pub const DEFAULT_DELAY_SPREAD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoRaParams {
    pub sf: u32,
    /// Signal bandwidth in Hz.
    pub bw: f64,
    /// Sample rate in Hz.
    pub fs: f64,
    /// Number of upchirps in the preamble (K).
    pub preamble_len: usize,
    /// Center frequency in Hz. Informational; nothing is mixed to RF.
    pub fc: f64,
}

impl Default for LoRaParams {
    fn default() -> Self {
        LoRaParams {
            sf: 7,
            bw: 250e3,
            fs: 1e6,
            preamble_len: 8,
            fc: 868e6,
        }
    }
}

impl LoRaParams {
    pub fn validate(&self) -> Result<()> {
        if !(5..=12).contains(&self.sf) {
            return Err(Error::param(format!("spreading factor {} outside [5, 12]", self.sf)));
        }
        if !(self.bw.is_finite() && self.bw > 0.0 && self.fs.is_finite()) {
            return Err(Error::param("bandwidth and sample rate must be positive and finite"));
        }
        if self.fs < self.bw {
            return Err(Error::param(format!(
                "sample rate {} below bandwidth {}",
                self.fs, self.bw
            )));
        }
        if self.preamble_len < 1 {
            return Err(Error::param("preamble length must be at least 1"));
        }
        let n = self.symbol_samples_exact();
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::param(format!(
                "samples per symbol {n} is not an integer (sf={}, bw={}, fs={})",
                self.sf, self.bw, self.fs
            )));
        }
        Ok(())
    }

    fn symbol_samples_exact(&self) -> f64 {
        f64::from(1u32 << self.sf) / self.bw * self.fs
    }

    /// Samples per symbol, `N_sym = 2^sf / bw * fs`.
    pub fn samples_per_symbol(&self) -> usize {
        self.symbol_samples_exact().round() as usize
    }

    /// Symbol duration `T = 2^sf / bw` in seconds.
    pub fn symbol_duration(&self) -> f64 {
        f64::from(1u32 << self.sf) / self.bw
    }

    /// Sweep rate `k = bw / T` in Hz/s.
    pub fn sweep_rate(&self) -> f64 {
        self.bw / self.symbol_duration()
    }

    pub fn preamble_samples(&self) -> usize {
        self.preamble_len * self.samples_per_symbol()
    }

    /// Closed-form chirp phase `pi * (-bw * t + k * t^2)` at sample `n`.
    pub fn chirp_phase(&self, n: usize) -> f64 {
        let t = n as f64 / self.fs;
        PI * (-self.bw + self.sweep_rate() * t) * t
    }
}

/// Complex baseband samples at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSamples {
    samples: Vec<Complex64>,
    fs: f64,
}

impl IqSamples {
    pub fn new(samples: Vec<Complex64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("IQ sample buffer is empty"));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::param(format!("non-finite IQ sample at index {i}")));
        }
        Ok(IqSamples { samples, fs })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sub-range `[start, start + len)` as a new buffer.
    pub fn window(&self, start: usize, len: usize) -> Result<IqSamples> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or_else(|| {
                Error::param(format!(
                    "window [{start}, {start}+{len}) exceeds {} samples",
                    self.samples.len()
                ))
            })?;
        IqSamples::new(self.samples[start..end].to_vec(), self.fs)
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// One upchirp `s(t) = exp(j*pi*(-bw + k*t)*t)` over `[0, T)`.
pub fn gen_upchirp(params: &LoRaParams) -> Result<IqSamples> {
    params.validate()?;
    let samples = (0..params.samples_per_symbol())
        .map(|n| Complex64::from_polar(1.0, params.chirp_phase(n)))
        .collect();
    IqSamples::new(samples, params.fs)
}

/// `preamble_len` back-to-back copies of the upchirp.
pub fn gen_preamble(params: &LoRaParams) -> Result<IqSamples> {
    let chirp = gen_upchirp(params)?;
    let samples = chirp.samples().repeat(params.preamble_len);
    IqSamples::new(samples, params.fs)
}

/// Offset of the preamble in `capture`, using the default threshold.
pub fn detect_preamble(capture: &IqSamples, params: &LoRaParams) -> Result<usize> {
    detect_preamble_with_threshold(capture, params, DEFAULT_DETECTION_THRESHOLD)
}

/// Slides the K-upchirp reference over the capture and returns the offset
/// with the largest normalized correlation magnitude. Ties resolve to the
/// earliest offset.
///
/// The threshold is applied to [`peak_score`] at that offset, which also
/// credits energy arriving over [`DEFAULT_DELAY_SPREAD`] samples of
/// multipath delay.
pub fn detect_preamble_with_threshold(
    capture: &IqSamples,
    params: &LoRaParams,
    threshold: f64,
) -> Result<usize> {
    let reference = gen_preamble(params)?;
    let reference = reference.samples();
    let span = reference.len();
    let x = capture.samples();
    if x.len() < span {
        return Err(Error::param(format!(
            "capture has {} samples, preamble needs {span}",
            x.len()
        )));
    }
    let ref_norm = (span as f64).sqrt();

    // Running window energy avoids recomputing the norm at every offset.
    let mut energy: f64 = x[..span].iter().map(|s| s.norm_sqr()).sum();
    let mut best = (0usize, f64::NEG_INFINITY);
    for offset in 0..=x.len() - span {
        if offset > 0 {
            energy += x[offset + span - 1].norm_sqr() - x[offset - 1].norm_sqr();
        }
        let window = &x[offset..offset + span];
        let dot: Complex64 = window.iter().zip(reference).map(|(a, r)| a * r.conj()).sum();
        let denom = energy.max(0.0).sqrt() * ref_norm;
        let score = if denom > 0.0 { dot.norm() / denom } else { 0.0 };
        if score > best.1 + 1e-12 {
            best = (offset, score);
        }
    }
    let score = peak_score(&x[best.0..best.0 + span], reference, params, DEFAULT_DELAY_SPREAD);
    if score < threshold {
        return Err(Error::NotFound(format!(
            "peak score {score:.3} below threshold {threshold}"
        )));
    }
    Ok(best.0)
}

/// Fraction of a window's energy that matches the reference up to a delay of
/// `delay_spread` samples, in `[0, 1]`.
///
/// The dechirped preamble is periodic in the symbol length, and a copy
/// delayed by `d` samples lands `d * bw / fs` bins from DC in the folded
/// symbol's spectrum. The score is the square root of the energy within that
/// many bins of DC. For `delay_spread = 0` it is the plain normalized
/// correlation.
pub fn peak_score(window: &[Complex64], reference: &[Complex64], params: &LoRaParams, delay_spread: usize) -> f64 {
    let m = window.len().min(reference.len());
    let z: Vec<Complex64> = window[..m].iter().zip(reference).map(|(y, r)| y * r.conj()).collect();
    let energy: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    if energy <= 0.0 {
        return 0.0;
    }
    let n = params.samples_per_symbol().min(m);
    let mut folded = vec![Complex64::new(0.0, 0.0); n];
    for (i, v) in z.iter().enumerate() {
        folded[i % n] += v;
    }
    let reach = ((delay_spread as f64 * params.bw / params.fs).ceil() as i64).min((n as i64 - 1) / 2);
    let captured: f64 = (-reach..=reach)
        .map(|f| {
            let step = -2.0 * PI * f as f64 / n as f64;
            folded
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, step * i as f64))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum();
    (captured / (m as f64 * energy)).sqrt().min(1.0)
}
