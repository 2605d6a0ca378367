//! Least-squares CFR estimation from received preamble symbols.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::waveform::{gen_upchirp, IqSamples, LoRaParams};

/// Bins whose reference magnitude falls below this fraction of the peak are
/// never divided by.
pub const LOW_MAGNITUDE_GUARD: f64 = 1e-6;

/// Which DFT bins an estimate keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinPolicy {
    /// Every bin, in natural FFT order.
    #[default]
    AllBins,
    /// The `bins` bins nearest DC, ordered by ascending frequency.
    OccupiedBand { bins: usize },
}

impl BinPolicy {
    /// Occupied band of a LoRa symbol: `round(N_sym * bw / fs)` bins, i.e.
    /// those with `-bw/2 <= f < bw/2`.
    pub fn occupied_band(params: &LoRaParams) -> Self {
        let n = params.samples_per_symbol() as f64;
        BinPolicy::OccupiedBand {
            bins: (n * params.bw / params.fs).round() as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinPolicy::AllBins => "all-bins",
            BinPolicy::OccupiedBand { .. } => "occupied-band",
        }
    }

    /// Parses a policy name, sizing the occupied band for `params`.
    pub fn parse(s: &str, params: &LoRaParams) -> Option<Self> {
        match s {
            "all-bins" => Some(BinPolicy::AllBins),
            "occupied-band" => Some(BinPolicy::occupied_band(params)),
            _ => None,
        }
    }

    /// Candidate bin indices for an `n`-point DFT, before the magnitude guard.
    pub fn candidate_bins(self, n: usize) -> Vec<usize> {
        match self {
            BinPolicy::AllBins => (0..n).collect(),
            BinPolicy::OccupiedBand { bins } => {
                let width = bins.clamp(1, n);
                // signed bins in [-width/2, width - width/2)
                let lo = -((width / 2) as isize);
                (lo..lo + width as isize)
                    .map(|b| b.rem_euclid(n as isize) as usize)
                    .collect()
            }
        }
    }
}

/// Complex channel gain per retained frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    bins: Vec<Complex64>,
    bin_indices: Vec<usize>,
}

impl Cfr {
    pub fn new(bins: Vec<Complex64>, bin_indices: Vec<usize>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::param("CFR has no bins"));
        }
        if bins.len() != bin_indices.len() {
            return Err(Error::param("CFR bin values and indices differ in length"));
        }
        if bins.iter().any(|b| !(b.re.is_finite() && b.im.is_finite())) {
            return Err(Error::param("CFR contains non-finite values"));
        }
        Ok(Cfr { bins, bin_indices })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bin_indices(&self) -> &[usize] {
        &self.bin_indices
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn amplitudes(&self) -> CfrAmplitudes {
        CfrAmplitudes {
            values: self.bins.iter().map(|b| b.norm()).collect(),
        }
    }
}

/// Magnitudes `|H|` of a CFR, one per retained bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrAmplitudes {
    values: Vec<f64>,
}

impl CfrAmplitudes {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("amplitudes must be finite and non-negative"));
        }
        Ok(CfrAmplitudes { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn dft(samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Per-bin `R[b] / S[b]` of one received symbol against its reference.
pub fn ls_estimate(rx_symbol: &IqSamples, ref_symbol: &IqSamples, policy: BinPolicy) -> Result<Cfr> {
    if rx_symbol.len() != ref_symbol.len() {
        return Err(Error::param(format!(
            "received symbol has {} samples, reference has {}",
            rx_symbol.len(),
            ref_symbol.len()
        )));
    }
    let rx = dft(rx_symbol.samples());
    let reference = dft(ref_symbol.samples());
    divide_spectra(&rx, &reference, policy)
}

fn divide_spectra(rx: &[Complex64], reference: &[Complex64], policy: BinPolicy) -> Result<Cfr> {
    let peak = reference.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let floor = LOW_MAGNITUDE_GUARD * peak;
    let (indices, bins): (Vec<usize>, Vec<Complex64>) = policy
        .candidate_bins(reference.len())
        .into_iter()
        .filter(|&b| reference[b].norm() >= floor && reference[b].norm() > 0.0)
        .map(|b| (b, rx[b] / reference[b]))
        .unzip();
    Cfr::new(bins, indices)
}

/// Per-bin arithmetic mean of several estimates over the same bin set.
pub fn average_cfr(estimates: &[Cfr]) -> Result<Cfr> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::param("cannot average zero CFR estimates"))?;
    if estimates.iter().any(|e| e.bin_indices != first.bin_indices) {
        return Err(Error::param("CFR estimates cover different bin sets"));
    }
    let k = estimates.len() as f64;
    let bins = (0..first.len())
        .map(|b| estimates.iter().map(|e| e.bins[b]).sum::<Complex64>() / k)
        .collect();
    Cfr::new(bins, first.bin_indices.clone())
}

/// Splits a preamble-aligned reception into its K symbols, LS-estimates each
/// against the reference upchirp and averages the results.
pub fn estimate_from_frame(rx: &IqSamples, params: &LoRaParams, policy: BinPolicy) -> Result<Cfr> {
    let reference = gen_upchirp(params)?;
    let n = params.samples_per_symbol();
    let k = params.preamble_len;
    if rx.len() < k * n {
        return Err(Error::param(format!(
            "reception has {} samples, {k} symbols need {}",
            rx.len(),
            k * n
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut ref_spec = reference.samples().to_vec();
    fft.process(&mut ref_spec);

    let estimates = rx.samples()[..k * n]
        .chunks_exact(n)
        .map(|symbol| {
            let mut spec = symbol.to_vec();
            fft.process(&mut spec);
            divide_spectra(&spec, &ref_spec, policy)
        })
        .collect::<Result<Vec<_>>>()?;
    average_cfr(&estimates)
}
