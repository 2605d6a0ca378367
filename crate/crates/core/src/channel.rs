//! Reciprocal multipath channel simulation and bidirectional probing.
//!
//! The A->G (forward) and G->A (reverse) tap vectors are jointly
//! complex-Gaussian with per-tap correlation `rho`, so `rho = 1` is perfect
//! reciprocity. The eavesdropper only hears the gateway's transmission.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cfr::{estimate_from_frame, BinPolicy, Cfr};
use crate::error::{Error, Result};
use crate::seed;
use crate::waveform::{gen_preamble, IqSamples, LoRaParams};

const LABEL_TAPS: u64 = 0x7461_7073;
const LABEL_NOISE_A: u64 = 0xA;
const LABEL_NOISE_G: u64 = 0x6;
const LABEL_NOISE_E: u64 = 0xE;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub num_taps: usize,
    /// Average power of each tap, linear, summing to 1.
    pub power_delay_profile: Vec<f64>,
    pub reciprocity_rho: f64,
    /// Per-receiver SNR in dB. `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Draw the eavesdropper's taps independently. When false the
    /// eavesdropper sits next to A and sees the reverse channel.
    pub eavesdropper_independent: bool,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::exponential(4, 3.0, 0.99, 30.0)
    }
}

impl ChannelModel {
    /// `num_taps` taps whose power falls by `decay_db` per tap, normalized to
    /// unit total power.
    pub fn exponential(num_taps: usize, decay_db: f64, rho: f64, snr_db: f64) -> Self {
        ChannelModel {
            num_taps,
            power_delay_profile: exponential_profile(num_taps, decay_db),
            reciprocity_rho: rho,
            snr_db,
            eavesdropper_independent: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_taps < 1 {
            return Err(Error::param("channel needs at least one tap"));
        }
        if self.power_delay_profile.len() != self.num_taps {
            return Err(Error::param(format!(
                "power delay profile has {} entries for {} taps",
                self.power_delay_profile.len(),
                self.num_taps
            )));
        }
        if self.power_delay_profile.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::param("power delay profile entries must be finite and >= 0"));
        }
        let total: f64 = self.power_delay_profile.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("power delay profile sums to {total}, not 1")));
        }
        if !(0.0..=1.0).contains(&self.reciprocity_rho) {
            return Err(Error::param(format!(
                "reciprocity correlation {} outside [0, 1]",
                self.reciprocity_rho
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::param("SNR is NaN"));
        }
        Ok(())
    }
}

pub fn exponential_profile(num_taps: usize, decay_db: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_taps)
        .map(|l| 10f64.powf(-decay_db * l as f64 / 10.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// One block-fading draw of all three links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub forward_taps: Vec<Complex64>,
    pub reverse_taps: Vec<Complex64>,
    pub eve_taps: Vec<Complex64>,
}

/// CFR estimates produced by one probing round.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    /// A's estimate of the G->A channel.
    pub cfr_a: Cfr,
    /// G's estimate of the A->G channel.
    pub cfr_g: Cfr,
    /// The eavesdropper's estimate from G's transmission.
    pub cfr_e: Cfr,
}

/// Received preambles of one probing round, before estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReceptions {
    /// Received at A (sent by G over the reverse taps).
    pub at_a: IqSamples,
    /// Received at G (sent by A over the forward taps).
    pub at_g: IqSamples,
    pub at_e: IqSamples,
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channel(model: &ChannelModel, seed: u64) -> Result<ChannelRealization> {
    model.validate()?;
    let mut rng = seed::rng(seed);
    let rho = model.reciprocity_rho;
    let orth = (1.0 - rho * rho).max(0.0).sqrt();
    let mut forward = Vec::with_capacity(model.num_taps);
    let mut reverse = Vec::with_capacity(model.num_taps);
    let mut eve = Vec::with_capacity(model.num_taps);
    for &power in &model.power_delay_profile {
        let scale = power.sqrt();
        let f = complex_normal(&mut rng) * scale;
        let w = complex_normal(&mut rng) * scale;
        let e = complex_normal(&mut rng) * scale;
        forward.push(f);
        reverse.push(f * rho + w * orth);
        eve.push(e);
    }
    if !model.eavesdropper_independent {
        eve = reverse.clone();
    }
    Ok(ChannelRealization {
        forward_taps: forward,
        reverse_taps: reverse,
        eve_taps: eve,
    })
}

/// Linear convolution with `taps` (truncated to the input length) plus
/// circularly-symmetric Gaussian noise at `snr_db` relative to the mean
/// power of the convolved signal.
pub fn apply_channel(tx: &IqSamples, taps: &[Complex64], snr_db: f64, seed: u64) -> Result<IqSamples> {
    if taps.is_empty() {
        return Err(Error::param("channel has no taps"));
    }
    if snr_db.is_nan() {
        return Err(Error::param("SNR is NaN"));
    }
    let x = tx.samples();
    let mut y: Vec<Complex64> = (0..x.len())
        .map(|n| {
            taps.iter()
                .take(n + 1)
                .enumerate()
                .map(|(l, h)| h * x[n - l])
                .sum()
        })
        .collect();
    if snr_db.is_finite() {
        let signal_power = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64;
        let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
        let mut rng = seed::rng(seed);
        for s in &mut y {
            *s += complex_normal(&mut rng) * sigma;
        }
    }
    IqSamples::new(y, tx.fs())
}

/// Simulated receptions of one bidirectional probing round. Both directions
/// share one channel realization.
pub fn probe_receptions(
    params: &LoRaParams,
    model: &ChannelModel,
    seed: u64,
) -> Result<(ChannelRealization, ProbeReceptions)> {
    let realization = sample_channel(model, seed::derive(seed, LABEL_TAPS))?;
    let preamble = gen_preamble(params)?;
    let snr = model.snr_db;
    let at_g = apply_channel(&preamble, &realization.forward_taps, snr, seed::derive(seed, LABEL_NOISE_G))?;
    let at_a = apply_channel(&preamble, &realization.reverse_taps, snr, seed::derive(seed, LABEL_NOISE_A))?;
    let at_e = apply_channel(&preamble, &realization.eve_taps, snr, seed::derive(seed, LABEL_NOISE_E))?;
    Ok((realization, ProbeReceptions { at_a, at_g, at_e }))
}

/// Runs one probing round and each receiver's CFR estimation.
pub fn probe(params: &LoRaParams, model: &ChannelModel, policy: BinPolicy, seed: u64) -> Result<ProbeResult> {
    let (_, rx) = probe_receptions(params, model, seed)?;
    Ok(ProbeResult {
        cfr_a: estimate_from_frame(&rx.at_a, params, policy)?,
        cfr_g: estimate_from_frame(&rx.at_g, params, policy)?,
        cfr_e: estimate_from_frame(&rx.at_e, params, policy)?,
    })
}
