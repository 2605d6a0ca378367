//! Seeded pipeline trials, parameter sweeps and capture replay.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::bits::BitKey;
use crate::cfr::{estimate_from_frame, CfrAmplitudes};
use crate::channel::{probe_receptions, ChannelModel};
use crate::confirm::{confirm, Confirmation};
use crate::error::{Error, Result};
use crate::harness::capture::{ingest_capture, to_capture_precision};
use crate::harness::config::{ExperimentConfig, Mode, SweepAxis};
use crate::metrics::{skdr, MetricsReport};
use crate::quantizer::{eavesdropper_key, quantize_pipeline, QuantizedPair};
use crate::reconciliation::{reconcile_local, LocalReconciliation};
use crate::seed;
use crate::waveform::{detect_preamble, IqSamples};

const LABEL_CASCADE: u64 = 0xC0A5;

/// Preamble receptions feeding one trial, aligned to the first upchirp.
#[derive(Debug, Clone, PartialEq)]
pub struct Receptions {
    pub at_a: IqSamples,
    pub at_g: IqSamples,
    pub at_e: Option<IqSamples>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_seed: u64,
    pub quantized: QuantizedPair,
    /// Measured on the initial keys.
    pub metrics: MetricsReport,
    pub reconciliation: LocalReconciliation,
    /// Disagreement left after reconciliation.
    pub reconciled_skdr: f64,
    pub confirmation: Confirmation,
    /// Eavesdropper's key against G's initial key; `None` without an
    /// eavesdropper reception.
    pub eve_skdr: Option<f64>,
}

impl TrialOutcome {
    pub fn reconciled_key(&self) -> &BitKey {
        &self.reconciliation.outcome.corrected_key
    }
}

/// Simulated receptions for one trial, stored at capture precision so that a
/// serialized copy replays bit-exactly.
pub fn simulate_receptions(config: &ExperimentConfig, trial_seed: u64) -> Result<Receptions> {
    let (_, rx) = probe_receptions(&config.lora, &config.channel, trial_seed)?;
    Ok(Receptions {
        at_a: to_capture_precision(&rx.at_a)?,
        at_g: to_capture_precision(&rx.at_g)?,
        at_e: Some(to_capture_precision(&rx.at_e)?),
    })
}

fn amplitudes(rx: &IqSamples, config: &ExperimentConfig) -> Result<CfrAmplitudes> {
    Ok(estimate_from_frame(rx, &config.lora, config.bin_policy())?.amplitudes())
}

/// Everything downstream of the receptions: estimation, quantization,
/// reconciliation, confirmation and the eavesdropper's attempt.
pub fn run_from_receptions(config: &ExperimentConfig, rx: &Receptions, trial_seed: u64) -> Result<TrialOutcome> {
    let amps_a = amplitudes(&rx.at_a, config)?;
    let amps_g = amplitudes(&rx.at_g, config)?;
    let quantized = quantize_pipeline(&amps_a, &amps_g, &config.quantizer)?;
    let metrics = MetricsReport::for_initial_keys(&quantized.key_a, &quantized.key_g, 1)?;

    let mut cascade = config.cascade.clone();
    cascade.rng_seed = seed::derive(trial_seed, seed::derive(config.cascade.rng_seed, LABEL_CASCADE));
    let reconciliation = reconcile_local(&quantized.key_a, &quantized.key_g, &cascade)?;
    let reconciled_skdr = skdr(&reconciliation.outcome.corrected_key, &reconciliation.key_g)?;
    let confirmation = confirm(&reconciliation.outcome.corrected_key, &reconciliation.key_g);

    let eve_skdr = match &rx.at_e {
        Some(at_e) => {
            let amps_e = amplitudes(at_e, config)?;
            let key_e = eavesdropper_key(&amps_e, &quantized.exchange.message_g, &config.quantizer)?;
            Some(skdr(&key_e, &quantized.key_g)?)
        }
        None => None,
    };

    Ok(TrialOutcome {
        trial_seed,
        quantized,
        metrics,
        reconciliation,
        reconciled_skdr,
        confirmation,
        eve_skdr,
    })
}

/// One simulated trial.
pub fn run_pipeline_once(config: &ExperimentConfig, trial_seed: u64) -> Result<TrialOutcome> {
    config.validate()?;
    let rx = simulate_receptions(config, trial_seed)?;
    run_from_receptions(config, &rx, trial_seed)
}

/// `config.trials` simulated trials, ordered by trial index.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed::trial_seed(config.master_seed, i);
            let rx = simulate_receptions(config, s)?;
            run_from_receptions(config, &rx, s)
        })
        .collect()
}

fn load_aligned(path: &Path, config: &ExperimentConfig) -> Result<IqSamples> {
    let capture = ingest_capture(path, &config.lora)?;
    let offset = detect_preamble(&capture, &config.lora).map_err(|e| match e {
        Error::NotFound(msg) | Error::Parameter(msg) => Error::NotFound(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    capture.window(offset, config.lora.preamble_samples())
}

/// Replays recorded receptions through the pipeline. The trial seed is the
/// one simulate mode uses for trial 0.
pub fn run_captures(config: &ExperimentConfig) -> Result<TrialOutcome> {
    config.validate()?;
    let Mode::Captures { a_to_g, g_to_a, eve } = &config.mode else {
        return Err(Error::param("capture mode needs capture_a_to_g and capture_g_to_a"));
    };
    if a_to_g.as_os_str().is_empty() || g_to_a.as_os_str().is_empty() {
        return Err(Error::param("capture mode needs both capture_a_to_g and capture_g_to_a"));
    }
    let rx = Receptions {
        at_a: load_aligned(g_to_a, config)?,
        at_g: load_aligned(a_to_g, config)?,
        at_e: eve.as_deref().map(|p| load_aligned(p, config)).transpose()?,
    };
    run_from_receptions(config, &rx, seed::trial_seed(config.master_seed, 0))
}

/// Aggregate statistics of one sweep point and shuffle arm. Standard
/// deviations are population values over the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: Option<f64>,
    pub shuffle: bool,
    pub skdr_mean: f64,
    pub skdr_std: f64,
    pub skgr_mean: f64,
    pub skgr_std: f64,
    pub l0_mean: f64,
    pub l0_std: f64,
    pub l1_mean: f64,
    pub l1_std: f64,
    /// NaN when no trial had an eavesdropper reception.
    pub eve_skdr_mean: f64,
    pub cascade_converged_frac: f64,
    pub leak_mean: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "sweep_axis,sweep_value,shuffle,skdr_mean,skdr_std,skgr_mean,l0_mean,l1_mean,\
eve_skdr_mean,cascade_converged_frac,leak_mean,trials,seed";

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentRow {
    pub fn from_trials(
        outcomes: &[TrialOutcome],
        sweep_axis: Option<SweepAxis>,
        sweep_value: Option<f64>,
        shuffle: bool,
        seed: u64,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::param("no trials to aggregate"));
        }
        let (skdr_mean, skdr_std) = mean_std(outcomes.iter().map(|o| o.metrics.skdr));
        let (skgr_mean, skgr_std) = mean_std(outcomes.iter().map(|o| o.metrics.skgr_bits_per_probe));
        let (l0_mean, l0_std) = mean_std(outcomes.iter().map(|o| o.metrics.l0 as f64));
        let (l1_mean, l1_std) = mean_std(outcomes.iter().map(|o| o.metrics.l1 as f64));
        let (eve_skdr_mean, _) = mean_std(outcomes.iter().filter_map(|o| o.eve_skdr));
        let converged = outcomes.iter().filter(|o| o.reconciliation.outcome.converged).count();
        let (leak_mean, _) = mean_std(outcomes.iter().map(|o| o.reconciliation.outcome.parity_bits_leaked as f64));
        Ok(ExperimentRow {
            sweep_axis,
            sweep_value,
            shuffle,
            skdr_mean,
            skdr_std,
            skgr_mean,
            skgr_std,
            l0_mean,
            l0_std,
            l1_mean,
            l1_std,
            eve_skdr_mean,
            cascade_converged_frac: converged as f64 / outcomes.len() as f64,
            leak_mean,
            trials: outcomes.len(),
            seed,
        })
    }

    pub fn to_csv_line(&self) -> String {
        let f = |x: f64| if x.is_nan() { "NA".to_string() } else { format!("{x:.6}") };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sweep_axis.map_or("none", |a| a.name()),
            self.sweep_value.map_or_else(String::new, |v| v.to_string()),
            self.shuffle,
            f(self.skdr_mean),
            f(self.skdr_std),
            f(self.skgr_mean),
            f(self.l0_mean),
            f(self.l1_mean),
            f(self.eve_skdr_mean),
            f(self.cascade_converged_frac),
            f(self.leak_mean),
            self.trials,
            self.seed
        )
    }
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Aggregate row for `config` as given, with no sweep.
pub fn run_simulation(config: &ExperimentConfig) -> Result<ExperimentRow> {
    let outcomes = run_trials(config)?;
    ExperimentRow::from_trials(&outcomes, None, None, config.quantizer.shuffle_enabled, config.master_seed)
}

/// Copy of `config` with one sweep value applied.
pub fn with_sweep_value(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> ExperimentConfig {
    let mut c = config.clone();
    match axis {
        SweepAxis::Alpha => c.quantizer.alpha = value,
        SweepAxis::BlockSize => c.quantizer.block_size = value as usize,
        SweepAxis::Snr => {
            c.channel = ChannelModel {
                snr_db: value,
                ..c.channel
            }
        }
    }
    c
}

/// Both shuffle arms of one sweep point, trial by trial. The arms share
/// each trial's receptions.
pub fn run_paired_trials(config: &ExperimentConfig) -> Result<Vec<(TrialOutcome, TrialOutcome)>> {
    config.validate()?;
    let mut on = config.clone();
    on.quantizer.shuffle_enabled = true;
    let mut off = config.clone();
    off.quantizer.shuffle_enabled = false;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed::trial_seed(config.master_seed, i);
            let rx = simulate_receptions(config, s)?;
            Ok((run_from_receptions(&on, &rx, s)?, run_from_receptions(&off, &rx, s)?))
        })
        .collect()
}

/// For each sweep value, a shuffle-on row followed by a shuffle-off row.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::param("sweep requires experiment.sweep"))?;
    let mut rows = Vec::with_capacity(sweep.values.len() * 2);
    for &value in &sweep.values {
        let point = with_sweep_value(config, sweep.axis, value);
        let (on, off): (Vec<_>, Vec<_>) = run_paired_trials(&point)?.into_iter().unzip();
        for (outcomes, shuffle) in [(on, true), (off, false)] {
            rows.push(ExperimentRow::from_trials(
                &outcomes,
                Some(sweep.axis),
                Some(value),
                shuffle,
                config.master_seed,
            )?);
        }
    }
    Ok(rows)
}

pub const TRIAL_CSV_HEADER: &str = "trial,trial_seed,key_bits,skdr,skgr,l0,l1,qber_used,sampled_bits,leak,\
messages,converged,flips,reconciled_skdr,confirmed,eve_skdr,digest";

/// One line per trial.
pub fn trials_to_csv(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::from(TRIAL_CSV_HEADER);
    out.push('\n');
    for (i, o) in outcomes.iter().enumerate() {
        let r = &o.reconciliation;
        let digest = match &o.confirmation {
            Confirmation::Matched { digest, .. } => digest.to_hex(),
            Confirmation::Mismatched { .. } => String::new(),
        };
        let _ = writeln!(
            out,
            "{i},{},{},{:.6},{:.6},{},{},{:.6},{},{},{},{},{},{:.6},{},{},{digest}",
            o.trial_seed,
            o.metrics.key_bits,
            o.metrics.skdr,
            o.metrics.skgr_bits_per_probe,
            o.metrics.l0,
            o.metrics.l1,
            r.qber_used,
            r.sampled_bits,
            r.outcome.parity_bits_leaked,
            r.outcome.parity_messages,
            r.outcome.converged,
            r.outcome.flips.len(),
            o.reconciled_skdr,
            o.confirmation.is_matched(),
            o.eve_skdr.map_or_else(|| "NA".to_string(), |e| format!("{e:.6}")),
        );
    }
    out
}
