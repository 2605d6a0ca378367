//! Experiment configuration.
//!
//! The file format is flat `key = value` lines grouped under `[section]`
//! headers, with `#` comments. Every key is optional and defaults to the
//! reference setup, so an empty file is a valid configuration:
//!
//! ```text
//! [lora]        sf, bw, fs, preamble_len, fc
//! [channel]     num_taps, decay_db, rho, snr_db (number or inf),
//!               eavesdropper_independent
//! [quantizer]   alpha, block_size, shuffle, shuffle_seed,
//!               encoding (plain | d-gray), spread (std | variance),
//!               bin_policy (all-bins | occupied-band)
//! [cascade]     num_passes, qber (auto | number), sample_fraction, rng_seed
//! [experiment]  trials, master_seed, sweep (e.g. alpha:0.1,0.3,0.5),
//!               mode (simulate | captures), capture_a_to_g, capture_g_to_a,
//!               capture_eve
//! ```
//!
//! [`ExperimentConfig::set`] takes the same keys as `section.key`, which is
//! how command-line overrides are applied on top of a file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cfr::BinPolicy;
use crate::channel::{exponential_profile, ChannelModel};
use crate::error::{Error, Result};
use crate::quantizer::{Encoding, QuantizerConfig, Spread};
use crate::reconciliation::{CascadeConfig, QberSetting, DEFAULT_SAMPLE_FRACTION};
use crate::waveform::LoRaParams;

pub const DEFAULT_DECAY_DB: f64 = 3.0;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinSelection {
    #[default]
    AllBins,
    OccupiedBand,
}

impl BinSelection {
    pub fn resolve(self, params: &LoRaParams) -> BinPolicy {
        match self {
            BinSelection::AllBins => BinPolicy::AllBins,
            BinSelection::OccupiedBand => BinPolicy::occupied_band(params),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinSelection::AllBins => "all-bins",
            BinSelection::OccupiedBand => "occupied-band",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    BlockSize,
    Snr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::BlockSize => "block_size",
            SweepAxis::Snr => "snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("sweep list is empty"));
        }
        for &v in &values {
            let ok = match axis {
                SweepAxis::Alpha => v.is_finite() && v >= 0.0,
                SweepAxis::BlockSize => v.fract() == 0.0 && v >= 2.0 && v <= u32::MAX as f64,
                SweepAxis::Snr => !v.is_nan(),
            };
            if !ok {
                return Err(Error::param(format!("invalid {} sweep value {v}", axis.name())));
            }
        }
        Ok(Sweep { axis, values })
    }
}

impl FromStr for Sweep {
    type Err = Error;

    /// `axis:v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (axis, list) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("sweep '{s}' is not of the form axis:v1,v2")))?;
        let axis = match axis.trim() {
            "alpha" => SweepAxis::Alpha,
            "block_size" | "m" => SweepAxis::BlockSize,
            "snr" | "snr_db" => SweepAxis::Snr,
            other => return Err(Error::param(format!("unknown sweep axis '{other}'"))),
        };
        let values = list
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(parse_f64)
            .collect::<Result<Vec<_>>>()?;
        Sweep::new(axis, values)
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "{}:{}", self.axis.name(), values.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Mode {
    #[default]
    Simulate,
    Captures {
        /// Reception at G of A's preamble.
        a_to_g: PathBuf,
        /// Reception at A of G's preamble.
        g_to_a: PathBuf,
        eve: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lora: LoRaParams,
    pub channel: ChannelModel,
    /// Per-tap decay used to rebuild the power delay profile when
    /// `num_taps` changes.
    pub decay_db: f64,
    pub quantizer: QuantizerConfig,
    pub bin_selection: BinSelection,
    pub cascade: CascadeConfig,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep: Option<Sweep>,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lora: LoRaParams::default(),
            channel: ChannelModel::default(),
            decay_db: DEFAULT_DECAY_DB,
            quantizer: QuantizerConfig::default(),
            bin_selection: BinSelection::default(),
            cascade: CascadeConfig::default(),
            trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_MASTER_SEED,
            sweep: None,
            mode: Mode::default(),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => t.parse().map_err(|_| Error::param(format!("'{t}' is not a number"))),
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|_| Error::param(format!("'{t}' is not an unsigned integer")))
}

fn parse_usize(s: &str) -> Result<usize> {
    usize::try_from(parse_u64(s)?).map_err(|_| Error::param(format!("'{s}' is too large")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::param(format!("'{other}' is not a boolean"))),
    }
}

impl ExperimentConfig {
    pub fn bin_policy(&self) -> BinPolicy {
        self.bin_selection.resolve(&self.lora)
    }

    pub fn validate(&self) -> Result<()> {
        self.lora.validate()?;
        self.channel.validate()?;
        self.quantizer.validate()?;
        if self.cascade.num_passes < 1 {
            return Err(Error::param("cascade needs at least one pass"));
        }
        match self.cascade.qber {
            QberSetting::Fixed(q) if !(q > 0.0 && q < 0.5) => {
                return Err(Error::param(format!("fixed QBER {q} outside (0, 0.5)")));
            }
            QberSetting::Auto { sample_fraction } if !(sample_fraction > 0.0 && sample_fraction < 1.0) => {
                return Err(Error::param(format!(
                    "QBER sample fraction {sample_fraction} outside (0, 1)"
                )));
            }
            _ => {}
        }
        if self.trials < 1 {
            return Err(Error::param("trials must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            Sweep::new(sweep.axis, sweep.values.clone())?;
        }
        Ok(())
    }

    /// Parses a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    line: line_no,
                    reason: format!("unterminated section header '{line}'"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                reason: format!("expected 'key = value', found '{line}'"),
            })?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            self.set(&full, value.trim()).map_err(|e| Error::Config {
                line: line_no,
                reason: match e {
                    Error::Parameter(msg) => msg,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    /// Sets one field by its `section.key` name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "lora.sf" => self.lora.sf = parse_u64(value)? as u32,
            "lora.bw" => self.lora.bw = parse_f64(value)?,
            "lora.fs" => self.lora.fs = parse_f64(value)?,
            "lora.preamble_len" => self.lora.preamble_len = parse_usize(value)?,
            "lora.fc" => self.lora.fc = parse_f64(value)?,

            "channel.num_taps" => {
                self.channel.num_taps = parse_usize(value)?;
                self.rebuild_profile();
            }
            "channel.decay_db" => {
                self.decay_db = parse_f64(value)?;
                self.rebuild_profile();
            }
            "channel.rho" => self.channel.reciprocity_rho = parse_f64(value)?,
            "channel.snr_db" => self.channel.snr_db = parse_f64(value)?,
            "channel.eavesdropper_independent" => self.channel.eavesdropper_independent = parse_bool(value)?,

            "quantizer.alpha" => self.quantizer.alpha = parse_f64(value)?,
            "quantizer.block_size" => self.quantizer.block_size = parse_usize(value)?,
            "quantizer.shuffle" => self.quantizer.shuffle_enabled = parse_bool(value)?,
            "quantizer.shuffle_seed" => self.quantizer.shuffle_seed = parse_u64(value)?,
            "quantizer.encoding" => {
                self.quantizer.encoding = match value {
                    "plain" => Encoding::Plain,
                    "d-gray" | "dgray" => Encoding::DGray,
                    other => return Err(Error::param(format!("unknown encoding '{other}'"))),
                }
            }
            "quantizer.spread" => {
                self.quantizer.spread = match value {
                    "std" | "stddev" => Spread::StdDev,
                    "variance" | "var" => Spread::Variance,
                    other => return Err(Error::param(format!("unknown spread '{other}'"))),
                }
            }
            "quantizer.bin_policy" => {
                self.bin_selection = match value {
                    "all-bins" => BinSelection::AllBins,
                    "occupied-band" => BinSelection::OccupiedBand,
                    other => return Err(Error::param(format!("unknown bin policy '{other}'"))),
                }
            }

            "cascade.num_passes" => self.cascade.num_passes = parse_usize(value)?,
            "cascade.qber" => {
                self.cascade.qber = if value.eq_ignore_ascii_case("auto") {
                    QberSetting::Auto {
                        sample_fraction: self.sample_fraction(),
                    }
                } else {
                    QberSetting::Fixed(parse_f64(value)?)
                }
            }
            "cascade.sample_fraction" => {
                let f = parse_f64(value)?;
                if let QberSetting::Auto { sample_fraction } = &mut self.cascade.qber {
                    *sample_fraction = f;
                } else {
                    return Err(Error::param("sample_fraction requires qber = auto"));
                }
            }
            "cascade.rng_seed" => self.cascade.rng_seed = parse_u64(value)?,

            "experiment.trials" => self.trials = parse_usize(value)?,
            "experiment.master_seed" => self.master_seed = parse_u64(value)?,
            "experiment.sweep" => {
                self.sweep = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(value.parse()?)
                }
            }
            "experiment.mode" => {
                self.mode = match value {
                    "simulate" => Mode::Simulate,
                    "captures" => match &self.mode {
                        Mode::Captures { .. } => self.mode.clone(),
                        Mode::Simulate => Mode::Captures {
                            a_to_g: PathBuf::new(),
                            g_to_a: PathBuf::new(),
                            eve: None,
                        },
                    },
                    other => return Err(Error::param(format!("unknown mode '{other}'"))),
                }
            }
            "experiment.capture_a_to_g" | "experiment.capture_g_to_a" | "experiment.capture_eve" => {
                self.set_capture(key, PathBuf::from(value));
            }
            other => return Err(Error::param(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn sample_fraction(&self) -> f64 {
        match self.cascade.qber {
            QberSetting::Auto { sample_fraction } => sample_fraction,
            QberSetting::Fixed(_) => DEFAULT_SAMPLE_FRACTION,
        }
    }

    fn rebuild_profile(&mut self) {
        self.channel.power_delay_profile = exponential_profile(self.channel.num_taps, self.decay_db);
    }

    fn set_capture(&mut self, key: &str, path: PathBuf) {
        if let Mode::Simulate = self.mode {
            self.mode = Mode::Captures {
                a_to_g: PathBuf::new(),
                g_to_a: PathBuf::new(),
                eve: None,
            };
        }
        if let Mode::Captures { a_to_g, g_to_a, eve } = &mut self.mode {
            match key {
                "experiment.capture_a_to_g" => *a_to_g = path,
                "experiment.capture_g_to_a" => *g_to_a = path,
                _ => *eve = Some(path),
            }
        }
    }
}
