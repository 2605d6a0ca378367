use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lora_skg::harness::experiment::{rows_to_csv, run_simulation, run_trials, trials_to_csv};
use lora_skg::harness::{run_captures, run_sweep, selftest, ExperimentConfig};
use lora_skg::nist::run_suite;
use lora_skg::{BitKey, Error, Result};

#[derive(Parser)]
#[command(name = "lora-skg", version, about = "LoRa physical-layer secret key generation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulated trials and print the aggregate row.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Print one line per trial instead of the aggregate.
        #[arg(long)]
        per_trial: bool,
    },
    /// Run both shuffle arms across a parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Run the pipeline on recorded preamble captures.
    Captures {
        #[command(flatten)]
        common: Common,
    },
    /// Run the randomness battery on an ASCII 0/1 bit file.
    Nist {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-test battery.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set quantizer.alpha=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, value_name = "on|off")]
    shuffle: Option<String>,
    #[arg(long, value_name = "DB|inf")]
    snr_db: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_name = "all-bins|occupied-band")]
    bin_policy: Option<String>,
    #[arg(long, value_name = "AXIS:V1,V2,...")]
    sweep: Option<String>,
    #[arg(long)]
    capture_a_to_g: Option<PathBuf>,
    #[arg(long)]
    capture_g_to_a: Option<PathBuf>,
    #[arg(long)]
    capture_eve: Option<PathBuf>,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            match value {
                Some(v) => config.set(key, &v),
                None => Ok(()),
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        set("experiment.trials", self.trials.map(|v| v.to_string()))?;
        set("experiment.master_seed", self.seed.map(|v| v.to_string()))?;
        set("quantizer.alpha", self.alpha.map(|v| v.to_string()))?;
        set("quantizer.block_size", self.block_size.map(|v| v.to_string()))?;
        set("quantizer.shuffle", self.shuffle.clone())?;
        set("channel.snr_db", self.snr_db.clone())?;
        set("channel.rho", self.rho.map(|v| v.to_string()))?;
        set("quantizer.bin_policy", self.bin_policy.clone())?;
        set("experiment.sweep", self.sweep.clone())?;
        set("experiment.capture_a_to_g", path(&self.capture_a_to_g))?;
        set("experiment.capture_g_to_a", path(&self.capture_g_to_a))?;
        set("experiment.capture_eve", path(&self.capture_eve))?;
        for o in &self.overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("override '{o}' is not KEY=VALUE")))?;
            config.set(key.trim(), value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_bits(path: &Path) -> Result<BitKey> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse().map_err(|e: Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, per_trial } => {
            let config = common.config()?;
            let text = if per_trial {
                trials_to_csv(&run_trials(&config)?)
            } else {
                rows_to_csv(&[run_simulation(&config)?])
            };
            emit(common.out.as_deref(), &text)?;
        }
        Command::Sweep { common } => {
            let config = common.config()?;
            emit(common.out.as_deref(), &rows_to_csv(&run_sweep(&config)?))?;
        }
        Command::Captures { common } => {
            let config = common.config()?;
            let outcome = run_captures(&config)?;
            emit(common.out.as_deref(), &trials_to_csv(&[outcome]))?;
        }
        Command::Nist { file, out } => {
            let report = run_suite(&read_bits(&file)?);
            emit(out.as_deref(), &report.to_csv())?;
        }
        Command::Selftest { out } => {
            let checks = selftest::run();
            let mut text = String::new();
            for c in &checks {
                text.push_str(&c.to_string());
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
