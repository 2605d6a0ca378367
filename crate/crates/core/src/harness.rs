//! Configuration, experiment orchestration and capture ingestion.

pub mod capture;
pub mod config;
pub mod experiment;
pub mod selftest;

pub use capture::{ingest_capture, write_capture};
pub use config::{ExperimentConfig, Mode, Sweep, SweepAxis};
pub use experiment::{run_captures, run_pipeline_once, run_sweep, ExperimentRow, TrialOutcome};
