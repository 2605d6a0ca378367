//! Physical-layer secret key generation for LoRa links.
//!
//! Two legitimate parties exchange LoRa preambles, estimate the channel
//! frequency response from the received upchirps, and turn the reciprocal
//! CFR amplitudes into a shared key:
//!
//! 1. [`waveform`] and [`channel`] produce (or [`harness::capture`] ingests)
//!    the received preambles.
//! 2. [`cfr`] computes the per-bin LS estimate averaged across the preamble.
//! 3. [`quantizer`] shuffles the amplitudes with a shared rule and applies the
//!    adaptive dual-threshold quantizer with its index-censoring exchange.
//! 4. [`reconciliation`] corrects residual mismatches with cascade.
//! 5. [`confirm`] exchanges SHA-256 digests and derives the final key.
//!
//! [`metrics`] and [`nist`] evaluate the result, and [`harness`] drives
//! seeded experiments and sweeps.

pub mod bits;
pub mod cfr;
pub mod channel;
pub mod confirm;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nist;
pub mod quantizer;
pub mod reconciliation;
pub mod seed;
pub mod waveform;

pub use bits::{BitKey, KeyStage};
pub use error::{Error, Result};
pub use num_complex::Complex64;
