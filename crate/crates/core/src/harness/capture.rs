//! Complex-float capture files: interleaved little-endian `f32` pairs, I then
//! Q, with no header.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::{IqSamples, LoRaParams};

const PAIR_BYTES: usize = 8;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Parses raw capture bytes. `path` is only used in error messages.
pub fn parse_capture(bytes: &[u8], path: &Path, params: &LoRaParams) -> Result<IqSamples> {
    let format = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    if bytes.is_empty() {
        return Err(format("file is empty".into()));
    }
    if bytes.len() % PAIR_BYTES != 0 {
        return Err(format(format!(
            "size {} is not a multiple of {PAIR_BYTES} octets",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(bytes.len() / PAIR_BYTES);
    for (i, pair) in bytes.chunks_exact(PAIR_BYTES).enumerate() {
        let re = f32::from_le_bytes(pair[..4].try_into().unwrap());
        let im = f32::from_le_bytes(pair[4..].try_into().unwrap());
        for (value, offset) in [(re, i * PAIR_BYTES), (im, i * PAIR_BYTES + 4)] {
            if !value.is_finite() {
                return Err(format(format!("non-finite value {value} at octet offset {offset}")));
            }
        }
        samples.push(Complex64::new(re as f64, im as f64));
    }
    IqSamples::new(samples, params.fs)
}

pub fn ingest_capture(path: &Path, params: &LoRaParams) -> Result<IqSamples> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    parse_capture(&bytes, path, params)
}

/// Serializes samples in the capture format. Components are narrowed to `f32`.
pub fn encode_capture(samples: &IqSamples) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * PAIR_BYTES);
    for s in samples.samples() {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn write_capture(path: &Path, samples: &IqSamples) -> Result<()> {
    fs::write(path, encode_capture(samples)).map_err(|e| io_error(path, e))
}

/// Rounds every component to `f32`, i.e. what a capture file would hold.
pub fn to_capture_precision(samples: &IqSamples) -> Result<IqSamples> {
    let rounded = samples
        .samples()
        .iter()
        .map(|s| Complex64::new(s.re as f32 as f64, s.im as f32 as f64))
        .collect();
    IqSamples::new(rounded, samples.fs())
}
