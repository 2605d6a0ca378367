//! Quick battery of known-answer checks, run by the `selftest` verb.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::bits::BitKey;
use crate::cfr::{estimate_from_frame, BinPolicy};
use crate::confirm::digest;
use crate::harness::capture::{encode_capture, parse_capture, to_capture_precision};
use crate::harness::config::{ExperimentConfig, Sweep, SweepAxis};
use crate::harness::experiment::{rows_to_csv, run_pipeline_once, run_sweep};
use crate::nist;
use crate::reconciliation::{cascade, CascadeConfig, KeyOracle};
use crate::seed;
use crate::waveform::{gen_preamble, gen_upchirp, IqSamples, LoRaParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, body: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    match body() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn chirp_phase() -> crate::Result<(bool, String)> {
    let p = LoRaParams::default();
    let chirp = gen_upchirp(&p)?;
    let t_sym = 128.0 / 250e3;
    let k = 250e3 / t_sym;
    let worst = chirp
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let t = n as f64 / 1e6;
            let expected = PI * (-250e3 + k * t) * t;
            let d = s.arg() - expected;
            (d + PI).rem_euclid(2.0 * PI) - PI
        })
        .fold(0.0f64, |m, d| m.max(d.abs()));
    Ok((chirp.len() == 512 && worst < 1e-9, format!("max phase error {worst:.2e} rad")))
}

fn ls_two_tap() -> crate::Result<(bool, String)> {
    let p = LoRaParams::default();
    let pre = gen_preamble(&p)?;
    let x = pre.samples();
    let n = x.len();
    // circular two-tap channel 1 + 0.5 z^-1
    let y: Vec<Complex64> = (0..n).map(|i| x[i] + x[(i + n - 1) % n] * 0.5).collect();
    let cfr = estimate_from_frame(&IqSamples::new(y, p.fs)?, &p, BinPolicy::AllBins)?;
    let n_sym = p.samples_per_symbol() as f64;
    let worst = cfr
        .bin_indices()
        .iter()
        .zip(cfr.bins())
        .map(|(&b, h)| {
            let expected = Complex64::new(1.0, 0.0) + Complex64::from_polar(0.5, -2.0 * PI * b as f64 / n_sym);
            (h - expected).norm() / expected.norm()
        })
        .fold(0.0f64, f64::max);
    Ok((worst < 1e-9, format!("max relative error {worst:.2e}")))
}

fn cascade_fixes_errors() -> crate::Result<(bool, String)> {
    let mut ok = 0;
    let total = 20;
    for i in 0..total {
        let mut rng = seed::rng(seed::trial_seed(0x5E1F, i));
        let g: Vec<bool> = (0..512).map(|_| rng.gen()).collect();
        let a: Vec<bool> = g.iter().map(|&b| b ^ rng.gen_bool(0.05)).collect();
        let g = BitKey::initial(g);
        let config = CascadeConfig::default().with_qber(0.05);
        let out = cascade(&BitKey::initial(a), &mut KeyOracle::new(&g), &config)?;
        if out.corrected_key.bits() == g.bits() {
            ok += 1;
        }
    }
    Ok((ok == total, format!("{ok}/{total} keys corrected")))
}

fn digest_vector() -> crate::Result<(bool, String)> {
    let d = digest(&BitKey::initial(Vec::new())).to_hex();
    let expected = "af5570f5a1810b7af78caf4bc70a660f0df51e42baf91d4de5b2328de0e83dfc";
    Ok((d == expected, format!("empty-key digest {}", &d[..16])))
}

fn nist_examples() -> crate::Result<(bool, String)> {
    let bits = |s: &str| -> Vec<bool> { s.bytes().map(|c| c == b'1').collect() };
    let cases = [
        ("frequency", nist::frequency_test(&bits("1011010101")), 0.527089),
        ("block_frequency", nist::block_frequency_test(&bits("0110011010"), 3), 0.801252),
        ("cumulative_sums", nist::cumulative_sums_test(&bits("1011010111")), 0.4116588),
        (
            "longest_run",
            nist::longest_run_test(&bits(concat!(
                "11001100000101010110110001001100111000000000001001001101010100010001",
                "001111010110100000001101011111001100111001101101100010110010"
            ))),
            0.180609,
        ),
        ("approximate_entropy", nist::approximate_entropy_test(&bits("0100110101"), 3), 0.261961),
    ];
    let bad: Vec<&str> = cases
        .iter()
        .filter(|(_, p, want)| !p.is_some_and(|p| (p - want).abs() < 1e-4))
        .map(|(name, _, _)| *name)
        .collect();
    let detail = if bad.is_empty() {
        format!("{} worked examples reproduced", cases.len())
    } else {
        format!("mismatch in {}", bad.join(", "))
    };
    Ok((bad.is_empty(), detail))
}

fn capture_round_trip() -> crate::Result<(bool, String)> {
    let p = LoRaParams::default();
    let pre = to_capture_precision(&gen_preamble(&p)?)?;
    let bytes = encode_capture(&pre);
    let back = parse_capture(&bytes, Path::new("selftest"), &p)?;
    Ok((back == pre, format!("{} octets", bytes.len())))
}

fn perfect_channel() -> crate::Result<(bool, String)> {
    let mut c = ExperimentConfig::default();
    c.channel.reciprocity_rho = 1.0;
    c.channel.snr_db = f64::INFINITY;
    let o = run_pipeline_once(&c, 1)?;
    let ok = o.metrics.skdr == 0.0 && o.reconciliation.outcome.flips.is_empty() && o.confirmation.is_matched();
    Ok((ok, format!("{} key bits, skdr {}", o.metrics.key_bits, o.metrics.skdr)))
}

fn sweep_determinism() -> crate::Result<(bool, String)> {
    let mut c = ExperimentConfig {
        trials: 4,
        ..ExperimentConfig::default()
    };
    c.sweep = Some(Sweep::new(SweepAxis::Alpha, vec![0.3, 0.7])?);
    let a = rows_to_csv(&run_sweep(&c)?);
    let b = rows_to_csv(&run_sweep(&c)?);
    Ok((a == b, format!("{} octets of CSV", a.len())))
}

pub fn run() -> Vec<Check> {
    vec![
        check("upchirp_phase", chirp_phase),
        check("ls_estimate", ls_two_tap),
        check("cascade", cascade_fixes_errors),
        check("digest", digest_vector),
        check("nist_examples", nist_examples),
        check("capture_round_trip", capture_round_trip),
        check("perfect_channel", perfect_channel),
        check("sweep_determinism", sweep_determinism),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn battery_passes() {
        for c in super::run() {
            assert!(c.passed, "{c}");
        }
    }
}
