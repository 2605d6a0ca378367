//! Seeded Monte Carlo checks of the statistical behaviour of each stage.

use rand::Rng;
use rand_distr::StandardNormal;

use lora_skg::cfr::{estimate_from_frame, BinPolicy, CfrAmplitudes};
use lora_skg::channel::{apply_channel, probe, sample_channel, ChannelModel};
use lora_skg::harness::experiment::run_trials;
use lora_skg::harness::{config::BinSelection, ExperimentConfig};
use lora_skg::metrics::max_run_lengths;
use lora_skg::nist::{self, run_suite};
use lora_skg::quantizer::{quantize_pipeline, QuantizerConfig};
use lora_skg::reconciliation::estimate_qber;
use lora_skg::seed;
use lora_skg::waveform::{detect_preamble, gen_preamble, IqSamples, LoRaParams};
use lora_skg::{BitKey, Complex64};

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn magnitudes(c: &lora_skg::cfr::Cfr) -> Vec<f64> {
    c.bins().iter().map(|h| h.norm()).collect()
}

fn model(rho: f64, snr_db: f64) -> ChannelModel {
    ChannelModel::exponential(4, 3.0, rho, snr_db)
}

#[test]
fn detection_at_20_db_is_sample_exact() {
    let p = LoRaParams::default();
    let pre = gen_preamble(&p).unwrap();
    let mut exact = 0;
    for trial in 0..100u64 {
        let offset = (seed::trial_seed(20, trial) % 1000) as usize;
        let mut padded = vec![Complex64::new(0.0, 0.0); offset];
        padded.extend_from_slice(pre.samples());
        padded.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(600));
        let clean = IqSamples::new(padded, p.fs).unwrap();
        let rx = apply_channel(&clean, &[Complex64::new(1.0, 0.0)], 20.0, seed::trial_seed(21, trial)).unwrap();
        if detect_preamble(&rx, &p).unwrap() == offset {
            exact += 1;
        }
    }
    assert!(exact >= 99, "{exact}/100");
}

#[test]
fn unreciprocal_taps_are_uncorrelated_and_powers_follow_profile() {
    let m = model(0.0, 30.0);
    let draws = 100_000;
    let mut cross = Complex64::new(0.0, 0.0);
    let (mut pf, mut pr) = (0.0, 0.0);
    let mut power = vec![0.0; m.num_taps];
    for i in 0..draws {
        let r = sample_channel(&m, seed::trial_seed(7, i)).unwrap();
        cross += r.forward_taps[0] * r.reverse_taps[0].conj();
        pf += r.forward_taps[0].norm_sqr();
        pr += r.reverse_taps[0].norm_sqr();
        for (acc, t) in power.iter_mut().zip(&r.forward_taps) {
            *acc += t.norm_sqr();
        }
    }
    let corr = cross.norm() / (pf * pr).sqrt();
    assert!(corr < 0.02, "{corr}");
    for (got, want) in power.iter().zip(&m.power_delay_profile) {
        let got = got / draws as f64;
        assert!((got / want - 1.0).abs() < 0.03, "{got} vs {want}");
    }
}

#[test]
fn noise_power_at_0_db() {
    let tx = IqSamples::new(vec![Complex64::new(1.0, 0.0); 100_000], 1e6).unwrap();
    let rx = apply_channel(&tx, &[Complex64::new(1.0, 0.0)], 0.0, 5).unwrap();
    let noise: f64 = rx.samples().iter().map(|s| (s - 1.0).norm_sqr()).sum::<f64>() / 1e5;
    assert!((0.9..=1.1).contains(&noise), "{noise}");
}

#[test]
fn noiseless_channel_preserves_power_on_average() {
    let p = LoRaParams::default();
    let pre = gen_preamble(&p).unwrap();
    let m = model(0.99, f64::INFINITY);
    let trials = 10_000u64;
    let mean: f64 = (0..trials)
        .map(|i| {
            let r = sample_channel(&m, seed::trial_seed(11, i)).unwrap();
            let y = apply_channel(&pre, &r.forward_taps, f64::INFINITY, 0).unwrap();
            y.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64
        })
        .sum::<f64>()
        / trials as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn reciprocal_amplitudes_correlate_and_eavesdropper_does_not() {
    let p = LoRaParams::default();
    let m = model(0.99, 30.0);
    // correlation pooled over all trials and bins
    let (mut a, mut g, mut e) = (Vec::new(), Vec::new(), Vec::new());
    let mut eg = 0.0;
    for i in 0..100u64 {
        let r = probe(&p, &m, BinPolicy::occupied_band(&p), seed::trial_seed(13, i)).unwrap();
        eg += pearson(&magnitudes(&r.cfr_e), &magnitudes(&r.cfr_g));
        a.extend(magnitudes(&r.cfr_a));
        g.extend(magnitudes(&r.cfr_g));
        e.extend(magnitudes(&r.cfr_e));
    }
    let ag = pearson(&a, &g);
    assert!(ag >= 0.95, "{ag}");
    assert!((eg / 100.0).abs() < 0.2, "{}", eg / 100.0);
    assert!(pearson(&e, &g).abs() < 0.2);
}

#[test]
fn amplitude_correlation_grows_with_rho() {
    let p = LoRaParams::default();
    let policy = BinPolicy::occupied_band(&p);
    let means: Vec<f64> = [0.0, 0.5, 0.9, 0.99, 1.0]
        .iter()
        .map(|&rho| {
            (0..200u64)
                .map(|i| {
                    let r = probe(&p, &model(rho, 30.0), policy, seed::trial_seed(17, i)).unwrap();
                    pearson(&magnitudes(&r.cfr_a), &magnitudes(&r.cfr_g))
                })
                .sum::<f64>()
                / 200.0
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn preamble_averaging_beats_one_symbol_at_30_db() {
    let p = LoRaParams::default();
    let policy = BinPolicy::occupied_band(&p);
    let pre = gen_preamble(&p).unwrap();
    let n = p.samples_per_symbol();
    let one = LoRaParams { preamble_len: 1, ..p };
    let (mut avg, mut single) = (0.0, 0.0);
    for i in 0..100u64 {
        let rx = apply_channel(&pre, &[Complex64::new(1.0, 0.0)], 30.0, seed::trial_seed(19, i)).unwrap();
        let first = IqSamples::new(rx.samples()[..n].to_vec(), p.fs).unwrap();
        let rms = |c: lora_skg::cfr::Cfr| {
            (c.bins().iter().map(|h| (h - 1.0).norm_sqr()).sum::<f64>() / c.len() as f64).sqrt()
        };
        avg += rms(estimate_from_frame(&rx, &p, policy).unwrap());
        single += rms(estimate_from_frame(&first, &one, policy).unwrap());
    }
    assert!(avg < single, "{avg} vs {single}");
}

fn correlated_pair(rng: &mut impl Rng, n: usize, rho: f64) -> (CfrAmplitudes, CfrAmplitudes) {
    let (mut a, mut g) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        a.push((5.0 + x).max(0.0));
        g.push((5.0 + rho * x + (1.0 - rho * rho).sqrt() * w).max(0.0));
    }
    (CfrAmplitudes::new(a).unwrap(), CfrAmplitudes::new(g).unwrap())
}

#[test]
fn correlated_gaussian_pair_quantizes_with_few_mismatches() {
    let cfg = QuantizerConfig::default();
    let (mut skdr, mut kept) = (0.0, 0.0);
    for i in 0..100u64 {
        let (a, g) = correlated_pair(&mut seed::rng(seed::trial_seed(23, i)), 512, 0.99);
        let q = quantize_pipeline(&a, &g, &cfg).unwrap();
        skdr += lora_skg::metrics::skdr(&q.key_a, &q.key_g).unwrap();
        kept += q.exchange.retained.len() as f64 / 512.0;
    }
    assert!(skdr / 100.0 < 0.05, "{}", skdr / 100.0);
    assert!((0.55..=0.85).contains(&(kept / 100.0)), "{}", kept / 100.0);
}

#[test]
fn shuffle_shortens_runs_on_smooth_profiles() {
    let (mut off, mut on) = (0.0, 0.0);
    for i in 0..100u64 {
        let mut rng = seed::rng(seed::trial_seed(29, i));
        let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let a: Vec<f64> = (0..512)
            .map(|k| 2.0 + (k as f64 * 0.02 + phase).sin() + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let amps = CfrAmplitudes::new(a).unwrap();
        for (shuffle_enabled, acc) in [(false, &mut off), (true, &mut on)] {
            let cfg = QuantizerConfig { shuffle_enabled, ..QuantizerConfig::default() };
            let q = quantize_pipeline(&amps, &amps, &cfg).unwrap();
            let (l0, l1) = max_run_lengths(&q.key_a).unwrap();
            *acc += (l0 + l1) as f64;
        }
    }
    assert!(off > on, "{off} vs {on}");
}

#[test]
fn qber_sample_estimate_covers_truth() {
    let mut inside = 0;
    for i in 0..1000u64 {
        let mut rng = seed::rng(seed::trial_seed(31, i));
        let g: Vec<bool> = (0..2048).map(|_| rng.gen()).collect();
        let a: Vec<bool> = g.iter().map(|&b| b ^ rng.gen_bool(0.10)).collect();
        let s = estimate_qber(&BitKey::initial(a), &BitKey::initial(g), 0.2, i).unwrap();
        if (0.06..=0.14).contains(&s.qber) {
            inside += 1;
        }
    }
    assert!(inside >= 950, "{inside}/1000");
}

fn prng_bits(seed_value: u64, n: usize) -> Vec<bool> {
    let mut rng = seed::rng(seed_value);
    (0..n).map(|_| rng.gen()).collect()
}

#[test]
fn cryptographic_stream_passes_suite() {
    let report = run_suite(&BitKey::initial(prng_bits(0xA11CE, 1_000_000)));
    assert!(report.passed(), "{report}");
}

#[test]
fn rejection_rate_is_calibrated() {
    use rayon::prelude::*;
    let rejections: Vec<[bool; 8]> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let report = run_suite(&BitKey::initial(prng_bits(seed::trial_seed(37, i), 100_000)));
            let mut out = [false; 8];
            for (slot, r) in out.iter_mut().zip(&report.results) {
                *slot = !r.passed();
            }
            out
        })
        .collect();
    for (t, test) in nist::NistTest::ALL.iter().enumerate() {
        let count = rejections.iter().filter(|r| r[t]).count();
        assert!(count <= 5, "{}: {count}/200 rejections", test.name());
    }
}

#[test]
fn default_harness_occupied_band_keys_agree() {
    let mut config = ExperimentConfig { trials: 100, ..ExperimentConfig::default() };
    config.bin_selection = BinSelection::OccupiedBand;
    let outcomes = run_trials(&config).unwrap();
    let good = outcomes.iter().filter(|o| o.metrics.skdr <= 0.05).count();
    assert!(good >= 90, "{good}/100");
    let eve: f64 = outcomes.iter().map(|o| o.eve_skdr.unwrap()).sum::<f64>() / 100.0;
    assert!((0.4..=0.6).contains(&eve), "{eve}");
}
