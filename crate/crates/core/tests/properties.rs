use std::collections::HashSet;

use proptest::prelude::*;

use lora_skg::cfr::{average_cfr, ls_estimate, BinPolicy, Cfr, CfrAmplitudes};
use lora_skg::confirm::{canonical_bytes, confirm, digest};
use lora_skg::metrics::{max_run_lengths, skdr};
use lora_skg::nist;
use lora_skg::quantizer::{censoring_exchange, quantize_pipeline, shuffle, Encoding, QuantizerConfig};
use lora_skg::reconciliation::{cascade, CascadeConfig, KeyOracle};
use lora_skg::waveform::IqSamples;
use lora_skg::{BitKey, Complex64};

fn amps(v: Vec<f64>) -> CfrAmplitudes {
    CfrAmplitudes::new(v).unwrap()
}

fn key(v: Vec<bool>) -> BitKey {
    BitKey::initial(v)
}

fn amplitude_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (8usize..300).prop_flat_map(|n| (prop::collection::vec(0.0f64..4.0, n), prop::collection::vec(0.0f64..4.0, n)))
}

fn config(alpha: f64, block_size: usize, shuffle_enabled: bool) -> QuantizerConfig {
    QuantizerConfig {
        alpha,
        block_size,
        shuffle_enabled,
        ..QuantizerConfig::default()
    }
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retained_lists_agree_and_are_sorted((a, g) in amplitude_pair(), alpha in 0.0f64..1.5, m in 2usize..80) {
        let ex = censoring_exchange(&amps(a.clone()), &amps(g), &config(alpha, m, false)).unwrap();
        let idx = ex.retained.indices();
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        // A derives its retained set from message 2 alone
        let from_union: Vec<usize> = (0..a.len()).filter(|i| !ex.message_g.contains(*i)).collect();
        prop_assert_eq!(from_union, idx.to_vec());
        for i in ex.message_a.indices() {
            prop_assert!(ex.message_g.contains(*i));
        }
    }

    #[test]
    fn equal_amplitudes_give_equal_keys(v in prop::collection::vec(0.0f64..4.0, 8..300), on in any::<bool>()) {
        if let Ok(q) = quantize_pipeline(&amps(v.clone()), &amps(v), &config(0.5, 16, on)) {
            prop_assert_eq!(skdr(&q.key_a, &q.key_g).unwrap(), 0.0);
        }
    }

    #[test]
    fn shuffle_preserves_bit_multiset_with_global_thresholds(v in prop::collection::vec(0.0f64..4.0, 8..300), alpha in 0.0f64..1.0) {
        let m = v.len();
        let count = |on: bool| {
            quantize_pipeline(&amps(v.clone()), &amps(v.clone()), &config(alpha, m, on))
                .map(|q| q.key_a.bits().iter().filter(|&&b| b).count())
                .ok()
        };
        prop_assert_eq!(count(true), count(false));
    }

    #[test]
    fn shuffle_is_a_permutation(v in prop::collection::vec(0.0f64..4.0, 1..300), seed in any::<u64>()) {
        let out = shuffle(&amps(v.clone()), seed).unwrap();
        let mut a = v.clone();
        let mut b = out.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        prop_assert_eq!(&out, &shuffle(&amps(v), seed).unwrap());
    }

    #[test]
    fn retained_fraction_non_increasing_in_alpha((a, g) in amplitude_pair(), lo in 0.0f64..1.0, step in 0.0f64..1.0) {
        let kept = |alpha: f64| censoring_exchange(&amps(a.clone()), &amps(g.clone()), &config(alpha, 32, false)).unwrap().retained.len();
        prop_assert!(kept(lo + step) <= kept(lo));
    }

    #[test]
    fn d_gray_pairs_are_complementary((a, g) in amplitude_pair()) {
        let plain = quantize_pipeline(&amps(a.clone()), &amps(g.clone()), &config(0.3, 16, true));
        let dgray = quantize_pipeline(&amps(a), &amps(g), &QuantizerConfig { encoding: Encoding::DGray, ..config(0.3, 16, true) });
        if let (Ok(p), Ok(d)) = (plain, dgray) {
            prop_assert_eq!(d.key_a.len(), 2 * p.key_a.len());
            for (pair, &bit) in d.key_a.bits().chunks(2).zip(p.key_a.bits()) {
                prop_assert_eq!(pair, &[bit, !bit][..]);
            }
        }
    }

    #[test]
    fn cascade_flips_only_true_errors(g in prop::collection::vec(any::<bool>(), 64..600), rate in 0.0f64..0.15, seed in any::<u64>()) {
        let mut rng = lora_skg::seed::rng(seed);
        let a: Vec<bool> = g.iter().map(|&b| b ^ rand::Rng::gen_bool(&mut rng, rate)).collect();
        let errors: HashSet<usize> = (0..g.len()).filter(|&i| a[i] != g[i]).collect();
        let g = key(g);
        let cfg = CascadeConfig { rng_seed: seed, ..CascadeConfig::default() }.with_qber(rate.max(0.01));
        let out = cascade(&key(a.clone()), &mut KeyOracle::new(&g), &cfg).unwrap();
        let mut seen = HashSet::new();
        for &f in &out.flips {
            prop_assert!(errors.contains(&f));
            prop_assert!(seen.insert(f));
        }
        prop_assert_eq!(out.corrected_key.len(), a.len());
        prop_assert!(out.parity_bits_leaked >= out.parity_messages);
        if out.converged {
            prop_assert_eq!(out.corrected_key.parity(&(0..a.len()).collect::<Vec<_>>()), g.parity(&(0..a.len()).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn skdr_is_a_normalized_metric(n in 1usize..400, seed in any::<u64>()) {
        let mut rng = lora_skg::seed::rng(seed);
        let mut draw = || key((0..n).map(|_| rand::Rng::gen::<bool>(&mut rng)).collect());
        let (a, b, c) = (draw(), draw(), draw());
        let brute = a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count() as f64 / n as f64;
        prop_assert_eq!(skdr(&a, &b).unwrap(), brute);
        prop_assert_eq!(skdr(&a, &b).unwrap(), skdr(&b, &a).unwrap());
        prop_assert_eq!(skdr(&a, &a).unwrap(), 0.0);
        prop_assert!(skdr(&a, &c).unwrap() <= skdr(&a, &b).unwrap() + skdr(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn complement_swaps_run_lengths(bits in prop::collection::vec(any::<bool>(), 1..400)) {
        let k = key(bits);
        let (l0, l1) = max_run_lengths(&k).unwrap();
        prop_assert_eq!(max_run_lengths(&k.complement()).unwrap(), (l1, l0));
    }

    #[test]
    fn ls_estimate_is_linear(rx1 in complex_vec(64), rx2 in complex_vec(64), reference in complex_vec(64), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        prop_assume!(reference.iter().all(|s| s.norm() > 0.1));
        let iq = |v: Vec<Complex64>| IqSamples::new(v, 1.0).unwrap();
        let r = iq(reference);
        let mix: Vec<Complex64> = rx1.iter().zip(&rx2).map(|(x, y)| x * a + y * b).collect();
        let h1 = ls_estimate(&iq(rx1), &r, BinPolicy::AllBins).unwrap();
        let h2 = ls_estimate(&iq(rx2), &r, BinPolicy::AllBins).unwrap();
        let hm = ls_estimate(&iq(mix), &r, BinPolicy::AllBins).unwrap();
        for ((m, x), y) in hm.bins().iter().zip(h1.bins()).zip(h2.bins()) {
            let want = x * a + y * b;
            prop_assert!((m - want).norm() <= 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn average_is_order_independent(est in prop::collection::vec(complex_vec(16), 1..9), seed in any::<u64>()) {
        let cfrs: Vec<Cfr> = est.into_iter().map(|b| Cfr::new(b, (0..16).collect()).unwrap()).collect();
        let mut shuffled = cfrs.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut lora_skg::seed::rng(seed));
        let x = average_cfr(&cfrs).unwrap();
        let y = average_cfr(&shuffled).unwrap();
        for (p, q) in x.bins().iter().zip(y.bins()) {
            prop_assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn confirmation_is_symmetric(a in prop::collection::vec(any::<bool>(), 1..300), flip in any::<bool>()) {
        let mut g = key(a.clone());
        if flip {
            g.flip(0);
        }
        let a = key(a);
        prop_assert_eq!(confirm(&a, &g).is_matched(), confirm(&g, &a).is_matched());
        prop_assert_eq!(confirm(&a, &g).is_matched(), !flip);
    }

    #[test]
    fn serialization_is_injective(a in prop::collection::vec(any::<bool>(), 1..80), b in prop::collection::vec(any::<bool>(), 1..80)) {
        let (ka, kb) = (key(a.clone()), key(b.clone()));
        prop_assert_eq!(canonical_bytes(&ka) == canonical_bytes(&kb), a == b);
        prop_assert_eq!(digest(&ka) == digest(&kb), a == b);
    }

    #[test]
    fn frequency_p_value_ignores_order_and_complement(bits in prop::collection::vec(any::<bool>(), 100..2000), seed in any::<u64>()) {
        let p = nist::frequency_test(&bits).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let flipped: Vec<bool> = bits.iter().map(|b| !b).collect();
        prop_assert!((nist::frequency_test(&flipped).unwrap() - p).abs() < 1e-12);
        let mut permuted = bits.clone();
        rand::seq::SliceRandom::shuffle(&mut permuted[..], &mut lora_skg::seed::rng(seed));
        prop_assert!((nist::frequency_test(&permuted).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn p_values_lie_in_unit_interval(bits in prop::collection::vec(any::<bool>(), 1000..3000)) {
        let ps = [
            nist::block_frequency_test(&bits, 128),
            nist::cumulative_sums_test(&bits),
            nist::longest_run_test(&bits),
            nist::spectral_fft_test(&bits),
            nist::approximate_entropy_test(&bits, 2),
            nist::non_overlapping_template_test(&bits, &[false, false, true], 4),
            nist::linear_complexity_test(&bits, 100),
        ];
        for p in ps.into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&p), "{p}");
        }
    }
}

#[test]
fn ordering_matters_for_run_sensitive_tests() {
    // a biased-run input: half zeros then half ones
    let n = 2048;
    let runs: Vec<bool> = (0..n).map(|i| i >= n / 2).collect();
    let mut mixed = runs.clone();
    rand::seq::SliceRandom::shuffle(&mut mixed[..], &mut lora_skg::seed::rng(3));
    assert_eq!(nist::frequency_test(&runs), nist::frequency_test(&mixed));
    assert_ne!(nist::longest_run_test(&runs), nist::longest_run_test(&mixed));
    assert_ne!(nist::approximate_entropy_test(&runs, 2), nist::approximate_entropy_test(&mixed, 2));
}
