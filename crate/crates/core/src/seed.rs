//! Seed derivation.
//!
//! Every random draw in the crate is fed from a ChaCha stream whose seed is
//! derived from a parent seed and a label. Derivation goes through SplitMix64
//! so that neighbouring labels yield unrelated streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `label` under `parent`.
pub fn derive(parent: u64, label: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ label)
}

/// Seed of trial `index` under an experiment's master seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
