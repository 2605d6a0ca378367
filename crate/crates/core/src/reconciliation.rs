//! Cascade information reconciliation.
//!
//! A holds its key locally and talks to G through a [`ParityOracle`]: each
//! question is an index set, each answer one parity bit of G's key. The
//! protocol runs `num_passes` passes with block sizes `k1, 2*k1, ...`; pass one
//! uses natural order, later passes a seeded permutation. Every odd block is
//! bisected down to one erroneous bit, and after each flip all earlier blocks
//! containing that bit are re-examined.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::bits::{BitKey, KeyStage};
use crate::error::{Error, Result};
use crate::quantizer::permutation;
use crate::seed;

/// Floor and ceiling applied to sampled QBER estimates.
pub const QBER_CLAMP: (f64, f64) = (0.01, 0.49);

pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QberSetting {
    Fixed(f64),
    /// Estimate by disclosing a random sample of this fraction of the key;
    /// the sampled bits are then dropped from both keys.
    Auto { sample_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub num_passes: usize,
    pub qber: QberSetting,
    pub rng_seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            num_passes: 4,
            qber: QberSetting::Auto {
                sample_fraction: DEFAULT_SAMPLE_FRACTION,
            },
            rng_seed: 0xCA5C,
        }
    }
}

impl CascadeConfig {
    pub fn with_qber(&self, qber: f64) -> Self {
        CascadeConfig {
            qber: QberSetting::Fixed(qber),
            ..self.clone()
        }
    }
}

/// `k1 = ceil(0.73 / qber)`, clamped to `[4, len]`.
pub fn initial_block_size(qber: f64, len: usize) -> usize {
    let k = (0.73 / qber).ceil() as usize;
    k.max(4).min(len.max(1))
}

/// Answers parity questions about the remote key.
pub trait ParityOracle {
    /// Length of the remote key.
    fn len(&self) -> usize;

    fn parity(&mut self, indices: &[usize]) -> bool;

    /// Several questions in one message.
    fn parities(&mut self, sets: &[&[usize]]) -> Vec<bool> {
        sets.iter().map(|s| self.parity(s)).collect()
    }
}

/// In-process oracle over a visible key.
#[derive(Debug)]
pub struct KeyOracle<'a> {
    key: &'a BitKey,
    answers: usize,
}

impl<'a> KeyOracle<'a> {
    pub fn new(key: &'a BitKey) -> Self {
        KeyOracle { key, answers: 0 }
    }

    pub fn answers(&self) -> usize {
        self.answers
    }
}

impl ParityOracle for KeyOracle<'_> {
    fn len(&self) -> usize {
        self.key.len()
    }

    fn parity(&mut self, indices: &[usize]) -> bool {
        self.answers += 1;
        self.key.parity(indices)
    }
}

/// One logged parity question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityQuery {
    /// Pass number starting at 1; 0 marks the final full-key check.
    pub pass: usize,
    pub block_id: usize,
    /// First 8 bytes of SHA-256 over the big-endian u64 indices, in hex.
    pub indices_hash: String,
    pub parity_a: bool,
    pub parity_g: bool,
}

impl ParityQuery {
    pub fn csv_header() -> &'static str {
        "pass,block_id,indices_hash,parity_a,parity_g"
    }
}

impl fmt::Display for ParityQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.pass, self.block_id, self.indices_hash, self.parity_a as u8, self.parity_g as u8
        )
    }
}

fn hash_indices(indices: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in indices {
        h.update((i as u64).to_be_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationOutcome {
    pub corrected_key: BitKey,
    pub parity_bits_leaked: usize,
    /// Round trips: one per pass-wide parity batch, one per bisection step,
    /// one for the final check.
    pub parity_messages: usize,
    pub converged: bool,
    /// Positions flipped in A's key, in order.
    pub flips: Vec<usize>,
}

/// Outcome of one bisection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BisectResult {
    pub position: usize,
    pub queries: usize,
}

/// Halves `block` until one position is left, following the half whose
/// parities disagree. `block` must hold an odd number of disagreements.
pub fn binary_search_error<O: ParityOracle + ?Sized>(
    block: &[usize],
    key_a: &BitKey,
    oracle: &mut O,
) -> Result<BisectResult> {
    let mut session = Session::new(oracle, None);
    session.bisect(block, key_a, 0, 0)
}

struct Session<'o, 'l, O: ParityOracle + ?Sized> {
    oracle: &'o mut O,
    log: Option<&'l mut Vec<ParityQuery>>,
    leaked: usize,
    messages: usize,
}

impl<'o, 'l, O: ParityOracle + ?Sized> Session<'o, 'l, O> {
    fn new(oracle: &'o mut O, log: Option<&'l mut Vec<ParityQuery>>) -> Self {
        Session {
            oracle,
            log,
            leaked: 0,
            messages: 0,
        }
    }

    fn record(&mut self, pass: usize, block_id: usize, indices: &[usize], parity_a: bool, parity_g: bool) {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(ParityQuery {
                pass,
                block_id,
                indices_hash: hash_indices(indices),
                parity_a,
                parity_g,
            });
        }
    }

    fn ask(&mut self, pass: usize, block_id: usize, indices: &[usize], key: &BitKey) -> bool {
        let g = self.oracle.parity(indices);
        self.leaked += 1;
        self.messages += 1;
        self.record(pass, block_id, indices, key.parity(indices), g);
        g
    }

    fn ask_batch(&mut self, pass: usize, first_id: usize, sets: &[&[usize]], key: &BitKey) -> Vec<bool> {
        let answers = self.oracle.parities(sets);
        self.leaked += answers.len();
        self.messages += 1;
        for (j, (set, &g)) in sets.iter().zip(&answers).enumerate() {
            self.record(pass, first_id + j, set, key.parity(set), g);
        }
        answers
    }

    fn bisect(&mut self, block: &[usize], key: &BitKey, pass: usize, block_id: usize) -> Result<BisectResult> {
        if block.is_empty() {
            return Err(Error::param("cannot bisect an empty block"));
        }
        let mut current = block;
        let mut queries = 0;
        while current.len() > 1 {
            let (left, right) = current.split_at(current.len() / 2);
            let g = self.ask(pass, block_id, left, key);
            queries += 1;
            current = if key.parity(left) != g { left } else { right };
        }
        Ok(BisectResult {
            position: current[0],
            queries,
        })
    }
}

struct Block {
    positions: Vec<usize>,
    parity_g: bool,
    pass: usize,
}

pub fn cascade<O: ParityOracle + ?Sized>(
    key_a: &BitKey,
    oracle: &mut O,
    config: &CascadeConfig,
) -> Result<ReconciliationOutcome> {
    run_cascade(key_a, oracle, config, None)
}

/// [`cascade`] that also appends every parity question to `log`.
pub fn cascade_with_transcript<O: ParityOracle + ?Sized>(
    key_a: &BitKey,
    oracle: &mut O,
    config: &CascadeConfig,
    log: &mut Vec<ParityQuery>,
) -> Result<ReconciliationOutcome> {
    run_cascade(key_a, oracle, config, Some(log))
}

fn run_cascade<O: ParityOracle + ?Sized>(
    key_a: &BitKey,
    oracle: &mut O,
    config: &CascadeConfig,
    log: Option<&mut Vec<ParityQuery>>,
) -> Result<ReconciliationOutcome> {
    let n = key_a.len();
    if oracle.len() != n {
        return Err(Error::param(format!(
            "key lengths differ ({n} vs {})",
            oracle.len()
        )));
    }
    if n == 0 {
        return Err(Error::param("cannot reconcile an empty key"));
    }
    if config.num_passes < 1 {
        return Err(Error::param("cascade needs at least one pass"));
    }
    let qber = match config.qber {
        QberSetting::Fixed(q) if q > 0.0 && q < 0.5 => q,
        QberSetting::Fixed(q) => return Err(Error::param(format!("QBER {q} outside (0, 0.5)"))),
        QberSetting::Auto { .. } => {
            return Err(Error::param("QBER must be estimated before cascade runs"))
        }
    };
    let k1 = initial_block_size(qber, n);

    let mut key = key_a.clone().with_stage(KeyStage::Reconciled);
    let mut session = Session::new(oracle, log);
    let mut blocks: Vec<Block> = Vec::new();
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut flips = Vec::new();

    for pass in 0..config.num_passes {
        let size = k1.checked_shl(pass as u32).unwrap_or(usize::MAX).min(n);
        let order: Vec<usize> = if pass == 0 {
            (0..n).collect()
        } else {
            permutation(n, seed::derive(config.rng_seed, pass as u64))
        };
        let sets: Vec<&[usize]> = order.chunks(size).collect();
        let first_id = blocks.len();
        let answers = session.ask_batch(pass + 1, first_id, &sets, &key);
        for (set, parity_g) in sets.iter().zip(answers) {
            let id = blocks.len();
            for &p in set.iter() {
                containing[p].push(id);
            }
            blocks.push(Block {
                positions: set.to_vec(),
                parity_g,
                pass: pass + 1,
            });
        }

        for id in first_id..blocks.len() {
            let mut pending = vec![id];
            while let Some(b) = pending.pop() {
                let block = &blocks[b];
                if key.parity(&block.positions) == block.parity_g {
                    continue;
                }
                let found = session.bisect(&block.positions, &key, block.pass, b)?;
                key.flip(found.position);
                flips.push(found.position);
                pending.extend(
                    containing[found.position]
                        .iter()
                        .copied()
                        .filter(|&other| key.parity(&blocks[other].positions) != blocks[other].parity_g),
                );
            }
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let final_g = session.ask(0, blocks.len(), &all, &key);
    let converged = key.parity(&all) == final_g;

    Ok(ReconciliationOutcome {
        corrected_key: key,
        parity_bits_leaked: session.leaked,
        parity_messages: session.messages,
        converged,
        flips,
    })
}

/// Sampled QBER estimate and the positions it disclosed.
#[derive(Debug, Clone, PartialEq)]
pub struct QberSample {
    pub qber: f64,
    /// Disclosed positions, sorted; drop them from both keys before use.
    pub consumed: Vec<usize>,
}

pub fn estimate_qber(key_a: &BitKey, key_g: &BitKey, sample_fraction: f64, seed: u64) -> Result<QberSample> {
    if key_a.len() != key_g.len() {
        return Err(Error::param(format!(
            "key lengths differ ({} vs {})",
            key_a.len(),
            key_g.len()
        )));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 0.5) {
        return Err(Error::param(format!("sample fraction {sample_fraction} outside (0, 0.5]")));
    }
    if key_a.is_empty() {
        return Err(Error::param("cannot estimate QBER of empty keys"));
    }
    let n = key_a.len();
    let count = ((sample_fraction * n as f64).round() as usize).clamp(1, n);
    let mut consumed: Vec<usize> = permutation(n, seed).into_iter().take(count).collect();
    consumed.sort_unstable();
    let mismatches = consumed.iter().filter(|&&i| key_a.get(i) != key_g.get(i)).count();
    let qber = (mismatches as f64 / count as f64).clamp(QBER_CLAMP.0, QBER_CLAMP.1);
    Ok(QberSample { qber, consumed })
}

/// Both keys after reconciliation in one process.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalReconciliation {
    pub outcome: ReconciliationOutcome,
    /// G's key with any QBER-sample positions removed.
    pub key_g: BitKey,
    pub qber_used: f64,
    pub sampled_bits: usize,
}

/// Resolves the QBER setting (sampling and discarding bits when automatic)
/// and runs cascade against an in-process oracle over `key_g`.
pub fn reconcile_local(key_a: &BitKey, key_g: &BitKey, config: &CascadeConfig) -> Result<LocalReconciliation> {
    let (a, g, qber, sampled) = match config.qber {
        QberSetting::Fixed(q) => (key_a.clone(), key_g.clone(), q, 0),
        QberSetting::Auto { sample_fraction } => {
            let sample = estimate_qber(key_a, key_g, sample_fraction, seed::derive(config.rng_seed, u64::MAX))?;
            (
                key_a.without_positions(&sample.consumed),
                key_g.without_positions(&sample.consumed),
                sample.qber,
                sample.consumed.len(),
            )
        }
    };
    let g = g.with_stage(KeyStage::Reconciled);
    let outcome = cascade(&a, &mut KeyOracle::new(&g), &config.with_qber(qber))?;
    Ok(LocalReconciliation {
        outcome,
        key_g: g,
        qber_used: qber,
        sampled_bits: sampled,
    })
}

/// Total parity answers cascade spends on identical keys of length `n`.
pub fn error_free_leak(n: usize, qber: f64, num_passes: usize) -> usize {
    let k1 = initial_block_size(qber, n);
    (0..num_passes)
        .map(|p| n.div_ceil(k1.checked_shl(p as u32).unwrap_or(usize::MAX).min(n)))
        .sum::<usize>()
        + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> BitKey {
        s.parse().unwrap()
    }

    #[test]
    fn block_size_rule() {
        assert_eq!(initial_block_size(0.05, 512), 15);
        assert_eq!(initial_block_size(0.49, 512), 4);
        assert_eq!(initial_block_size(0.001, 512), 512);
        assert_eq!(initial_block_size(0.1, 3), 3);
    }

    #[test]
    fn identical_keys_cost_exactly_the_schedule() {
        let k = key(&"0110100111010010".repeat(32));
        let cfg = CascadeConfig::default().with_qber(0.05);
        let out = cascade(&k, &mut KeyOracle::new(&k), &cfg).unwrap();
        assert_eq!(out.corrected_key.bits(), k.bits());
        assert!(out.flips.is_empty());
        assert!(out.converged);
        assert_eq!(out.parity_bits_leaked, error_free_leak(512, 0.05, 4));
        assert_eq!(out.parity_messages, 5);
        assert_eq!(out.parity_bits_leaked, 35 + 18 + 9 + 5 + 1);
    }

    #[test]
    fn single_error_is_fixed_in_pass_one() {
        let g = key(&"1011001110001011".repeat(8));
        for pos in [0, 17, 64, 127] {
            let mut a = g.clone();
            a.flip(pos);
            let mut log = Vec::new();
            let out = cascade_with_transcript(&a, &mut KeyOracle::new(&g), &CascadeConfig::default().with_qber(0.05), &mut log)
                .unwrap();
            assert_eq!(out.flips, vec![pos]);
            assert_eq!(out.corrected_key.bits(), g.bits());
            assert_eq!(log.len(), out.parity_bits_leaked);
            let bad = log.iter().find(|q| q.parity_a != q.parity_g).unwrap();
            assert_eq!(bad.pass, 1);
        }
    }

    #[test]
    fn bisection_finds_single_errors_quickly() {
        let g = key("10110010");
        let block: Vec<usize> = (0..8).collect();
        for pos in 0..8 {
            let mut a = g.clone();
            a.flip(pos);
            let mut oracle = KeyOracle::new(&g);
            let r = binary_search_error(&block, &a, &mut oracle).unwrap();
            assert_eq!(r.position, pos);
            assert!(r.queries <= 3);
            assert_eq!(oracle.answers(), r.queries);
        }
        let mut a = g.clone();
        a.flip(5);
        let r = binary_search_error(&[5], &a, &mut KeyOracle::new(&g)).unwrap();
        assert_eq!(r, BisectResult { position: 5, queries: 0 });
    }

    #[test]
    fn bisection_with_three_errors_lands_on_one_of_them() {
        let g = key("01101100");
        let block: Vec<usize> = (0..8).collect();
        for i in 0..8 {
            for j in i + 1..8 {
                for k in j + 1..8 {
                    let mut a = g.clone();
                    a.flip(i);
                    a.flip(j);
                    a.flip(k);
                    let r = binary_search_error(&block, &a, &mut KeyOracle::new(&g)).unwrap();
                    assert!([i, j, k].contains(&r.position));
                }
            }
        }
    }

    #[test]
    fn length_mismatch_and_unresolved_qber() {
        let a = key("0101");
        let g = key("01011");
        assert!(cascade(&a, &mut KeyOracle::new(&g), &CascadeConfig::default().with_qber(0.1)).is_err());
        assert!(cascade(&a, &mut KeyOracle::new(&a), &CascadeConfig::default()).is_err());
        assert!(cascade(&a, &mut KeyOracle::new(&a), &CascadeConfig::default().with_qber(0.7)).is_err());
        assert!(estimate_qber(&a, &g, 0.1, 0).is_err());
    }

    #[test]
    fn qber_clamps() {
        let a = key(&"0110".repeat(64));
        assert_eq!(estimate_qber(&a, &a, 0.2, 1).unwrap().qber, 0.01);
        let s = estimate_qber(&a, &a.complement(), 0.25, 1).unwrap();
        assert_eq!(s.qber, 0.49);
        assert_eq!(s.consumed.len(), 64);
        assert!(estimate_qber(&a, &a, 0.0, 1).is_err());
        assert!(estimate_qber(&a, &a, 0.6, 1).is_err());
    }

    #[test]
    fn auto_reconciliation_drops_sampled_bits() {
        let g = key(&"1100101011110000".repeat(16));
        let mut a = g.clone();
        a.flip(3);
        a.flip(200);
        let r = reconcile_local(&a, &g, &CascadeConfig::default()).unwrap();
        assert_eq!(r.sampled_bits, 26);
        assert_eq!(r.key_g.len(), 256 - 26);
        assert_eq!(r.outcome.corrected_key.bits(), r.key_g.bits());
    }

    #[test]
    fn transcript_line_format() {
        let q = ParityQuery {
            pass: 2,
            block_id: 7,
            indices_hash: hash_indices(&[1, 2, 3]),
            parity_a: true,
            parity_g: false,
        };
        let line = q.to_string();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[3..], ["1", "0"]);
        assert_eq!(fields[2].len(), 16);
    }
}
