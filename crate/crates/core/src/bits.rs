use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Pipeline stage a key belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyStage {
    Initial,
    Reconciled,
    Final,
}

/// Ordered bit sequence at some stage of the key pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitKey {
    bits: Vec<bool>,
    stage: KeyStage,
}

impl BitKey {
    pub fn new(bits: Vec<bool>, stage: KeyStage) -> Self {
        BitKey { bits, stage }
    }

    pub fn initial(bits: Vec<bool>) -> Self {
        Self::new(bits, KeyStage::Initial)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn stage(&self) -> KeyStage {
        self.stage
    }

    pub fn with_stage(mut self, stage: KeyStage) -> Self {
        self.stage = stage;
        self
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    /// XOR parity of the bits at `indices`.
    pub fn parity(&self, indices: &[usize]) -> bool {
        indices.iter().fold(false, |acc, &i| acc ^ self.bits[i])
    }

    pub fn complement(&self) -> BitKey {
        BitKey::new(self.bits.iter().map(|b| !b).collect(), self.stage)
    }

    /// Number of positions where the keys differ.
    pub fn hamming(&self, other: &BitKey) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::param(format!(
                "key lengths differ ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }

    /// Copy of the key with the listed positions removed.
    pub fn without_positions(&self, positions: &[usize]) -> BitKey {
        let mut drop = vec![false; self.len()];
        for &p in positions {
            drop[p] = true;
        }
        let bits = self
            .bits
            .iter()
            .zip(drop)
            .filter_map(|(&b, d)| (!d).then_some(b))
            .collect();
        BitKey::new(bits, self.stage)
    }

    /// Appends `other`'s bits.
    pub fn extend(&mut self, other: &BitKey) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// Bits packed most-significant-bit first, zero padded to whole octets.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], stage: KeyStage) -> BitKey {
        let bits = bytes
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1 == 1))
            .collect();
        BitKey::new(bits, stage)
    }
}

impl fmt::Display for BitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses ASCII '0'/'1' characters; whitespace is ignored.
impl FromStr for BitKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                c => return Err(Error::param(format!("invalid bit character {c:?} at {i}"))),
            }
        }
        Ok(BitKey::initial(bits))
    }
}
