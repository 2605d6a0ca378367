//! Key confirmation by SHA-256 digest exchange.
//!
//! A key is serialized as a 64-bit big-endian bit count followed by its bits
//! packed MSB first and zero padded. When both parties' digests agree, the
//! digest itself becomes the 256-bit final key.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::bits::{BitKey, KeyStage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyDigest([u8; 32]);

impl KeyDigest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn to_key(&self) -> BitKey {
        BitKey::from_bytes(&self.0, KeyStage::Final)
    }
}

impl fmt::Display for KeyDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Length header plus packed bits.
pub fn canonical_bytes(key: &BitKey) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + key.len().div_ceil(8));
    out.extend_from_slice(&(key.len() as u64).to_be_bytes());
    out.extend(key.to_packed_bytes());
    out
}

pub fn digest(key: &BitKey) -> KeyDigest {
    KeyDigest(Sha256::digest(canonical_bytes(key)).into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Confirmation {
    Matched { final_key: BitKey, digest: KeyDigest },
    Mismatched { digest_a: KeyDigest, digest_g: KeyDigest },
}

impl Confirmation {
    pub fn is_matched(&self) -> bool {
        matches!(self, Confirmation::Matched { .. })
    }

    pub fn final_key(&self) -> Option<&BitKey> {
        match self {
            Confirmation::Matched { final_key, .. } => Some(final_key),
            Confirmation::Mismatched { .. } => None,
        }
    }
}

/// Each side hashes its own key; the digests are compared in the clear.
pub fn confirm(key_a: &BitKey, key_g: &BitKey) -> Confirmation {
    let digest_a = digest(key_a);
    let digest_g = digest(key_g);
    if digest_a == digest_g {
        Confirmation::Matched {
            final_key: digest_a.to_key(),
            digest: digest_a,
        }
    } else {
        Confirmation::Mismatched { digest_a, digest_g }
    }
}
