//! Deterministic hashed-trigram text embedder.
//!
//! Text is lowercased, split into overlapping character trigrams, and each
//! trigram's UTF-8 bytes are hashed with 64-bit FNV-1a into one of
//! [`DIMENSION`] buckets. The bucket counts are L2-normalized. Texts shorter
//! than three characters embed to the zero vector.

use serde::{Deserialize, Serialize};

/// Number of buckets in every embedding.
pub const DIMENSION: usize = 64;

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// A unit-length (or all-zero) vector of [`DIMENSION`] components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn zero() -> Self {
        Self(vec![0.0; DIMENSION])
    }

    /// Normalizes raw bucket weights. An all-zero input stays all-zero.
    pub fn from_weights(mut values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), DIMENSION);
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity. Zero vectors score 0 against everything.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let na = self.norm();
        let nb = other.norm();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn embed(text: &str) -> Embedding {
    let lowered: Vec<char> = text.to_lowercase().chars().collect();
    if lowered.len() < 3 {
        return Embedding::zero();
    }
    let mut buckets = vec![0.0f64; DIMENSION];
    let mut buf = [0u8; 12];
    for window in lowered.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let bucket = (fnv1a64(&buf[..len]) % DIMENSION as u64) as usize;
        buckets[bucket] += 1.0;
    }
    Embedding::from_weights(buckets)
}
