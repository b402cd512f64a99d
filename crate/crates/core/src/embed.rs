//! Signed feature-hashing text embedder and cosine similarity.
//!
//! Features are the lower-cased word pieces of [`crate::tokenize::split`]
//! and the character 3-grams of those pieces joined by single spaces. Each
//! feature is hashed with [`feature_hash`]: 64-bit FNV-1a over the seed's
//! little-endian bytes, a one-byte feature tag (`w` or `c`) and the UTF-8
//! feature bytes, followed by the SplitMix64 finalizer. The index is the
//! hash modulo the dimensionality and the sign is taken from bit 63 (set
//! means -1). Accumulated counts are L2-normalized.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tokenize::split;
use crate::{Error, Result};

pub const DEFAULT_DIMS: usize = 256;
pub const DEFAULT_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
/// Identifies the feature scheme; persisted embeddings carry it.
pub const EMBEDDER_VERSION: &str = "signed-hash-v1";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dims: usize) -> Self {
        Self(vec![0.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|x| x * x).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|x| x * factor).collect())
    }
}

/// Maps text into a fixed-dimensional vector space.
pub trait Embedder {
    fn dims(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    dims: usize,
    seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dims: DEFAULT_DIMS,
            seed: DEFAULT_SEED,
        }
    }
}

impl HashingEmbedder {
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Config("embedding dimensionality must be positive".into()));
        }
        Ok(Self { dims, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn add_feature(&self, acc: &mut [f64], tag: u8, feature: &[u8]) {
        let h = feature_hash(self.seed, tag, feature);
        let index = (h % self.dims as u64) as usize;
        acc[index] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
}

impl Embedder for HashingEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0.0; self.dims];
        let words = split(text);
        for w in &words {
            self.add_feature(&mut acc, b'w', w.as_bytes());
        }
        let joined: Vec<char> = words.join(" ").chars().collect();
        let mut buf = String::new();
        for gram in joined.windows(3) {
            buf.clear();
            buf.extend(gram.iter());
            self.add_feature(&mut acc, b'c', buf.as_bytes());
        }
        let norm = libm::sqrt(acc.iter().map(|x| x * x).sum());
        if norm > 0.0 {
            for x in &mut acc {
                *x /= norm;
            }
        }
        EmbeddingVector(acc)
    }
}

/// 64-bit FNV-1a over `seed` (LE), `tag` and `bytes`, then SplitMix64 mixing.
pub fn feature_hash(seed: u64, tag: u8, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain([tag].iter()).chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Domain(alloc::format!(
            "dimension mismatch: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
