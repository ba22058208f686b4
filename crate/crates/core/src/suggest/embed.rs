//! Deterministic sentence embeddings.
//!
//! The default provider is a signed feature-hashing bag of words: tokens are
//! lowercased alphanumeric runs, each token is hashed with 64-bit FNV-1a, the
//! hash modulo the dimension picks a bucket, and bit 63 of the hash picks the
//! sign. The summed vector is L2-normalized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: {0} vs {1}")]
pub struct DimensionMismatch(pub usize, pub usize);

/// Unit-norm (or zero) vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    /// Normalizes `values` to unit length; an all-zero input stays zero.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Embedding(values)
    }

    /// Wraps raw values without normalizing them.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Embedding {
        Embedding(self.0.iter().map(|v| v * factor).collect())
    }
}

/// Cosine similarity, clamped to [-1, 1]. A zero vector scores 0 against
/// anything.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, DimensionMismatch> {
    if a.dim() != b.dim() {
        return Err(DimensionMismatch(a.dim(), b.dim()));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Source of sentence vectors. Implementations must be deterministic.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Embedding;

    fn embed_batch(&self, texts: &[String], exec: Execution) -> Vec<Embedding> {
        exec.map(texts, |t| self.embed(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder { dimension }
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Embedding {
        let mut values = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        Embedding::normalized(values)
    }
}

pub fn embed(text: &str) -> Embedding {
    HashingEmbedder::default().embed(text)
}
