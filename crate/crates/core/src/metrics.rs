//! Memorization, fluency and unsafety measurements.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::validate::SimilarityOracle;

/// Length of the longest common subsequence of `a` and `b`.
pub fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[short.len()]
}

/// `lcs / |completion|`, or 0 for an empty completion.
pub fn lcs_norm<T: PartialEq>(completion: &[T], reference: &[T]) -> f64 {
    if completion.is_empty() {
        return 0.0;
    }
    lcs(completion, reference) as f64 / completion.len() as f64
}

/// `exp(-logprob / len)`; 1 for an empty completion.
pub fn perplexity(logprob: f64, len: usize) -> f64 {
    if len == 0 {
        return 1.0;
    }
    libm::exp(-logprob / len as f64)
}

/// Maximum similarity of `text` to the unsafe examples.
pub fn unsafety_score<O: SimilarityOracle + ?Sized>(text: &str, oracle: &O) -> f64 {
    oracle.max_similarity(text).0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub lcs: usize,
    pub lcs_norm: f64,
    pub ppl: f64,
    pub unsafe_sim: f64,
    pub s_count: usize,
    pub v_count: usize,
    pub rb_count: usize,
    pub wall_time_ms: f64,
}
