//! Decoding-time guardrail for text generation.
//!
//! Partially generated candidates are checked against a store of unsafe
//! demonstration texts while decoding runs. Candidates that come too close
//! to a stored example are rejected and replaced with the next most likely
//! ones; when too many replacements fail the decoder rolls back to the
//! previous validation checkpoint. The step at which the next validation
//! happens is chosen by a [`timing::TimingStrategy`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and wall-clock timing live in the `safedecode` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod decode;
pub mod embed;
mod error;
pub mod harness;
pub mod lm;
pub mod metrics;
pub mod store;
pub mod timing;
pub mod tokenize;
pub mod validate;

pub use decode::{decode, unguarded_decode, DecodeConfig, GenerationOutcome, Sampler, Status};
pub use embed::{cosine, Embedder, EmbeddingVector, HashingEmbedder};
pub use error::{Error, Result};
pub use lm::{train_ngram, CandidateToken, ToyLm};
pub use store::{DemoExample, DemoStore, QueryHit};
pub use timing::TimingStrategy;
pub use tokenize::{TokenId, TokenSeq, Vocabulary};
pub use validate::{validate, SimilarityOracle, ValidationResult};
