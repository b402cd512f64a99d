use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// Every token of the vocabulary is excluded by the skip set.
    #[error("no candidate left: the skip set covers the whole vocabulary")]
    Exhausted,
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("example `{id}` violates a store invariant: {reason}")]
    Invariant { id: String, reason: String },
}
