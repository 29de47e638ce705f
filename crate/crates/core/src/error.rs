use alloc::string::String;

/// Errors raised by the alignment core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("empty name")]
    EmptyName,
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("key `{0}` not found")]
    MissingKey(String),
    #[error("token `{0}` not in vocabulary")]
    UnknownToken(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid entity span: {0}")]
    InvalidSpan(String),
    #[error("normal equations are rank deficient; retry with ridge > 0")]
    RankDeficient,
    #[error("zero vector `{key}` at iteration {iteration}")]
    ZeroVector { key: String, iteration: usize },
    #[error("zero vector `{0}`")]
    ZeroNorm(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("sequence needs {required} units but max_len is {max_len}")]
    SequenceTooLong { required: usize, max_len: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
