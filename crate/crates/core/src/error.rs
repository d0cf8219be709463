//! Error type shared across the pipeline modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input row; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input violated a domain invariant (e.g. non-positive price).
    #[error("validation error: {0}")]
    Validation(String),

    /// Not enough rows/history to perform the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Structurally invalid file (vector store, lexicon, cache).
    #[error("format error: {0}")]
    Format(String),

    /// Caller broke an API contract (mismatched lengths, date sets, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training data cannot produce a usable model (single class, k > rows).
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    /// Feature and label date sets cannot be joined.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Remote embedding provider unreachable with a cold cache.
    #[error("provider error: {message} (retry after {retry_after_secs}s)")]
    Provider {
        message: String,
        retry_after_secs: u64,
    },

    /// Provider responded but violated the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
