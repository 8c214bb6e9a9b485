//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or dimension mismatch between operands.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A softmax row contained no finite entry.
    #[error("degenerate row {row}: every entry is -inf")]
    DegenerateRow { row: usize },

    /// Scatter index out of range or duplicated within a row.
    #[error("index error: {0}")]
    Index(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid runtime input (crop size, init box, missing suite, ...).
    #[error("input error: {0}")]
    Input(String),

    /// API contract violation (non-scalar loss, double backward, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// A forward operation produced NaN or Inf from finite inputs.
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    /// Scene specification cannot be rendered.
    #[error("scene spec error: {0}")]
    Scene(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
