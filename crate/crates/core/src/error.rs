use thiserror::Error;

/// Errors raised by the discretization, noise, and study routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index must be at least 1 (got {0})")]
    ModeIndex(usize),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
