use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation (e.g. a non-positive kernel length scale).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Geometric input was degenerate (collinear or coincident points).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// An input value violated a precondition (wrong range, non-finite, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Vector or array dimensions did not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A file did not conform to the expected binary format.
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
