use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum SvdnetError {
    /// Bad shapes, non-finite inputs, out-of-range labels, invalid configs.
    #[error("validation error: {0}")]
    Validation(String),

    /// Iterative routine failed to converge, or training diverged.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Input is degenerate for the requested operation (rank deficiency, 0/0).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed checkpoint, dataset, or config file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, SvdnetError>;

pub(crate) fn validation(msg: impl Into<String>) -> SvdnetError {
    SvdnetError::Validation(msg.into())
}
