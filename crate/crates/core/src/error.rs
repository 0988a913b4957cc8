//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller violated a precondition (bad dimensions, invalid
    /// configuration, zero vector where a nonzero one is required, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numerical procedure failed (factorization breakdown, NaN in an
    /// inner iteration, indefinite matrix where a definite one is required).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
