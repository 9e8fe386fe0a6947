//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes:
/// invalid input and I/O problems exit 2, numerical failures exit 3 and
/// internal-consistency violations (dual-route mismatches) exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed files, invalid parameters, broken invariants.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Numerical failure: non-finite evaluation, blow-up, non-convergence.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two internal computation routes that must agree did not.
    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Io(_) | Error::Parse(_) => 2,
            Error::Numerical(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}
