use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
///
/// `InvalidInput` covers caller mistakes (bad parameters, malformed files);
/// the remaining variants are failures discovered while computing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("particle degeneracy at step {step}: all particle likelihoods vanished")]
    Degeneracy { step: usize },

    #[error("non-finite objective value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("invalid bracket: need a < b < c and f(b) >= max(f(a), f(c)), got ({a}, {b}, {c})")]
    InvalidBracket { a: f64, b: f64, c: f64 },

    #[error("kernel matrix factorization failed after jitter escalation (t = {size})")]
    Factorization { size: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from invalid caller input rather than a
    /// runtime failure. Looks through context wrappers.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::Parse { .. } | Error::InvalidBracket { .. } => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
