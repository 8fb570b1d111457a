//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("problem is unbounded: {0}")]
    Unbounded(String),

    #[error("solver failed: {message}")]
    Solver {
        message: String,
        diagnostics: Box<crate::kantorovich::Diagnostics>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("schema version {found} is not supported (expected {expected}); re-export the file with this version")]
    Migration { found: u32, expected: u32 },

    #[error("invalid input at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver { .. } | Error::Unbounded(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
