//! Error type shared by all modules.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("singular {what} (condition number {cond:.3e})")]
    Singular { what: String, cond: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Divergence { what: String, iterations: usize, residual: f64 },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. } => 3,
            Error::Divergence { .. } => 4,
            _ => 2,
        }
    }

    pub fn singular(what: impl Into<String>, cond: f64) -> Self {
        Error::Singular { what: what.into(), cond }
    }

    /// Adds context (for example the sample time) to the description.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
            Error::Topology(m) => Error::Topology(format!("{ctx}: {m}")),
            Error::Singular { what, cond } => Error::Singular { what: format!("{what} ({ctx})"), cond },
            Error::Divergence { what, iterations, residual } => {
                Error::Divergence { what: format!("{what} ({ctx})"), iterations, residual }
            }
            other => other,
        }
    }
}
