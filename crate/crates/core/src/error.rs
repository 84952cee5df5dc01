use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite: most negative eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("optimum refinement stalled after {iterations} iterations with gradient norm {grad_norm:e} > {tol:e}")]
    RefineFailed {
        iterations: usize,
        grad_norm: f64,
        tol: f64,
    },

    #[error("non-finite state at {at}")]
    NonFinite { at: String },

    #[error("f(x) - f* = {gap:e} is below the numerical floor; the reference optimum is wrong")]
    OptimumReference { gap: f64 },

    #[error("schedule is not monotone non-increasing; the descent inequality does not apply")]
    NonMonotoneSchedule,

    #[error("schedule `{0}` has a non-summable a_k series")]
    NonSummableSchedule(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
