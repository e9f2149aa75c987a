use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error(
        "degree {degree} is too large for a grid of {grid_size} nodes (need 2*degree < grid size)"
    )]
    Aliasing { degree: usize, grid_size: usize },

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    #[error("covariance is not positive semidefinite: Cholesky failed with jitter up to {jitter:e} (min diagonal {min_diagonal:e})")]
    NotPositiveSemidefinite { jitter: f64, min_diagonal: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("level {epsilon} is below the curve resolution: {observed} exceedances observed, at least {required} required; increase replicas")]
    Resolution {
        epsilon: f64,
        observed: usize,
        required: usize,
    },

    #[error(
        "metric violates the triangle inequality in {violations} triples (worst excess {worst:e})"
    )]
    TriangleInequality { violations: usize, worst: f64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (PSD, resolution, overflow) as opposed
    /// to rejected input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. } | Error::Resolution { .. }
        )
    }
}
