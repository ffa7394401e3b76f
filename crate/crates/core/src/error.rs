use thiserror::Error;

use crate::model::AlphaViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid interval ({start}, {end}] for n = {n}")]
    InvalidInterval { start: usize, end: usize, n: usize },

    #[error("invalid change-point vector: {0}")]
    InvalidAlpha(#[from] AlphaViolation),

    #[error("infeasible segmentation: {0}")]
    Infeasible(String),

    #[error("lasso did not converge on rows ({start}, {end}] after {sweeps} sweeps (stationarity {stationarity:e})")]
    NotConverged {
        start: usize,
        end: usize,
        sweeps: usize,
        stationarity: f64,
    },

    #[error("matrix is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },

    #[error("fit cache was created for different solver settings")]
    CacheMismatch,
}

impl Error {
    /// True for failures of the numerical solver rather than of the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}
