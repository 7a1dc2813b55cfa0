use thiserror::Error;

use crate::system::SpectralSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is numerically singular (reciprocal condition {rcond:e})")]
    Singular { rcond: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("GMRES did not converge: relative residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        /// Best available solution, built from the last GMRES iterate.
        partial: Option<Box<SpectralSolution>>,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
