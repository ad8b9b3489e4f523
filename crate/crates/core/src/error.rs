use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the simulation kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("overlap matrix of dimension {dim} lost precision at entry ({row}, {col})")]
    PrecisionLoss { dim: usize, row: usize, col: usize },

    #[error("time grid must be non-empty and strictly ascending")]
    InvalidTimeGrid,

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepSizeUnderflow { t: f64, step: f64, state: Vec<Complex64> },

    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64, state: Vec<Complex64> },

    #[error("trajectory {index} failed: {source}")]
    TrajectoryFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} of the ensemble trajectories failed (indices {failed:?}); first failure: {first}", failed.len())]
    EnsembleFailed { failed: Vec<usize>, first: Box<Error> },

    #[error("time grids differ ({left} vs {right} points or mismatched values)")]
    GridMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
