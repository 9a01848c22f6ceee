use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("{0} lies on the branch cut of z^alpha (open negative real axis)")]
    BranchCut(Complex64),

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("contour refinement failed: {0}")]
    ContourRefinement(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("newton iteration failed after {iterations} iterations: {reason} (residual history {history:?})")]
    NewtonFailure {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("time stepping failed: {0}")]
    TimeStepping(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
