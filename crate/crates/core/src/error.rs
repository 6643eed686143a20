use thiserror::Error;

use crate::capacity::CapacityResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// pmf(y|x) is exactly zero, so its logarithm does not exist.
    #[error("output {y} has zero probability at input {x}")]
    SupportViolation { x: f64, y: u64 },

    #[error("divergence is infinite: {0}")]
    InfiniteDivergence(String),

    /// The solver hit its iteration cap; the best certified iterate is attached.
    #[error("capacity solver did not converge (certificate gap {:.3e} bits)", .0.gap())]
    NotConverged(Box<CapacityResult>),

    #[error("enumeration budget exceeded: {required:.3e} output sequences > budget {budget:.3e}; use Monte Carlo")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("analytic bound unavailable: {0}")]
    UnsupportedBound(String),

    #[error("code construction failed: {0}")]
    Construction(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
