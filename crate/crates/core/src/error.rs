use thiserror::Error;

use crate::expr::ExprError;
use crate::lpsolve::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("point is outside the domain: {0}")]
    NotInDomain(String),
    #[error("arithmetic produced -inf: {0}")]
    NegativeInfinity(&'static str),
    #[error("vector is not a subgradient: {0}")]
    NotSubgradient(String),
    #[error("direction is not tangent: {0}")]
    NotTangent(String),
    #[error("multiplier set is empty: {0}")]
    EmptyMultiplierSet(String),
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
    #[error("enumeration overflow: {0}")]
    Overflow(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("projection stalled: {0}")]
    ProjectionStall(String),
    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("x_bar is not stationary: {0}")]
    NonStationary(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("no differentiable probe points found")]
    NoProbePoints,
    #[error("problem file: {0}")]
    Schema(String),
}

pub(crate) fn check_dim(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got,
            context,
        })
    }
}
