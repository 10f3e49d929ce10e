//! Sampling estimators for first- and second-order generalized derivatives,
//! and falsifiers for prox-regularity, quadratic growth and strong metric
//! subregularity. Finite estimates are upper bounds on a liminf; divergence is
//! evidence for `+∞`, never proof.

mod falsify;
mod liminf;
pub(crate) mod sampling;
mod schedule;

pub use falsify::{
    prox_regularity_falsify, prox_regularity_sweep, Counterexample, FalsifyOutcome, FalsifyStrategy, DEFAULT_EPS_SWEEP,
};
pub use liminf::{est_parabolic_subderivative, est_second_subderivative, est_subderivative, LiminfEstimate, Witness};
pub use sampling::{qgc_sample_check, sms_sample_check, SampleCheck};
pub use schedule::{GridSchedule, Halton};

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Finite};
use crate::linalg::Vector;
use crate::polyhedral::{BlackBoxFn, PolyhedralFn};
use crate::problem::CompositeProblem;
use crate::smooth::SmoothOracle;

/// Anything that can be evaluated pointwise as an extended real.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<ExtReal>;
}

/// Gradients at points of differentiability; an error elsewhere.
pub trait GradientSource: Sync {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &[f64]) -> Result<Vector>;
}

/// Adapter for closures.
pub struct FnEval<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> ExtReal + Sync> Evaluable for FnEval<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Result<ExtReal> {
        Ok((self.f)(x))
    }
}

impl Evaluable for CompositeProblem {
    fn dim(&self) -> usize {
        self.n()
    }
    fn value(&self, x: &[f64]) -> Result<ExtReal> {
        self.eval_f(x)
    }
}

impl Evaluable for SmoothOracle {
    fn dim(&self) -> usize {
        self.dim_in
    }
    fn value(&self, x: &[f64]) -> Result<ExtReal> {
        Ok(Finite(self.eval(x)?))
    }
}

impl Evaluable for PolyhedralFn {
    fn dim(&self) -> usize {
        PolyhedralFn::dim(self)
    }
    fn value(&self, x: &[f64]) -> Result<ExtReal> {
        crate::error::check_dim(PolyhedralFn::dim(self), x.len(), "point")?;
        Ok(self.eval(x))
    }
}

impl Evaluable for BlackBoxFn {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Result<ExtReal> {
        crate::error::check_dim(self.dim, x.len(), "point")?;
        Ok(self.eval(x))
    }
}

impl GradientSource for SmoothOracle {
    fn dim(&self) -> usize {
        self.dim_in
    }
    fn gradient(&self, x: &[f64]) -> Result<Vector> {
        self.grad(x)
    }
}

impl GradientSource for CompositeProblem {
    fn dim(&self) -> usize {
        self.n()
    }
    fn gradient(&self, x: &[f64]) -> Result<Vector> {
        self.gradient_if_smooth(x)?
            .ok_or_else(|| Error::GradientUnavailable(format!("f is not differentiable at {x:?}")))
    }
}

/// Adapter for gradient closures.
pub struct FnGrad<G> {
    pub dim: usize,
    pub g: G,
}

impl<G: Fn(&[f64]) -> Result<Vector> + Sync> GradientSource for FnGrad<G> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn gradient(&self, x: &[f64]) -> Result<Vector> {
        (self.g)(x)
    }
}

pub(crate) fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}
