//! Built-in instances: the three worked examples and seeded random families.

pub mod examples;
pub mod quadrature;
pub mod random;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;

pub use random::{random_nlp, random_qp, OuterKind, RandomInstance};

/// Where an expected fact comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Stated in the source example.
    Published,
    /// Recomputed by an independent brute-force check.
    Derived,
    /// Immediate from the definitions.
    Elementary,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fact {
    pub name: &'static str,
    pub statement: String,
    pub basis: Basis,
}

/// Which probe sequences expose the failure of prox-regularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFamily {
    /// `u_k = 1/(2kπ)`, `x_k = 1/(π/2 + 2kπ)`.
    Reciprocal,
    /// `u_k = 1/√(2kπ)`, `x_k = 1/√(π/2 + 2kπ)`.
    ReciprocalSqrt,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub summary: &'static str,
    pub problem: CompositeProblem,
    pub sequences: Option<SequenceFamily>,
    pub facts: Vec<Fact>,
}

fn fact(name: &'static str, statement: &str, basis: Basis) -> Fact {
    Fact {
        name,
        statement: statement.to_string(),
        basis,
    }
}

pub fn example_3_2() -> CatalogEntry {
    CatalogEntry {
        id: "example_3_2",
        summary: "piecewise x^{10/3}cos(1/x) with secant corrections: extended Hessian 0 at 0, not prox-regular",
        problem: examples::smooth_only(examples::g32_oracle()),
        sequences: Some(SequenceFamily::Reciprocal),
        facts: vec![
            fact("value_at_0", "g(0) = 0", Basis::Published),
            fact("gradient_at_0", "grad g(0) = 0 and the extended Hessian at 0 is A = 0", Basis::Published),
            fact("not_prox_regular", "falsify-prox finds a violating pair for r_max = 1e3", Basis::Published),
            fact("even", "g(x) = g(-x)", Basis::Published),
        ],
    }
}

pub fn example_3_3() -> CatalogEntry {
    CatalogEntry {
        id: "example_3_3",
        summary: "f(x) = integral of t^2 sin(1/t^2) from 0 to x: twice differentiable, not prox-regular",
        problem: examples::smooth_only(examples::f33_oracle()),
        sequences: Some(SequenceFamily::ReciprocalSqrt),
        facts: vec![
            fact("derivatives_at_0", "grad f(0) = 0 and hess f(0) = 0", Basis::Published),
            fact("not_prox_regular", "falsify-prox finds a violating pair for r_max = 1e3", Basis::Published),
            fact("cubic_bound", "|f(x)| <= |x|^3/3 for |x| <= 1", Basis::Derived),
        ],
    }
}

pub fn example_4_6() -> CatalogEntry {
    CatalogEntry {
        id: "example_4_6",
        summary: "min 2x + g(x) s.t. -x <= 0, -x^3 <= 0 at x = 0: strong local minimizer",
        problem: examples::problem_4_6(),
        sequences: None,
        facts: vec![
            fact("msqc", "d(x, dom psi) <= d(F(x), R^2_-) on [-1, 1], kappa = 1", Basis::Published),
            fact("growth", "f(x) - f(0) >= x^2 on the feasible part of [-1, 1]", Basis::Published),
            fact("multipliers", "Lambda(0, -2) = {(2, t) : t >= 0}", Basis::Derived),
            fact("tau", "tau = 2 and (2, 0) lies in Lambda within radius tau", Basis::Derived),
            fact("battery", "every determined growth condition holds", Basis::Published),
        ],
    }
}

pub const IDS: [&str; 3] = ["example_3_2", "example_3_3", "example_4_6"];

pub fn by_id(id: &str) -> Result<CatalogEntry> {
    match id {
        "example_3_2" => Ok(example_3_2()),
        "example_3_3" => Ok(example_3_3()),
        "example_4_6" => Ok(example_4_6()),
        _ => Err(Error::InvalidArgument(format!("unknown catalog id {id:?}; known: {}", IDS.join(", ")))),
    }
}

pub fn all() -> Vec<CatalogEntry> {
    vec![example_3_2(), example_3_3(), example_4_6()]
}
