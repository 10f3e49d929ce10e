//! Second-order generalized derivatives for composite functions
//! `f = φ + g∘F` with polyhedral convex `g`: exact calculus, quadratic growth
//! certificates, and sampling estimators that cross-check every formula.

pub mod calculus;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod expr;
pub mod growth;
pub mod ext;
pub mod linalg;
pub mod lpsolve;
pub mod polyhedral;
pub mod problem;
pub mod smooth;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use problem::{CompositeProblem, Outer};
