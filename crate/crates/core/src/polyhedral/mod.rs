//! Exact calculus for polyhedral sets and polyhedral convex functions.

mod func;
mod set;

pub use func::{BlackBoxFn, ConjugateCheck, LocalModel, PolyhedralFn, MAX_SUBDIFF_VERTICES};
pub use set::{PolyCone, Polyhedron};
