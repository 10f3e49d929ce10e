//! Small dense linear programming, vertex/ray enumeration, projection onto
//! polyhedra and minimization of quadratic forms over polyhedral cones.

pub mod dd;
mod nnls;
pub mod projection;
pub mod quadcone;
mod simplex;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::dot;

pub use dd::{vertex_enumerate, VRep};
pub use projection::{project_onto_polyhedron, Projection};
pub use quadcone::{min_quadratic_on_cone, min_quadratic_on_cone_face, ConeFace, ConeMin};

pub const MAX_VARS: usize = 64;
pub const MAX_ROWS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("LP too large: {vars} variables, {rows} rows (limits {MAX_VARS}/{MAX_ROWS})")]
    DimensionOverflow { vars: usize, rows: usize },
    #[error("numerical stall: {0}")]
    NumericalStall(String),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("duality gap {primal} vs {dual}")]
    DualityGap { primal: f64, dual: f64 },
    #[error("polyhedron is empty")]
    Empty,
    #[error("enumeration overflow: {0}")]
    Overflow(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Min,
    Max,
}

/// `opt cᵀx  s.t.  A_ub x ≤ b_ub,  A_eq x = b_eq`, with optional sign
/// constraints `x_j ≥ 0`. Variables are free unless flagged.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub nonneg: Vec<bool>,
    pub sense: Sense,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    /// Dual multipliers satisfy `A_ubᵀμ + A_eqᵀν = s·c` on free variables
    /// (`≥` on sign-constrained ones) with `s = +1` for max, `-1` for min,
    /// and `μᵀb_ub + νᵀb_eq = s·value`.
    Optimal {
        x: Vec<f64>,
        value: f64,
        dual_ub: Vec<f64>,
        dual_eq: Vec<f64>,
    },
    /// `λ_ub ≥ 0`, `λᵀA = 0` on free variables (`≥ 0` on sign-constrained
    /// ones) and `λᵀb < 0`.
    Infeasible {
        farkas_ub: Vec<f64>,
        farkas_eq: Vec<f64>,
    },
    /// `x` is feasible and `x + s·ray` stays feasible for all `s ≥ 0` while
    /// the objective improves without bound.
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } | LpOutcome::Unbounded { x, .. } => Some(x),
            LpOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible { .. })
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, LpOutcome::Unbounded { .. })
    }
}

impl LpProblem {
    pub fn new(n: usize, sense: Sense) -> Self {
        LpProblem {
            c: vec![0.0; n],
            a_ub: vec![],
            b_ub: vec![],
            a_eq: vec![],
            b_eq: vec![],
            nonneg: vec![false; n],
            sense,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(mut self, c: &[f64]) -> Self {
        self.c = c.to_vec();
        self
    }

    pub fn le(mut self, row: &[f64], b: f64) -> Self {
        self.a_ub.push(row.to_vec());
        self.b_ub.push(b);
        self
    }

    pub fn ge(self, row: &[f64], b: f64) -> Self {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        self.le(&neg, -b)
    }

    pub fn eq(mut self, row: &[f64], b: f64) -> Self {
        self.a_eq.push(row.to_vec());
        self.b_eq.push(b);
        self
    }

    pub fn nonneg_all(mut self) -> Self {
        self.nonneg = vec![true; self.c.len()];
        self
    }

    pub fn push_le(&mut self, row: Vec<f64>, b: f64) {
        self.a_ub.push(row);
        self.b_ub.push(b);
    }

    pub fn push_eq(&mut self, row: Vec<f64>, b: f64) {
        self.a_eq.push(row);
        self.b_eq.push(b);
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        simplex::solve(self)
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.c.len();
        let bad = |what: &str| Err(LpError::Malformed(what.to_string()));
        if self.nonneg.len() != n {
            return bad("sign flags length");
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return bad("row/rhs count");
        }
        if self.a_ub.iter().chain(&self.a_eq).any(|r| r.len() != n) {
            return bad("row length");
        }
        let finite = |v: &f64| v.is_finite();
        if !(self.c.iter().all(finite)
            && self.b_ub.iter().all(finite)
            && self.b_eq.iter().all(finite)
            && self.a_ub.iter().chain(&self.a_eq).flatten().all(finite))
        {
            return bad("non-finite data");
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        let m = self
            .a_ub
            .iter()
            .chain(&self.a_eq)
            .flatten()
            .chain(&self.b_ub)
            .chain(&self.b_eq)
            .chain(&self.c)
            .fold(0.0f64, |a, v| a.max(v.abs()));
        1.0 + m
    }

    /// Maximum constraint violation of `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for (r, b) in self.a_ub.iter().zip(&self.b_ub) {
            v = v.max(dot(r, x) - b);
        }
        for (r, b) in self.a_eq.iter().zip(&self.b_eq) {
            v = v.max((dot(r, x) - b).abs());
        }
        for (j, &nn) in self.nonneg.iter().enumerate() {
            if nn {
                v = v.max(-x[j]);
            }
        }
        v
    }

    fn combine(&self, ub: &[f64], eq: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.c.len()];
        for (r, l) in self.a_ub.iter().zip(ub).chain(self.a_eq.iter().zip(eq)) {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += l * v;
            }
        }
        acc
    }

    fn check_farkas(&self, out: &LpOutcome) -> Result<(), LpError> {
        let LpOutcome::Infeasible {
            farkas_ub,
            farkas_eq,
        } = out
        else {
            return Ok(());
        };
        let lta = self.combine(farkas_ub, farkas_eq);
        let ltb = dot(farkas_ub, &self.b_ub) + dot(farkas_eq, &self.b_eq);
        let mag = 1.0 + farkas_ub.iter().chain(farkas_eq).fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-7 * mag * self.scale();
        let ok_cols = lta.iter().zip(&self.nonneg).all(|(v, &nn)| {
            if nn {
                *v >= -tol
            } else {
                v.abs() <= tol
            }
        });
        if ok_cols && ltb < 0.0 {
            Ok(())
        } else {
            Err(LpError::NumericalStall("Farkas certificate failed verification".into()))
        }
    }

    fn check_ray(&self, out: &LpOutcome) -> Result<(), LpError> {
        let LpOutcome::Unbounded { x, ray } = out else {
            return Ok(());
        };
        let tol = 1e-7 * self.scale();
        let ok = self.a_ub.iter().all(|r| dot(r, ray) <= tol)
            && self.a_eq.iter().all(|r| dot(r, ray).abs() <= tol)
            && self.nonneg.iter().zip(ray).all(|(&nn, v)| !nn || *v >= -tol)
            && self.violation(x) <= tol * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let slope = dot(&self.c, ray);
        let improving = match self.sense {
            Sense::Max => slope > 0.0,
            Sense::Min => slope < 0.0,
        };
        if ok && improving {
            Ok(())
        } else {
            Err(LpError::NumericalStall("unbounded ray failed verification".into()))
        }
    }

    fn check_duality(&self, out: &LpOutcome) -> Result<(), LpError> {
        let LpOutcome::Optimal {
            value,
            dual_ub,
            dual_eq,
            ..
        } = out
        else {
            return Ok(());
        };
        let s = match self.sense {
            Sense::Max => 1.0,
            Sense::Min => -1.0,
        };
        let dual = s * (dot(dual_ub, &self.b_ub) + dot(dual_eq, &self.b_eq));
        if (dual - value).abs() <= 1e-8 * value.abs().max(1.0) * self.scale() {
            Ok(())
        } else {
            Err(LpError::DualityGap {
                primal: *value,
                dual,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unbounded_with_ray() {
        // max y2 s.t. y1 = 2, y >= 0
        let lp = LpProblem::new(2, Sense::Max)
            .objective(&[0.0, 1.0])
            .eq(&[1.0, 0.0], 2.0)
            .nonneg_all();
        match lp.solve().unwrap() {
            LpOutcome::Unbounded { x, ray } => {
                assert!((x[0] - 2.0).abs() < 1e-12);
                assert!(ray[0].abs() < 1e-12 && (ray[1] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn farkas_certificate() {
        // y <= -1 and y >= 0
        let lp = LpProblem::new(1, Sense::Min).le(&[1.0], -1.0).ge(&[1.0], 0.0);
        let out = lp.solve().unwrap();
        let LpOutcome::Infeasible { farkas_ub, .. } = out else {
            panic!("expected infeasible")
        };
        assert!(farkas_ub.iter().all(|&l| l >= 0.0));
        let combo = farkas_ub[0] - farkas_ub[1];
        assert!(combo.abs() < 1e-12);
        assert!(-farkas_ub[0] < 0.0);
    }

    #[test]
    fn zero_objective_on_multiplier_set() {
        // Λ = {(2, t) : t >= 0}: -y1 = -2, y >= 0
        let lp = LpProblem::new(2, Sense::Max)
            .eq(&[-1.0, 0.0], -2.0)
            .nonneg_all();
        let out = lp.solve().unwrap();
        assert_eq!(out.value(), Some(0.0));
        let x = out.point().unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance; Bland's rule terminates.
        let lp = LpProblem::new(4, Sense::Min)
            .objective(&[-0.75, 150.0, -0.02, 6.0])
            .le(&[0.25, -60.0, -0.04, 9.0], 0.0)
            .le(&[0.5, -90.0, -0.02, 3.0], 0.0)
            .le(&[0.0, 0.0, 1.0, 0.0], 1.0)
            .nonneg_all();
        let v = lp.solve().unwrap().value().unwrap();
        assert!((v + 0.05).abs() < 1e-10);
    }

    #[test]
    fn free_variables_and_redundant_rows() {
        let lp = LpProblem::new(2, Sense::Min)
            .objective(&[1.0, 1.0])
            .eq(&[1.0, -1.0], 0.0)
            .eq(&[2.0, -2.0], 0.0)
            .ge(&[1.0, 0.0], -3.0);
        let out = lp.solve().unwrap();
        assert!((out.value().unwrap() + 6.0).abs() < 1e-10);
    }

    #[test]
    fn overflow_rejected() {
        let lp = LpProblem::new(MAX_VARS + 1, Sense::Min);
        assert!(matches!(lp.solve(), Err(LpError::DimensionOverflow { .. })));
    }

    // brute-force oracle: enumerate all basic solutions of a 2-variable LP
    fn brute_2d(rows: &[(f64, f64, f64)], c: (f64, f64)) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (a1, b1, r1) = rows[i];
                let (a2, b2, r2) = rows[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-9 {
                    continue;
                }
                let x = (r1 * b2 - r2 * b1) / det;
                let y = (a1 * r2 - a2 * r1) / det;
                if rows.iter().all(|&(a, b, r)| a * x + b * y <= r + 1e-7) {
                    let v = c.0 * x + c.1 * y;
                    best = Some(best.map_or(v, |bv: f64| bv.min(v)));
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn bounded_2d_matches_vertex_oracle(
            extra in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -1.0f64..3.0), 0..5),
            c in (-2.0f64..2.0, -2.0f64..2.0),
        ) {
            let mut rows = vec![(1.0, 0.0, 2.0), (-1.0, 0.0, 2.0), (0.0, 1.0, 2.0), (0.0, -1.0, 2.0)];
            rows.extend(extra);
            let mut lp = LpProblem::new(2, Sense::Min).objective(&[c.0, c.1]);
            for &(a, b, r) in &rows {
                lp.push_le(vec![a, b], r);
            }
            let out = lp.solve().unwrap();
            match brute_2d(&rows, c) {
                Some(v) => {
                    let got = out.value().expect("optimal");
                    prop_assert!((got - v).abs() < 1e-7, "{got} vs {v}");
                }
                None => prop_assert!(out.is_infeasible()),
            }
        }
    }
}
