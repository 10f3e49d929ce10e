//! Euclidean projection onto an H-polyhedron.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{nnls, LpError};
use crate::linalg::{self, Vector};
use crate::polyhedral::Polyhedron;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
}

/// Nearest point of `P` to `x`, via a least-distance program on the
/// inequality rows after eliminating equalities.
pub fn project_onto_polyhedron(p: &Polyhedron, x: &[f64]) -> Result<Projection, LpError> {
    let m = p.dim;
    if x.len() != m {
        return Err(LpError::Malformed("projection point dimension".into()));
    }
    let xv = linalg::vec_from(x);
    let (ia, ib) = p.inequalities();
    let (ea, eb) = p.equalities();

    let (y0, nb) = if ea.is_empty() {
        (Vector::zeros(m), DMatrix::identity(m, m))
    } else {
        let e = linalg::mat_from_rows(&ea, m);
        let d = linalg::vec_from(&eb);
        let y0 = linalg::lstsq(&e, &d);
        if (&e * &y0 - &d).amax() > 1e-9 * (1.0 + d.amax()) {
            return Err(LpError::Empty);
        }
        (y0, linalg::null_space(&e, m))
    };
    // y = y0 + N (s* + u) with s* the unconstrained optimum
    let s_star = nb.transpose() * (&xv - &y0);
    let base = &y0 + &nb * &s_star;
    let k = nb.ncols();
    let a = linalg::mat_from_rows(&ia, m);
    let g = if ia.is_empty() { DMatrix::zeros(0, k) } else { -(&a * &nb) };
    let h: Vector = if ia.is_empty() {
        Vector::zeros(0)
    } else {
        -(linalg::vec_from(&ib) - &a * &base)
    };
    let u = nnls::ldp(&g, &h).ok_or(LpError::Empty)?;
    let mut u = u;

    // polish on the detected active set
    if g.nrows() > 0 {
        let scale = 1.0 + u.amax();
        let act: Vec<usize> = (0..g.nrows())
            .filter(|&i| (g.row(i) * &u)[0] - h[i] <= 1e-8 * scale)
            .collect();
        if !act.is_empty() {
            let ga = DMatrix::from_rows(&act.iter().map(|&i| g.row(i).into_owned()).collect::<Vec<_>>());
            let ha = Vector::from_iterator(act.len(), act.iter().map(|&i| h[i]));
            let pinv = linalg::lstsq(&ga, &ha);
            let feasible = (0..g.nrows()).all(|i| (g.row(i) * &pinv)[0] >= h[i] - 1e-12 * (1.0 + h[i].abs()));
            if feasible && pinv.norm() <= u.norm() + 1e-9 * scale {
                u = pinv;
            }
        }
    }
    let y = base + &nb * u;
    if p.violation(y.as_slice()) > 1e-7 * (1.0 + y.amax()) {
        return Err(LpError::NumericalStall("projection infeasible after solve".into()));
    }
    let distance = (&y - &xv).norm();
    Ok(Projection {
        point: y.iter().copied().collect(),
        distance,
    })
}
