//! Lawson–Hanson non-negative least squares and least-distance programming.

use nalgebra::DMatrix;

use crate::linalg::{self, Mat, Vector};

/// `argmin ‖E z − f‖` subject to `z ≥ 0`.
pub fn nnls(e: &Mat, f: &Vector) -> Vector {
    let k = e.ncols();
    let mut z = Vector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * (1.0 + e.amax()) * (1.0 + f.amax()) * (k.max(1) as f64);
    for _ in 0..(3 * k + 10) {
        let w = e.transpose() * (f - e * &z);
        let cand = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = cand else { break };
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_columns(&idx.iter().map(|&j| e.column(j).into_owned()).collect::<Vec<_>>());
            let zs = linalg::lstsq(&sub, f);
            if zs.iter().all(|&v| v > 0.0) {
                for (p, &j) in idx.iter().enumerate() {
                    z[j] = zs[p];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (p, &j) in idx.iter().enumerate() {
                if zs[p] <= 0.0 {
                    let denom = z[j] - zs[p];
                    if denom > 0.0 {
                        alpha = alpha.min(z[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (p, &j) in idx.iter().enumerate() {
                z[j] += alpha * (zs[p] - z[j]);
                if z[j] <= 1e-15 {
                    z[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    z
}

/// `argmin ‖u‖` subject to `G u ≥ h`; `None` if infeasible.
pub fn ldp(g: &Mat, h: &Vector) -> Option<Vector> {
    let p = g.ncols();
    let k = g.nrows();
    if k == 0 || h.iter().all(|&v| v <= 0.0) {
        return Some(Vector::zeros(p));
    }
    let mut e = DMatrix::zeros(p + 1, k);
    e.view_mut((0, 0), (p, k)).copy_from(&g.transpose());
    for i in 0..k {
        e[(p, i)] = h[i];
    }
    let mut f = Vector::zeros(p + 1);
    f[p] = 1.0;
    let z = nnls(&e, &f);
    let r = &e * z - f;
    if r.norm() < 1e-12 || r[p].abs() < 1e-14 {
        return None;
    }
    Some(-r.rows(0, p) / r[p])
}
