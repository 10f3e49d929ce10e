//! Minimum of a quadratic form over the unit sphere intersected with a
//! polyhedral cone, by face enumeration.
//!
//! At a minimizer `w`, with `S` the set of active inequality rows, `w` lies
//! in the relative interior of the face `{Cw ≤ 0} ∩ null(C_S)`, so it is an
//! eigenvector of the compression `BᵀQB` onto `null(C_S)`. Enumerating `S`
//! and keeping the feasible eigenvectors is therefore exact.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::{LpError, LpOutcome, LpProblem, Sense};
use crate::ext::ExtReal;
use crate::linalg::{self, Mat, Vector};
use crate::polyhedral::PolyCone;

/// Subset budget for certified enumeration.
pub const MAX_SUBSETS: usize = 4096;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeMin {
    /// `+∞` when the cone is `{0}`.
    pub value: ExtReal,
    pub argmin: Option<Vec<f64>>,
    /// `false` when the face budget was exceeded and the value is a sampled
    /// upper bound.
    pub certified: bool,
}

/// A face given as the span of `basis` columns cut by `constraints · w ≤ 0`.
#[derive(Clone, Debug)]
pub struct ConeFace {
    pub basis: Mat,
    pub constraints: Vec<Vec<f64>>,
}

fn feasible(rows: &[Vec<f64>], w: &[f64]) -> bool {
    let nw = linalg::norm(w);
    rows.iter().all(|r| linalg::dot(r, w) <= FEAS_TOL * nw * (1.0 + linalg::norm(r)))
}

/// A nonzero point of `{α : G α ≤ 0}` if one exists.
fn nonzero_in_cone(g: &[Vec<f64>], dim: usize) -> Result<Option<Vec<f64>>, LpError> {
    if g.is_empty() {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        return Ok(Some(e));
    }
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; dim];
            c[i] = s;
            let mut lp = LpProblem::new(dim, Sense::Max).objective(&c);
            for r in g {
                lp.push_le(r.clone(), 0.0);
            }
            for j in 0..dim {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                lp.push_le(e.clone(), 1.0);
                e[j] = -1.0;
                lp.push_le(e, 1.0);
            }
            if let LpOutcome::Optimal { x, value, .. } = lp.solve()? {
                if value > 1e-9 {
                    return Ok(Some(x));
                }
            }
        }
    }
    Ok(None)
}

struct Best {
    value: f64,
    arg: Option<Vec<f64>>,
}

impl Best {
    fn offer(&mut self, value: f64, w: Vec<f64>) {
        if self.arg.is_none() || value < self.value {
            self.value = value;
            self.arg = Some(w);
        }
    }
}

fn face_candidates(q: &Mat, rows: &[Vec<f64>], subset: &[usize], k: usize, best: &mut Best) -> Result<(), LpError> {
    let b = if subset.is_empty() {
        DMatrix::identity(k, k)
    } else {
        let cs: Vec<Vec<f64>> = subset.iter().map(|&i| rows[i].clone()).collect();
        linalg::null_space(&linalg::mat_from_rows(&cs, k), k)
    };
    let d = b.ncols();
    if d == 0 {
        return Ok(());
    }
    let m = b.transpose() * q * &b;
    let (vals, vecs) = linalg::sym_eigen(&m);
    let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut i = 0;
    while i < d {
        let mut j = i + 1;
        while j < d && (vals[j] - vals[i]).abs() <= 1e-9 * scale {
            j += 1;
        }
        if best.arg.is_some() && vals[i] >= best.value {
            i = j;
            continue;
        }
        let eig = &b * vecs.columns(i, j - i);
        if j - i == 1 {
            let w: Vec<f64> = eig.column(0).iter().copied().collect();
            for s in [1.0, -1.0] {
                let ws: Vec<f64> = w.iter().map(|v| s * v).collect();
                if feasible(rows, &ws) {
                    best.offer(vals[i], ws);
                    break;
                }
            }
        } else {
            let g: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| (linalg::vec_from(r).transpose() * &eig).iter().copied().collect())
                .collect();
            if let Some(alpha) = nonzero_in_cone(&g, j - i)? {
                let w = &eig * linalg::vec_from(&alpha);
                let w = &w / w.norm();
                best.offer(vals[i], w.iter().copied().collect());
            }
        }
        i = j;
    }
    Ok(())
}

pub(crate) fn binom_prefix(r: usize, k: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for s in 0..=k.min(r) {
        total = total.saturating_add(c);
        c = c.saturating_mul(r - s) / (s + 1);
    }
    total
}

fn subsets_upto(r: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> Result<(), LpError>) -> Result<(), LpError> {
    fn rec(start: usize, r: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<(), LpError>) -> Result<(), LpError> {
        f(cur)?;
        if left == 0 {
            return Ok(());
        }
        for i in start..r {
            cur.push(i);
            rec(i + 1, r, left - 1, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(0, r, k, &mut vec![], f)
}

/// `min { wᵀQw : w ∈ K, ‖w‖ = 1 }`.
pub fn min_quadratic_on_cone(q: &Mat, cone: &PolyCone) -> Result<ConeMin, LpError> {
    let n = cone.dim();
    let qs = linalg::symmetrize(q);
    let (ia, _) = cone.poly.inequalities();
    let (ea, _) = cone.poly.equalities();
    let nb = if ea.is_empty() {
        DMatrix::identity(n, n)
    } else {
        linalg::null_space(&linalg::mat_from_rows(&ea, n), n)
    };
    let k = nb.ncols();
    if k == 0 {
        return Ok(ConeMin {
            value: ExtReal::PosInf,
            argmin: None,
            certified: true,
        });
    }
    let qk = nb.transpose() * &qs * &nb;
    let rows: Vec<Vec<f64>> = ia
        .iter()
        .map(|r| (linalg::vec_from(r).transpose() * &nb).iter().copied().collect::<Vec<f64>>())
        .filter(|r: &Vec<f64>| linalg::norm(r) > 1e-12)
        .map(|r| {
            let nr = linalg::norm(&r);
            r.iter().map(|v| v / nr).collect()
        })
        .collect();

    let mut best = Best {
        value: f64::INFINITY,
        arg: None,
    };
    let certified = binom_prefix(rows.len(), k) <= MAX_SUBSETS;
    if certified {
        subsets_upto(rows.len(), k, &mut |s| face_candidates(&qk, &rows, s, k, &mut best))?;
    } else {
        subsets_upto(rows.len(), 1, &mut |s| face_candidates(&qk, &rows, s, k, &mut best))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nw = linalg::norm(&w);
            if nw < 1e-6 || !feasible(&rows, &w) {
                continue;
            }
            let wv = linalg::vec_from(&w) / nw;
            let val = (wv.transpose() * &qk * &wv)[0];
            best.offer(val, wv.iter().copied().collect());
        }
    }
    Ok(match best.arg {
        None => ConeMin {
            value: ExtReal::PosInf,
            argmin: None,
            certified,
        },
        Some(s) => {
            let w: Vector = &nb * linalg::vec_from(&s);
            ConeMin {
                value: ExtReal::Finite(best.value),
                argmin: Some(w.iter().copied().collect()),
                certified,
            }
        }
    })
}

/// Face-restricted variant: the basis must have full column rank.
pub fn min_quadratic_on_cone_face(q: &Mat, face: &ConeFace) -> Result<ConeMin, LpError> {
    let n = face.basis.nrows();
    let d = face.basis.ncols();
    if linalg::rank(&face.basis) < d {
        return Err(LpError::Malformed("rank-deficient face basis".into()));
    }
    let ortho = linalg::column_basis(&face.basis);
    if face.constraints.is_empty() {
        let m = ortho.transpose() * linalg::symmetrize(q) * &ortho;
        let (vals, vecs) = linalg::sym_eigen(&m);
        let w = &ortho * vecs.column(0);
        return Ok(ConeMin {
            value: ExtReal::Finite(vals[0]),
            argmin: Some(w.iter().copied().collect()),
            certified: true,
        });
    }
    let comp = linalg::null_space(&ortho.transpose(), n);
    let mut cone = PolyCone::from_rows(n, face.constraints.clone());
    for j in 0..comp.ncols() {
        cone.push_eq(comp.column(j).iter().copied().collect());
    }
    min_quadratic_on_cone(q, &cone)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&linalg::vec_from(v))
    }

    #[test]
    fn identity_any_face() {
        let face = ConeFace {
            basis: linalg::mat_from_rows(&[vec![1.0], vec![1.0]], 1),
            constraints: vec![],
        };
        let r = min_quadratic_on_cone_face(&Mat::identity(2, 2), &face).unwrap();
        assert!(r.value.approx_eq(ExtReal::Finite(1.0), 1e-12));
    }

    #[test]
    fn indefinite_on_subspace() {
        let face = ConeFace {
            basis: linalg::mat_from_rows(&[vec![0.0], vec![1.0]], 1),
            constraints: vec![],
        };
        let r = min_quadratic_on_cone_face(&diag(&[1.0, -1.0]), &face).unwrap();
        assert!(r.value.approx_eq(ExtReal::Finite(-1.0), 1e-12));
    }

    #[test]
    fn indefinite_on_diagonal_ray() {
        let face = ConeFace {
            basis: linalg::mat_from_rows(&[vec![1.0], vec![1.0]], 1),
            constraints: vec![vec![-1.0, -1.0]],
        };
        let r = min_quadratic_on_cone_face(&diag(&[1.0, -1.0]), &face).unwrap();
        assert!(r.value.approx_eq(ExtReal::Finite(0.0), 1e-12));
    }

    #[test]
    fn rank_deficient_rejected() {
        let face = ConeFace {
            basis: linalg::mat_from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], 2),
            constraints: vec![],
        };
        assert!(min_quadratic_on_cone_face(&Mat::identity(2, 2), &face).is_err());
    }

    #[test]
    fn trivial_cone_is_infinite() {
        let cone = PolyCone::from_rows(1, vec![vec![1.0], vec![-1.0]]);
        let r = min_quadratic_on_cone(&diag(&[-5.0]), &cone).unwrap();
        assert_eq!(r.value, ExtReal::PosInf);
    }

    #[test]
    fn orthant_with_saddle() {
        // w in R^2_+, Q = [[1, -2], [-2, 1]] -> min at (1,1)/√2 with value -1
        let cone = PolyCone::from_rows(2, vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
        let q = linalg::mat_from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]], 2);
        let r = min_quadratic_on_cone(&q, &cone).unwrap();
        assert!(r.value.approx_eq(ExtReal::Finite(-1.0), 1e-12));
        // brute-force oracle over the quarter circle
        let mut m = f64::INFINITY;
        for i in 0..=10_000 {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / 10_000.0;
            let (c, s) = (th.cos(), th.sin());
            m = m.min(c * c + s * s - 4.0 * c * s);
        }
        assert!((m + 1.0).abs() < 1e-6);
    }

    #[test]
    fn repeated_eigenvalue_needs_lp() {
        // Q = -I on the orthant: every feasible unit vector attains -1
        let cone = PolyCone::from_rows(3, vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]]);
        let r = min_quadratic_on_cone(&(-Mat::identity(3, 3)), &cone).unwrap();
        assert!(r.value.approx_eq(ExtReal::Finite(-1.0), 1e-12));
        let w = r.argmin.unwrap();
        assert!(w.iter().all(|&v| v >= -1e-9));
    }
}
