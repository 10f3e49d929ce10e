//! Double-description (Motzkin) vertex and ray enumeration.

use nalgebra::DMatrix;
use serde::Serialize;

use super::LpError;
use crate::linalg::{self, Mat, Vector};
use crate::polyhedral::Polyhedron;

const ZERO_TOL: f64 = 1e-9;
const MAX_GENERATORS: usize = 50_000;
pub const MAX_DIM: usize = 12;

/// V-representation: `conv(vertices) + cone(rays) + span(lines)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VRep {
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
    pub lines: Vec<Vec<f64>>,
}

impl VRep {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty() && self.lines.is_empty()
    }
}

#[derive(Clone)]
struct Ray {
    v: Vec<f64>,
    zero: Vec<u64>,
}

fn bit_set(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn bits_and(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn popcount(a: &[u64]) -> u32 {
    a.iter().map(|x| x.count_ones()).sum()
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m > 0.0 {
        for x in v.iter_mut() {
            *x /= m;
        }
    }
}

/// Extreme rays of the pointed cone `{x : M x ≤ 0}` where `M` has full column rank.
fn cone_extreme_rays(m: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>, LpError> {
    let words = m.len() / 64 + 1;
    let rows: Vec<Vec<f64>> = m
        .iter()
        .map(|r| {
            let n = linalg::norm(r);
            r.iter().map(|v| v / n).collect()
        })
        .collect();

    // greedy choice of `dim` independent rows
    let mut chosen: Vec<usize> = vec![];
    for (i, _) in rows.iter().enumerate() {
        let mut cand: Vec<Vec<f64>> = chosen.iter().map(|&k| rows[k].clone()).collect();
        cand.push(rows[i].clone());
        if linalg::rank(&linalg::mat_from_rows(&cand, dim)) == cand.len() {
            chosen.push(i);
            if chosen.len() == dim {
                break;
            }
        }
    }
    if chosen.len() < dim {
        return Err(LpError::Malformed("cone is not pointed".into()));
    }
    let ms: Mat = linalg::mat_from_rows(&chosen.iter().map(|&k| rows[k].clone()).collect::<Vec<_>>(), dim);
    let inv = ms
        .try_inverse()
        .ok_or_else(|| LpError::NumericalStall("singular initial basis".into()))?;
    let mut rays: Vec<Ray> = (0..dim)
        .map(|j| {
            let mut v: Vec<f64> = inv.column(j).iter().map(|x| -x).collect();
            normalize_max(&mut v);
            let mut zero = vec![0u64; words];
            for (k, &row) in chosen.iter().enumerate() {
                if k != j {
                    bit_set(&mut zero, row);
                }
            }
            Ray { v, zero }
        })
        .collect();
    let mut processed: Vec<u64> = vec![0; words];
    for &c in &chosen {
        bit_set(&mut processed, c);
    }

    for (i, row) in rows.iter().enumerate() {
        if chosen.contains(&i) {
            continue;
        }
        let s: Vec<f64> = rays.iter().map(|r| linalg::dot(row, &r.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| s[k] > ZERO_TOL).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| s[k] < -ZERO_TOL).collect();
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len());
        for (k, r) in rays.iter().enumerate() {
            if s[k] <= ZERO_TOL {
                let mut r = r.clone();
                if s[k] >= -ZERO_TOL {
                    bit_set(&mut r.zero, i);
                }
                next.push(r);
            }
        }
        for &p in &pos {
            for &q in &neg {
                let common = bits_and(&rays[p].zero, &rays[q].zero);
                if (popcount(&common) as usize) + 2 < dim {
                    continue;
                }
                let adjacent = rays.iter().enumerate().all(|(k, r)| {
                    k == p || k == q || !bits_subset(&common, &bits_and(&r.zero, &processed))
                });
                if !adjacent {
                    continue;
                }
                let (sp, sq) = (s[p], -s[q]);
                let mut v: Vec<f64> = rays[q]
                    .v
                    .iter()
                    .zip(&rays[p].v)
                    .map(|(a, b)| sp * a + sq * b)
                    .collect();
                normalize_max(&mut v);
                let mut zero = common;
                bit_set(&mut zero, i);
                next.push(Ray { v, zero });
            }
        }
        if next.len() > MAX_GENERATORS {
            return Err(LpError::Overflow(format!("more than {MAX_GENERATORS} generators")));
        }
        rays = next;
        bit_set(&mut processed, i);
    }
    Ok(rays.into_iter().map(|r| r.v).collect())
}

fn push_unique(list: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    let dup = list.iter().any(|w| {
        w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())))
    });
    if !dup {
        list.push(v);
    }
}

/// V-representation of `P`. Each vertex is re-verified against the
/// H-rows of `P`.
pub fn vertex_enumerate(p: &Polyhedron) -> Result<VRep, LpError> {
    let m = p.dim;
    if m > MAX_DIM {
        return Err(LpError::Overflow(format!("dimension {m} exceeds {MAX_DIM}")));
    }
    let (ineq_a, ineq_b) = p.inequalities();
    let (eq_a, eq_b) = p.equalities();

    // parametrize the affine hull of the equalities: y = y0 + N s
    let (y0, nbasis) = if eq_a.is_empty() {
        (Vector::zeros(m), DMatrix::identity(m, m))
    } else {
        let e = linalg::mat_from_rows(&eq_a, m);
        let d = linalg::vec_from(&eq_b);
        let y0 = linalg::lstsq(&e, &d);
        let resid = (&e * &y0 - &d).amax();
        if resid > 1e-9 * (1.0 + d.amax()) {
            return Ok(VRep::default());
        }
        (y0, linalg::null_space(&e, m))
    };
    let k = nbasis.ncols();
    let a_full = linalg::mat_from_rows(&ineq_a, m);
    let an = if ineq_a.is_empty() {
        DMatrix::zeros(0, k)
    } else {
        &a_full * &nbasis
    };
    let rhs: Vec<f64> = ineq_b
        .iter()
        .enumerate()
        .map(|(i, b)| b - linalg::dot(&ineq_a[i], y0.as_slice()))
        .collect();

    // split off the lineality space
    let lin = linalg::null_space(&an, k);
    let comp = if lin.ncols() == 0 {
        DMatrix::identity(k, k)
    } else {
        linalg::null_space(&lin.transpose(), k)
    };
    let q = comp.ncols();
    let to_y = &nbasis * &comp;
    let reduced = if an.nrows() == 0 { DMatrix::zeros(0, q) } else { &an * &comp };

    let mut rows: Vec<Vec<f64>> = vec![];
    for i in 0..reduced.nrows() {
        let r: Vec<f64> = reduced.row(i).iter().copied().collect();
        let scale = linalg::norm(&ineq_a[i]).max(1e-300);
        if linalg::norm(&r) <= 1e-10 * scale {
            if rhs[i] < -1e-9 * (1.0 + rhs[i].abs()) {
                return Ok(VRep::default());
            }
            continue;
        }
        let mut h = r;
        h.push(-rhs[i]);
        rows.push(h);
    }
    let lines: Vec<Vec<f64>> = (0..lin.ncols())
        .map(|j| (&nbasis * lin.column(j)).iter().copied().collect())
        .collect();

    let mut out = VRep {
        lines,
        ..VRep::default()
    };
    if q == 0 {
        out.vertices.push(y0.iter().copied().collect());
        return verify(p, out);
    }
    let mut tau_row = vec![0.0; q + 1];
    tau_row[q] = -1.0;
    rows.push(tau_row);
    let gens = cone_extreme_rays(&rows, q + 1)?;
    for g in gens {
        let tau = g[q];
        let t = Vector::from_column_slice(&g[..q]);
        if tau > 1e-10 {
            let y = &y0 + &to_y * (t / tau);
            push_unique(&mut out.vertices, y.iter().copied().collect());
        } else {
            let d = &to_y * t;
            let n = d.norm();
            if n > 1e-12 {
                push_unique(&mut out.rays, (d / n).iter().copied().collect());
            }
        }
    }
    if out.vertices.is_empty() {
        return Ok(VRep::default());
    }
    verify(p, out)
}

fn verify(p: &Polyhedron, out: VRep) -> Result<VRep, LpError> {
    for v in &out.vertices {
        let viol = p.violation(v);
        let scale = 1.0 + v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if viol > 1e-7 * scale {
            return Err(LpError::NumericalStall(format!(
                "enumerated vertex violates constraints by {viol:e}"
            )));
        }
    }
    Ok(out)
}
