//! The metric subregularity qualification `d(x, dom ψ) ≤ κ·d(F(x), dom g)`.
//!
//! Two numbers are produced. `kappa_linearized` is the Hoffman constant of
//! the linearized active system, computed exactly. `kappa_est` is the largest
//! sampled ratio, where `d(x, dom ψ)` comes from a Gauss-Newton projection
//! and is therefore a local estimate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::sampling::ball_samples;
use crate::linalg::{self, EPS_FEAS};
use crate::lpsolve::{min_quadratic_on_cone, project_onto_polyhedron, LpError, LpProblem, Sense};
use crate::polyhedral::{PolyCone, Polyhedron};
use crate::problem::CompositeProblem;

/// Row budget for the subset enumeration behind the Hoffman constant.
const MAX_ACTIVE_ROWS: usize = 12;
const GN_MAX_ITER: usize = 40;
/// Successive step ratio above which Gauss-Newton is considered to crawl.
const GN_SLOW_RATIO: f64 = 0.25;
/// Sampled ratios above this are reported as a failure of the qualification.
const KAPPA_CAP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsqcPoint {
    pub x: Vec<f64>,
    /// Gauss-Newton estimate of `d(x, dom ψ)` (an upper bound when converged).
    pub dist_x: f64,
    /// `d(F(x), dom g)`, exact.
    pub dist_fx: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsqcReport {
    pub holds_on_samples: bool,
    /// Largest sampled ratio `d(x, dom ψ)/d(F(x), dom g)`.
    pub kappa_est: f64,
    pub kappa_linearized: f64,
    pub samples: usize,
    /// Samples with `F(x) ∉ dom g`.
    pub infeasible_samples: usize,
    pub stalls: usize,
    pub stall_witness: Option<Vec<f64>>,
    pub note: &'static str,
}

/// Local Gauss-Newton projection of `x` onto `{x' : F(x') ∈ D}`.
fn gauss_newton(p: &CompositeProblem, dom: &Polyhedron, x: &[f64]) -> Result<(Vec<f64>, bool)> {
    let n = p.n();
    let mut cur = x.to_vec();
    let mut last_step = f64::INFINITY;
    let mut slow = 0;
    for _ in 0..GN_MAX_ITER {
        let fx = p.map.eval(&cur)?;
        if dom.contains_strict(&fx) {
            return Ok((cur, true));
        }
        let jac = p.map.jacobian(&cur)?;
        let jt = jac.transpose();
        // rows a·(F(c) + J(x' − c)) ≤ b written in x'
        let mut lin = Polyhedron::universe(n);
        let jc: Vec<f64> = (&jac * linalg::vec_from(&cur)).iter().copied().collect();
        for i in 0..dom.n_rows() {
            let a = &dom.a[i];
            let row: Vec<f64> = (&jt * linalg::vec_from(a)).iter().copied().collect();
            let rhs = dom.b[i] - linalg::dot(a, &fx) + linalg::dot(a, &jc);
            if dom.eq[i] {
                lin.push_eq(row, rhs);
            } else {
                lin.push_le(row, rhs);
            }
        }
        let next = match project_onto_polyhedron(&lin, x) {
            Ok(pr) => pr.point,
            Err(LpError::Empty) => return Ok((cur, false)),
            Err(e) => return Err(e.into()),
        };
        let step = linalg::norm(&next.iter().zip(&cur).map(|(a, b)| a - b).collect::<Vec<_>>());
        cur = next;
        if step <= 1e-15 * (1.0 + linalg::norm(&cur)) {
            let fx = p.map.eval(&cur)?;
            return Ok((cur, dom.violation(&fx) <= EPS_FEAS));
        }
        if step >= GN_SLOW_RATIO * last_step {
            slow += 1;
            if slow >= 3 {
                return Ok((cur, false));
            }
        } else {
            slow = 0;
        }
        last_step = step;
    }
    Ok((cur, false))
}

/// `x` pulled into `dom ψ` by the Gauss-Newton projection; `None` when it stalls.
pub(crate) fn project_to_domain(p: &CompositeProblem, x: &[f64]) -> Result<Option<Vec<f64>>> {
    let dom = p.g_poly()?.domain();
    if dom.contains_strict(&p.map.eval(x)?) {
        return Ok(Some(x.to_vec()));
    }
    let (proj, converged) = gauss_newton(p, &dom, x)?;
    Ok(converged.then_some(proj))
}

/// Both distances at one point.
pub fn msqc_point(p: &CompositeProblem, x: &[f64]) -> Result<MsqcPoint> {
    let g = p.g_poly()?;
    let dom = g.domain();
    let fx = p.map.eval(x)?;
    let dist_fx = project_onto_polyhedron(&dom, &fx)
        .map_err(|e| Error::ProjectionStall(e.to_string()))?
        .distance;
    if dom.contains_strict(&fx) {
        return Ok(MsqcPoint {
            x: x.to_vec(),
            dist_x: 0.0,
            dist_fx,
            converged: true,
        });
    }
    let (proj, converged) = gauss_newton(p, &dom, x)?;
    let dist_x = linalg::norm(&proj.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(MsqcPoint {
        x: x.to_vec(),
        dist_x,
        dist_fx,
        converged,
    })
}

/// Samples the `radius`-ball around `x̄` and records the largest ratio.
pub fn msqc_check(p: &CompositeProblem, radius: f64, n_samples: usize) -> Result<MsqcReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let kappa_linearized = msqc_kappa_linearized(p)?;
    let mut kappa_est = 0.0f64;
    let mut infeasible = 0;
    let mut stalls = 0;
    let mut stall_witness = None;
    let pts = ball_samples(&p.x_bar, radius, n_samples, 0);
    for x in &pts {
        let pt = msqc_point(p, x)?;
        if pt.dist_x == 0.0 && pt.converged {
            continue;
        }
        infeasible += 1;
        if !pt.converged {
            stalls += 1;
            stall_witness.get_or_insert_with(|| x.clone());
            continue;
        }
        if pt.dist_fx > 0.0 {
            kappa_est = kappa_est.max(pt.dist_x / pt.dist_fx);
        }
    }
    Ok(MsqcReport {
        holds_on_samples: stalls == 0 && kappa_est <= KAPPA_CAP,
        kappa_est,
        kappa_linearized,
        samples: pts.len(),
        infeasible_samples: infeasible,
        stalls,
        stall_witness,
        note: "d(x, dom psi) is a local Gauss-Newton estimate",
    })
}

/// Hoffman constant of `{d : A_act ∇F(x̄) d ≤ 0}` times `‖A_act‖`, where
/// `A_act` are the rows of `dom g` active at `F(x̄)`. The Hoffman constant
/// is `max_S 1/min{‖M_Sᵀu‖ : u ≥ 0, ‖u‖ = 1}` over row subsets `S` for which
/// `M_S d < 0` is solvable.
pub fn msqc_kappa_linearized(p: &CompositeProblem) -> Result<f64> {
    let g = p.g_poly()?;
    let dom = g.domain();
    let y = p.map.eval(&p.x_bar)?;
    let jac = p.map.jacobian(&p.x_bar)?;
    let n = p.n();
    let m = p.m();
    let mut act: Vec<Vec<f64>> = vec![];
    let mut signed: Vec<Vec<f64>> = vec![];
    for i in 0..dom.n_rows() {
        let a = &dom.a[i];
        let r = linalg::dot(a, &y) - dom.b[i];
        if dom.eq[i] || r.abs() <= EPS_FEAS * (1.0 + dom.b[i].abs()) {
            act.push(a.clone());
            let mrow: Vec<f64> = (jac.transpose() * linalg::vec_from(a)).iter().copied().collect();
            if dom.eq[i] {
                signed.push(mrow.iter().map(|v| -v).collect());
            }
            signed.push(mrow);
        }
    }
    if act.is_empty() {
        return Ok(0.0);
    }
    if signed.len() > MAX_ACTIVE_ROWS {
        return Err(Error::Overflow(format!("{} active rows for the Hoffman constant", signed.len())));
    }
    let a_norm = linalg::op_norm(&linalg::mat_from_rows(&act, m));
    let r = signed.len();
    let mut h = 0.0f64;
    for mask in 1u32..(1u32 << r) {
        let rows: Vec<&Vec<f64>> = (0..r).filter(|i| mask & (1 << i) != 0).map(|i| &signed[i]).collect();
        // M_S d ≤ −1 solvable?
        let mut lp = LpProblem::new(n, Sense::Min);
        for row in &rows {
            lp.push_le((*row).clone(), -1.0);
        }
        if lp.solve()?.is_infeasible() {
            continue;
        }
        let k = rows.len();
        let ms = linalg::mat_from_rows(&rows.iter().map(|r| (*r).clone()).collect::<Vec<_>>(), n);
        let gram = &ms * ms.transpose();
        let orthant = PolyCone::from_rows(
            k,
            (0..k)
                .map(|i| {
                    let mut e = vec![0.0; k];
                    e[i] = -1.0;
                    e
                })
                .collect(),
        );
        let sigma2 = min_quadratic_on_cone(&gram, &orthant)?.value.to_f64();
        if sigma2 > 0.0 {
            h = h.max(1.0 / sigma2.sqrt());
        }
    }
    Ok(h * a_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::examples;
    use crate::polyhedral::PolyhedralFn;
    use crate::problem::Outer;
    use crate::smooth::SmoothMap;

    #[test]
    fn example_ratio_at_most_one() {
        let p = examples::problem_4_6();
        for i in 0..=200 {
            let x = -1.0 + 2.0 * i as f64 / 200.0;
            let pt = msqc_point(&p, &[x]).unwrap();
            assert!(pt.converged);
            assert!(pt.dist_x <= pt.dist_fx + 1e-12, "{pt:?}");
            if x < 0.0 {
                assert!((pt.dist_x - x.abs()).abs() < 1e-12);
            }
        }
        let r = msqc_check(&p, 1.0, 200).unwrap();
        assert!(r.holds_on_samples && r.kappa_est <= 1.0 + 1e-12);
        assert!((r.kappa_linearized - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_map_ratio_one() {
        let box_set = Polyhedron::from_rows(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        let p = CompositeProblem::new(
            None,
            SmoothMap::identity(2),
            Outer::Polyhedral(PolyhedralFn::indicator(box_set)),
            vec![0.0, 0.0],
        )
        .unwrap();
        let r = msqc_check(&p, 1.0, 100).unwrap();
        assert!(r.holds_on_samples);
        assert!((r.kappa_est - 1.0).abs() < 1e-9, "{r:?}");
        assert!(r.infeasible_samples > 0);
    }

    #[test]
    fn degenerate_map_stalls() {
        let map = SmoothMap::parse(&["x0^2", "-x0^2"], 1).unwrap();
        let p = CompositeProblem::new(None, map, Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(2)), vec![0.0]).unwrap();
        let r = msqc_check(&p, 1.0, 50).unwrap();
        assert!(!r.holds_on_samples);
        assert!(r.stalls > 0 && r.stall_witness.is_some());
        assert_eq!(r.kappa_linearized, 0.0);
    }
}
