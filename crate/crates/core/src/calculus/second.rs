//! Second subderivatives, parabolic subderivatives and graphical derivatives
//! through the max formula and its LP dual.

use serde::Serialize;

use super::Calculus;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::linalg::{self, EPS_FEAS};
use crate::lpsolve::{project_onto_polyhedron, LpOutcome, LpProblem, Sense, VRep};
use crate::polyhedral::Polyhedron;

#[derive(Clone, Debug, Serialize)]
pub struct MaxFormula {
    /// `d²ψ(x̄|v̄)(w)`.
    pub value: ExtReal,
    /// Multipliers attaining the max; `None` when `w` is not critical.
    pub argmax_multipliers: Option<Polyhedron>,
    /// The LP over all of `Λ` was unbounded and `value` is the max over a
    /// `τ`-box. Only happens when the qualification condition fails.
    pub unrestricted_unbounded: bool,
    /// `"inscribed"` or `"circumscribed"` box used after an unbounded LP.
    pub restriction: Option<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualPair {
    /// `min_z −⟨z,v̄⟩ + d²g(F(x̄))(∇F(x̄)w | ∇F(x̄)z + ∇²F(x̄)(w,w))`.
    pub primal: ExtReal,
    /// The max formula.
    pub dual: ExtReal,
    pub z_bar: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauCheck {
    pub tau: f64,
    pub holds: bool,
    /// A multiplier of the argmax with norm at most `τ`, if found.
    pub point: Option<Vec<f64>>,
    /// Distance from the origin to the argmax set (upper bound when found by
    /// the box LP).
    pub norm: f64,
    pub method: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParabolicRegularity {
    /// `d²ψ(x̄|v̄)(w)` from the max formula.
    pub lhs: ExtReal,
    /// `d²ψ(x̄)(w|z̄) − ⟨z̄,v̄⟩`, evaluated through the chain rule at the LP minimizer.
    pub rhs: ExtReal,
    /// Optimal value of the LP over `z`.
    pub rhs_lp: ExtReal,
    pub z_bar: Option<Vec<f64>>,
}

/// `D∂f(x̄|v̄)(w)`; empty when `w` is outside the critical cone.
#[derive(Clone, Debug, Serialize)]
pub struct GraphDerivValue {
    pub w: Vec<f64>,
    pub generators: Option<VRep>,
    pub set: Option<Polyhedron>,
}

impl GraphDerivValue {
    pub fn is_empty(&self) -> bool {
        self.generators.is_none()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.set.as_ref().is_some_and(|s| s.contains(z))
    }
}

/// `P ∩ {⟨q,y⟩ ≥ value}` with a relative slack.
fn level_face(set: &Polyhedron, q: &[f64], value: f64) -> Polyhedron {
    let mut out = set.clone();
    out.push_le(q.iter().map(|x| -x).collect(), -value + 1e-9 * (1.0 + value.abs()));
    out
}

impl Calculus<'_> {
    /// `d²ψ(x̄|v̄)(w) = max {⟨y, ∇²F(x̄)(w,w)⟩ : y ∈ Λ}` on the critical cone, `+∞` off it.
    pub fn d2_psi_max_formula(&self, w: &[f64]) -> Result<MaxFormula> {
        if !self.is_critical(w)? {
            return Ok(MaxFormula {
                value: ExtReal::PosInf,
                argmax_multipliers: None,
                unrestricted_unbounded: false,
                restriction: None,
            });
        }
        let q = self.curvature(w)?;
        let set = &self.multipliers.set;
        match set.to_lp(&q, Sense::Max).solve()? {
            LpOutcome::Optimal { value, .. } => Ok(MaxFormula {
                value: ExtReal::Finite(value),
                argmax_multipliers: Some(level_face(set, &q, value)),
                unrestricted_unbounded: false,
                restriction: None,
            }),
            LpOutcome::Unbounded { .. } => {
                // the inscribed box may miss Λ ∩ τ𝔹 when that set is small
                for (inscribed, label) in [(true, "inscribed"), (false, "circumscribed")] {
                    let boxed = self.tau_box(set, inscribed);
                    if let LpOutcome::Optimal { value, .. } = boxed.to_lp(&q, Sense::Max).solve()? {
                        return Ok(MaxFormula {
                            value: ExtReal::Finite(value),
                            argmax_multipliers: Some(level_face(&boxed, &q, value)),
                            unrestricted_unbounded: true,
                            restriction: Some(label),
                        });
                    }
                }
                Err(Error::HypothesisViolated("multiplier set misses the tau-box".into()))
            }
            LpOutcome::Infeasible { .. } => Err(Error::EmptyMultiplierSet("multiplier LP infeasible".into())),
        }
    }

    /// Whether the argmax multipliers meet the Euclidean `τ`-ball: first by an
    /// LP over the inscribed box, then exactly by projecting the origin.
    pub fn tau_attainment(&self, mf: &MaxFormula) -> Result<TauCheck> {
        let Some(face) = &mf.argmax_multipliers else {
            return Err(Error::InvalidArgument("tau attainment needs a critical direction".into()));
        };
        let tau = self.tau;
        let cap = tau * (1.0 + 1e-9) + 1e-12;
        if let Some(p) = self.tau_box(face, true).feasible_point()? {
            let norm = linalg::norm(&p);
            if norm <= cap {
                return Ok(TauCheck {
                    tau,
                    holds: true,
                    point: Some(p),
                    norm,
                    method: "inscribed box LP",
                });
            }
        }
        let pr = project_onto_polyhedron(face, &vec![0.0; self.m()])?;
        let holds = pr.distance <= cap;
        Ok(TauCheck {
            tau,
            holds,
            point: holds.then_some(pr.point),
            norm: pr.distance,
            method: "projection of the origin",
        })
    }

    /// LP over `(z, s)`: minimize `−⟨z,v̄⟩ + Σ_j s_j` where `s_j` bounds the
    /// pieces of the parabolic model of `g` and the tangent rows keep the
    /// argument in its domain.
    fn parabolic_lp(&self, w: &[f64]) -> Result<LpOutcome> {
        let n = self.n();
        let u = self.jac_w(w)?;
        let q = self.curvature(w)?;
        let lm = self.g.parabolic_model(&self.y_bar, &u)?;
        let k = lm.slopes.len();
        let jt = self.lin.jac.transpose();
        let pull = |a: &[f64]| -> Vec<f64> { (&jt * linalg::vec_from(a)).iter().copied().collect() };
        let mut c: Vec<f64> = self.v_psi.iter().map(|v| -v).collect();
        c.extend(std::iter::repeat(1.0).take(k));
        let mut lp = LpProblem::new(n + k, Sense::Min).objective(&c);
        for (j, s) in lm.slopes.iter().enumerate() {
            for a in s {
                let mut row = pull(a);
                row.extend(std::iter::repeat(0.0).take(k));
                row[n + j] = -1.0;
                lp.push_le(row, -linalg::dot(a, &q));
            }
        }
        let t = &lm.tangent.poly;
        for i in 0..t.n_rows() {
            let mut row = pull(&t.a[i]);
            row.extend(std::iter::repeat(0.0).take(k));
            let rhs = -linalg::dot(&t.a[i], &q);
            if t.eq[i] {
                lp.push_eq(row, rhs);
            } else {
                lp.push_le(row, rhs);
            }
        }
        Ok(lp.solve()?)
    }

    fn parabolic_inf(&self, w: &[f64]) -> Result<(ExtReal, Option<Vec<f64>>)> {
        match self.parabolic_lp(w)? {
            LpOutcome::Optimal { x, value, .. } => Ok((ExtReal::Finite(value), Some(x[..self.n()].to_vec()))),
            LpOutcome::Infeasible { .. } => Ok((ExtReal::PosInf, None)),
            LpOutcome::Unbounded { .. } => Err(Error::HypothesisViolated(
                "parabolic LP is unbounded below; the multiplier set would be empty".into(),
            )),
        }
    }

    fn require_critical(&self, w: &[f64]) -> Result<()> {
        if self.is_critical(w)? {
            Ok(())
        } else {
            Err(Error::InvalidArgument("w is not a critical direction".into()))
        }
    }

    /// The LP over `z` and the max formula over `Λ`, which are dual to each other.
    pub fn d2_psi_dual_pair(&self, w: &[f64]) -> Result<DualPair> {
        self.require_critical(w)?;
        let (primal, z_bar) = self.parabolic_inf(w)?;
        let dual = self.d2_psi_max_formula(w)?.value;
        Ok(DualPair { primal, dual, z_bar })
    }

    /// `d²ψ(x̄)(w|z) = d²g(F(x̄))(∇F(x̄)w | ∇F(x̄)z + ∇²F(x̄)(w,w))`.
    pub fn chain_rule_parabolic(&self, w: &[f64], z: &[f64]) -> Result<ExtReal> {
        let u = self.jac_w(w)?;
        if self.g.subderivative(&self.y_bar, &u)?.is_infinite() {
            return Err(Error::NotTangent("the image of w leaves the tangent cone of dom g".into()));
        }
        let q = self.curvature(w)?;
        let zeta: Vec<f64> = self.jac_w(z)?.iter().zip(&q).map(|(a, b)| a + b).collect();
        self.g.parabolic_subderivative(&self.y_bar, &u, &zeta)
    }

    /// `⟨w,∇²φ(x̄)w⟩ + d²ψ(x̄|v̄ − ∇φ(x̄))(w)`.
    pub fn sum_rule_second_subderivative(&self, w: &[f64]) -> Result<ExtReal> {
        let d2 = self.d2_psi_max_formula(w)?.value;
        Ok(d2 + self.phi_quadratic(w)?)
    }

    /// `⟨w,∇²φ(x̄)w⟩ + ∇φ(x̄)z + d²ψ(x̄)(w|z)`.
    pub fn sum_rule_parabolic(&self, w: &[f64], z: &[f64]) -> Result<ExtReal> {
        let psi = self.chain_rule_parabolic(w, z)?;
        let gz = linalg::dot(self.lin.grad_phi.as_slice(), z);
        Ok(psi + (self.phi_quadratic(w)? + gz))
    }

    pub fn parabolic_regularity_check(&self, w: &[f64]) -> Result<ParabolicRegularity> {
        self.require_critical(w)?;
        let lhs = self.d2_psi_max_formula(w)?.value;
        let (rhs_lp, z_bar) = self.parabolic_inf(w)?;
        let rhs = match &z_bar {
            Some(z) => self.chain_rule_parabolic(w, z)?.sub_finite(linalg::dot(z, &self.v_psi)),
            None => ExtReal::PosInf,
        };
        Ok(ParabolicRegularity { lhs, rhs, rhs_lp, z_bar })
    }

    /// `D∂f(x̄|v̄)(w) = ∇²φ(x̄)w + ∂h(w)` with `h = ½d²ψ(x̄|v̄ − ∇φ(x̄))`.
    /// On the critical cone `h(w) = ½ max_r ⟨w, C_r w⟩` over the multiplier
    /// vertices, so `∂h(w) = conv{C_r w : r active} + N_K(w)`. Recession
    /// directions of `Λ` whose form vanishes at `w` add the rays `R w`.
    pub fn sum_rule_graphical(&self, w: &[f64]) -> Result<GraphDerivValue> {
        let n = self.n();
        let wv = self.check_w(w)?;
        let cone = &self.critical_cone()?.cone;
        if !cone.contains(w) {
            return Ok(GraphDerivValue {
                w: w.to_vec(),
                generators: None,
                set: None,
            });
        }
        let pieces = self.multiplier_pieces()?;
        let vals: Vec<f64> = pieces.curvatures.iter().map(|c| (wv.transpose() * c * &wv)[0]).collect();
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + top.abs()) * wv.norm_squared().max(1.0);
        let hw = &self.lin.hess_phi * &wv;
        let mut vertices: Vec<Vec<f64>> = vec![];
        for (c, v) in pieces.curvatures.iter().zip(&vals) {
            if *v >= top - tol {
                let z: Vec<f64> = (&hw + c * &wv).iter().copied().collect();
                if !vertices.iter().any(|u| u.iter().zip(&z).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))) {
                    vertices.push(z);
                }
            }
        }
        let mut rays = vec![];
        for (r, v) in pieces.ray_curvatures.iter().map(|r| (r, (wv.transpose() * r * &wv)[0])) {
            if v > tol {
                return Err(Error::HypothesisViolated(
                    "a recession direction of the multiplier set has positive curvature on the critical cone".into(),
                ));
            }
            let rw: Vec<f64> = (r * &wv).iter().copied().collect();
            if v >= -tol && linalg::norm(&rw) > 1e-12 {
                rays.push(rw);
            }
        }
        let mut lines = vec![];
        let p = &cone.poly;
        let wn = wv.norm().max(1.0);
        for i in 0..p.n_rows() {
            if p.eq[i] {
                lines.push(p.a[i].clone());
            } else if linalg::dot(&p.a[i], w).abs() <= EPS_FEAS * wn * (1.0 + linalg::norm(&p.a[i])) {
                rays.push(p.a[i].clone());
            }
        }
        let gens = VRep { vertices, rays, lines };
        let set = Polyhedron::from_generators(n, &gens)?;
        Ok(GraphDerivValue {
            w: w.to_vec(),
            generators: Some(gens),
            set: Some(set),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{d2_psi_dual_pair, d2_psi_max_formula, parabolic_regularity_check, sum_rule_graphical};
    use super::*;
    use crate::catalog::examples;
    use crate::ext::{Finite, PosInf};
    use crate::polyhedral::PolyhedralFn;
    use crate::problem::{CompositeProblem, Outer};
    use crate::smooth::{SmoothMap, SmoothOracle};

    fn one_dim(phi: Option<&str>, map: Option<&str>, g: PolyhedralFn, v_bar: f64) -> CompositeProblem {
        let phi = phi.map(|s| SmoothOracle::parse(s, 1).unwrap());
        let map = match map {
            Some(s) => SmoothMap::parse(&[s], 1).unwrap(),
            None => SmoothMap::identity(1),
        };
        CompositeProblem::with_subgradient(phi, map, Outer::Polyhedral(g), vec![0.0], vec![v_bar]).unwrap()
    }

    #[test]
    fn max_formula_degenerate_indicator() {
        let p = one_dim(None, None, PolyhedralFn::nonpositive_orthant(1), 0.0);
        let mf = d2_psi_max_formula(&p, &[-1.0]).unwrap();
        assert_eq!(mf.value, Finite(0.0));
        assert!(!mf.unrestricted_unbounded);
        assert_eq!(d2_psi_max_formula(&p, &[1.0]).unwrap().value, PosInf);
    }

    /// `F(x) = x₀ + x₁²`, `g = δ_{ℝ₋}`, `v̄ = (1,0)`: `Λ = {1}`, `K = {w₀ = 0}` and
    /// `d²ψ(0|v̄)(w) = 2w₁²` there.
    fn bent_half_plane() -> CompositeProblem {
        let map = SmoothMap::parse(&["x0 + x1^2"], 2).unwrap();
        let g = Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(1));
        CompositeProblem::with_subgradient(None, map, g, vec![0.0, 0.0], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn max_formula_curved_constraint() {
        let p = bent_half_plane();
        let c = Calculus::new(&p).unwrap();
        assert!(c.is_critical(&[0.0, -0.5]).unwrap());
        assert!(!c.is_critical(&[-0.5, 0.0]).unwrap());
        let mf = c.d2_psi_max_formula(&[0.0, -0.5]).unwrap();
        assert!(mf.value.approx_eq(Finite(0.5), 1e-12));
        let tc = c.tau_attainment(&mf).unwrap();
        assert!(tc.holds, "{tc:?}");
        assert_eq!(c.d2_psi_max_formula(&[-0.5, 0.0]).unwrap().value, PosInf);
    }

    #[test]
    fn dual_pair_examples() {
        let ex = examples::problem_4_6();
        let d = d2_psi_dual_pair(&ex, &[0.0]).unwrap();
        assert_eq!((d.primal, d.dual), (Finite(0.0), Finite(0.0)));
        let ind = one_dim(None, None, PolyhedralFn::nonpositive_orthant(1), 0.0);
        let d = d2_psi_dual_pair(&ind, &[-1.0]).unwrap();
        assert_eq!((d.primal, d.dual), (Finite(0.0), Finite(0.0)));
        assert!(d2_psi_dual_pair(&ind, &[1.0]).is_err());
    }

    #[test]
    fn dual_pair_curved() {
        let p = bent_half_plane();
        let d = d2_psi_dual_pair(&p, &[0.0, 2.0]).unwrap();
        assert!(d.primal.approx_eq(Finite(8.0), 1e-9), "{d:?}");
        assert!(d.dual.approx_eq(Finite(8.0), 1e-9));
        let r = parabolic_regularity_check(&p, &[0.0, 2.0]).unwrap();
        assert!(r.lhs.approx_eq(r.rhs, 1e-9), "{r:?}");
        assert!(r.z_bar.unwrap()[0] <= -8.0 + 1e-9);
    }

    #[test]
    fn chain_rule_parabolic_example() {
        let p = examples::problem_4_6();
        let c = Calculus::new(&p).unwrap();
        assert_eq!(c.chain_rule_parabolic(&[1.0], &[0.0]).unwrap(), Finite(0.0));
        // second-order tangent consistency: ∇F z + ∇²F(w,w) = (−z, 0) must lie in T²
        let t2 = c.g.domain().second_order_tangent_set(&c.y_bar, &c.jac_w(&[1.0]).unwrap()).unwrap();
        for z in [-1.0, 0.0, 2.0] {
            let finite = c.chain_rule_parabolic(&[1.0], &[z]).unwrap().is_finite();
            let zeta = [-z, 0.0];
            assert_eq!(finite, t2.contains(&zeta));
        }
        assert!(matches!(c.chain_rule_parabolic(&[-1.0], &[0.0]), Err(Error::NotTangent(_))));
    }

    #[test]
    fn graphical_examples() {
        let q = one_dim(Some("0.5*x^2"), None, PolyhedralFn::zero(1), 0.0);
        let gd = sum_rule_graphical(&q, &[0.7]).unwrap();
        assert!(gd.contains(&[0.7]) && !gd.contains(&[0.8]));

        let ind = one_dim(None, None, PolyhedralFn::nonpositive_orthant(1), 0.0);
        let gd = sum_rule_graphical(&ind, &[0.0]).unwrap();
        assert!(gd.contains(&[0.0]) && gd.contains(&[5.0]) && !gd.contains(&[-1.0]));
        assert!(sum_rule_graphical(&ind, &[1.0]).unwrap().is_empty());
        let gd = sum_rule_graphical(&ind, &[-1.0]).unwrap();
        assert!(gd.contains(&[0.0]) && !gd.contains(&[1.0]));

        let ex = examples::problem_4_6();
        let gd = sum_rule_graphical(&ex, &[0.0]).unwrap();
        assert!(gd.contains(&[-7.0]) && gd.contains(&[3.0]));
        assert!(sum_rule_graphical(&ex, &[0.5]).unwrap().is_empty());
    }

    #[test]
    fn parabolic_sum_rule_matches_quadratic() {
        // f = ½x² + |x| at v̄ = 0 ... use v̄ = 1 so that w = 1 is critical for |·|
        let p = one_dim(Some("0.5*x^2"), None, PolyhedralFn::L1 { dim: 1 }, 1.0);
        let c = Calculus::new(&p).unwrap();
        // d²(φ+ψ)(0)(1|z) = 1 + 0·z + d²|·|(0)(1|z) = 1 + z
        for z in [-1.0, 0.0, 3.0] {
            assert!(c.sum_rule_parabolic(&[1.0], &[z]).unwrap().approx_eq(Finite(1.0 + z), 1e-12));
        }
    }
}
