//! Exact first- and second-order calculus for `ψ = g∘F` with polyhedral `g`,
//! and for `f = φ + ψ`, at the base point of a [`CompositeProblem`].
//!
//! [`Calculus`] caches the data at `x̄` (Jacobian, multiplier set, `τ`).
//! The free functions build one per call.

mod msqc;
mod second;

use std::cell::OnceCell;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::ext::ExtReal;
use crate::linalg::{self, Mat, Vector, EPS_FEAS};
use crate::lpsolve::VRep;
use crate::polyhedral::{PolyCone, PolyhedralFn, Polyhedron};
use crate::problem::{CompositeProblem, Linearization};
use crate::smooth::second_form;

pub(crate) use msqc::project_to_domain;
pub use msqc::{msqc_check, msqc_kappa_linearized, msqc_point, MsqcPoint, MsqcReport};
pub use second::{DualPair, GraphDerivValue, MaxFormula, ParabolicRegularity, TauCheck};

/// `Λ(x̄,v̄) = {y ∈ ∂g(F(x̄)) : ∇F(x̄)ᵀy = v̄}`, with `v̄` the `ψ`-level subgradient.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplierSet {
    pub set: Polyhedron,
}

impl MultiplierSet {
    pub fn contains(&self, y: &[f64]) -> bool {
        self.set.contains(y)
    }

    pub fn generators(&self) -> Result<VRep> {
        Ok(self.set.vrep()?)
    }
}

/// `K(x̄|v̄) = {w : dψ(x̄)(w) = ⟨v̄,w⟩}`; for `f = φ + ψ` at `v̄ = 0` this is
/// also the critical cone of `f`.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalCone {
    pub cone: PolyCone,
}

impl CriticalCone {
    pub fn contains(&self, w: &[f64]) -> bool {
        self.cone.contains(w)
    }

    pub fn is_trivial(&self) -> Result<bool> {
        Ok(self.cone.is_trivial()?)
    }
}

/// Vertices and recession directions of `Λ` with their curvature matrices
/// `Σ_k y_k ∇²F_k(x̄)`. On the critical cone `d²ψ(x̄|v̄)(w)` is the largest
/// vertex form, provided no recession form is positive at `w`.
#[derive(Clone, Debug)]
pub struct MultiplierPieces {
    pub vertices: Vec<Vec<f64>>,
    pub curvatures: Vec<Mat>,
    /// Extreme rays, with lines split into two opposite rays.
    pub rays: Vec<Vec<f64>>,
    pub ray_curvatures: Vec<Mat>,
}

/// Second-order data of a composite problem at `x̄`.
pub struct Calculus<'a> {
    pub problem: &'a CompositeProblem,
    pub g: &'a PolyhedralFn,
    pub lin: Linearization,
    /// `F(x̄)`.
    pub y_bar: Vec<f64>,
    /// `v̄ − ∇φ(x̄)`, the subgradient of `ψ` the analysis is carried out for.
    pub v_psi: Vec<f64>,
    pub multipliers: MultiplierSet,
    /// MSQC constant entering `τ`.
    pub kappa: f64,
    /// Lipschitz constant of `g` relative to its domain.
    pub ell: f64,
    pub tau: f64,
    pieces: OnceCell<MultiplierPieces>,
    cone: OnceCell<CriticalCone>,
}

/// `κℓ‖∇F(x̄)‖ + κ‖v̄‖ + ℓ`.
pub fn tau_formula(kappa: f64, ell: f64, jac_norm: f64, v_norm: f64) -> f64 {
    kappa * ell * jac_norm + kappa * v_norm + ell
}

/// `τ` for a problem, with `‖v̄‖` the norm of its `ψ`-level subgradient.
pub fn tau_bound(p: &CompositeProblem, kappa: f64, ell: f64) -> Result<f64> {
    let jac = p.map.jacobian(&p.x_bar)?;
    let v = p.psi_v_bar()?;
    Ok(tau_formula(kappa, ell, linalg::op_norm(&jac), v.norm()))
}

pub fn multiplier_set(p: &CompositeProblem) -> Result<MultiplierSet> {
    let g = p.g_poly()?;
    let lin = p.linearize()?;
    let v = p.psi_v_bar()?;
    build_multipliers(g, &lin, v.as_slice())
}

fn build_multipliers(g: &PolyhedralFn, lin: &Linearization, v: &[f64]) -> Result<MultiplierSet> {
    let mut set = g.subdifferential(&lin.f_val)?;
    for i in 0..lin.jac.ncols() {
        set.push_eq(lin.jac.column(i).iter().copied().collect(), v[i]);
    }
    if set.is_empty()? {
        return Err(Error::EmptyMultiplierSet(
            "no y in the subdifferential of g with adjoint equal to the subgradient".into(),
        ));
    }
    Ok(MultiplierSet { set })
}

/// `∂ψ(x̄) = ∇F(x̄)ᵀ ∂g(F(x̄))`.
pub fn psi_subdifferential(p: &CompositeProblem) -> Result<Polyhedron> {
    let g = p.g_poly()?;
    let y = p.map.eval(&p.x_bar)?;
    let jt = p.map.jacobian(&p.x_bar)?.transpose();
    Ok(g.subdifferential(&y)?.image(&jt)?)
}

impl<'a> Calculus<'a> {
    /// Uses the linearized MSQC constant from [`msqc_kappa_linearized`].
    pub fn new(p: &'a CompositeProblem) -> Result<Self> {
        let kappa = msqc_kappa_linearized(p)?;
        Self::with_kappa(p, kappa)
    }

    pub fn with_kappa(p: &'a CompositeProblem, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument("kappa must be finite and nonnegative".into()));
        }
        let g = p.g_poly()?;
        let lin = p.linearize()?;
        let v_psi: Vec<f64> = p.psi_v_bar()?.iter().copied().collect();
        let multipliers = build_multipliers(g, &lin, &v_psi)?;
        let ell = g.lipschitz();
        let tau = tau_formula(kappa, ell, linalg::op_norm(&lin.jac), linalg::norm(&v_psi));
        Ok(Calculus {
            problem: p,
            g,
            y_bar: lin.f_val.clone(),
            lin,
            v_psi,
            multipliers,
            kappa,
            ell,
            tau,
            pieces: OnceCell::new(),
            cone: OnceCell::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    fn check_w(&self, w: &[f64]) -> Result<Vector> {
        check_dim(self.n(), w.len(), "direction")?;
        Ok(linalg::vec_from(w))
    }

    /// `∇F(x̄)w`.
    pub fn jac_w(&self, w: &[f64]) -> Result<Vec<f64>> {
        let wv = self.check_w(w)?;
        Ok((&self.lin.jac * wv).iter().copied().collect())
    }

    /// `∇²F(x̄)(w,w)`.
    pub fn curvature(&self, w: &[f64]) -> Result<Vec<f64>> {
        let wv = self.check_w(w)?;
        Ok(second_form(&self.lin.hessians, &wv).iter().copied().collect())
    }

    /// `⟨w, ∇²φ(x̄)w⟩`.
    pub fn phi_quadratic(&self, w: &[f64]) -> Result<f64> {
        let wv = self.check_w(w)?;
        Ok((wv.transpose() * &self.lin.hess_phi * &wv)[0])
    }

    /// `dψ(x̄)(w) = dg(F(x̄))(∇F(x̄)w)`.
    pub fn psi_subderivative(&self, w: &[f64]) -> Result<ExtReal> {
        self.g.subderivative(&self.y_bar, &self.jac_w(w)?)
    }

    /// Scalar test of `dψ(x̄)(w) = ⟨v̄,w⟩`. Equivalent to feasibility of the
    /// multiplier LP with the extra row `⟨y,∇F(x̄)w⟩ = dψ(x̄)(w)`, since every
    /// `y ∈ Λ` has `⟨y,∇F(x̄)w⟩ = ⟨v̄,w⟩`.
    pub fn is_critical(&self, w: &[f64]) -> Result<bool> {
        Ok(match self.psi_subderivative(w)? {
            ExtReal::PosInf => false,
            ExtReal::Finite(d) => {
                let lin = linalg::dot(&self.v_psi, w);
                (d - lin).abs() <= 1e-9 * (1.0 + d.abs().max(lin.abs()))
            }
        })
    }

    /// `∂ψ(x̄)` as an H-polyhedron.
    pub fn psi_subdifferential(&self) -> Result<Polyhedron> {
        let jt = self.lin.jac.transpose();
        Ok(self.g.subdifferential(&self.y_bar)?.image(&jt)?)
    }

    /// The critical cone, as the preimage under `∇F(x̄)` of the normal cone
    /// of `∂g(F(x̄))` at some `y₀ ∈ Λ` (the same for every such `y₀`).
    pub fn critical_cone(&self) -> Result<&CriticalCone> {
        if let Some(c) = self.cone.get() {
            return Ok(c);
        }
        let c = self.build_cone()?;
        Ok(self.cone.get_or_init(|| c))
    }

    fn build_cone(&self) -> Result<CriticalCone> {
        let (n, m) = (self.n(), self.m());
        let sub = self.g.subdifferential(&self.y_bar)?;
        let y0 = self
            .multipliers
            .set
            .feasible_point()?
            .ok_or_else(|| Error::EmptyMultiplierSet("phase-1 LP found no point".into()))?;
        let mut rays = vec![];
        let mut lines = vec![];
        for i in 0..sub.n_rows() {
            let r = &sub.a[i];
            if sub.eq[i] {
                lines.push(r.clone());
            } else {
                let scale = 1.0 + linalg::norm(r) * linalg::norm(&y0) + sub.b[i].abs();
                if (linalg::dot(r, &y0) - sub.b[i]).abs() <= EPS_FEAS * scale {
                    rays.push(r.clone());
                }
            }
        }
        let normal = Polyhedron::from_generators(
            m,
            &VRep {
                vertices: vec![vec![0.0; m]],
                rays,
                lines,
            },
        )?;
        let jt = self.lin.jac.transpose();
        let pull = |row: &Vec<f64>| -> Vec<f64> { (&jt * linalg::vec_from(row)).iter().copied().collect() };
        let mut cone = PolyCone::universe(n);
        for i in 0..normal.n_rows() {
            let r = pull(&normal.a[i]);
            if normal.eq[i] {
                cone.push_eq(r);
            } else {
                cone.push_le(r);
            }
        }
        Ok(CriticalCone { cone })
    }

    /// `P ∩ [−s, s]^m` with `s = τ/√m` (inscribed in the `τ`-ball) or
    /// `s = τ` (circumscribed).
    pub fn tau_box(&self, set: &Polyhedron, inscribed: bool) -> Polyhedron {
        let m = self.m();
        let s = if inscribed { self.tau / (m.max(1) as f64).sqrt() } else { self.tau };
        let mut out = set.clone();
        for k in 0..m {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            out.push_le(e.clone(), s);
            e[k] = -1.0;
            out.push_le(e, s);
        }
        out
    }

    fn curvature_matrix(&self, y: &[f64]) -> Mat {
        let n = self.n();
        let mut c = Mat::zeros(n, n);
        for (k, h) in self.lin.hessians.iter().enumerate() {
            c += h * y[k];
        }
        linalg::symmetrize(&c)
    }

    pub fn multiplier_pieces(&self) -> Result<&MultiplierPieces> {
        if let Some(p) = self.pieces.get() {
            return Ok(p);
        }
        let gens = self.multipliers.generators()?;
        let mut rays = gens.rays;
        for l in gens.lines {
            rays.push(l.iter().map(|v| -v).collect());
            rays.push(l);
        }
        let p = MultiplierPieces {
            curvatures: gens.vertices.iter().map(|y| self.curvature_matrix(y)).collect(),
            ray_curvatures: rays.iter().map(|r| self.curvature_matrix(r)).collect(),
            vertices: gens.vertices,
            rays,
        };
        Ok(self.pieces.get_or_init(|| p))
    }
}

pub fn critical_cone(p: &CompositeProblem) -> Result<CriticalCone> {
    Ok(Calculus::new(p)?.critical_cone()?.clone())
}

pub fn d2_psi_max_formula(p: &CompositeProblem, w: &[f64]) -> Result<MaxFormula> {
    Calculus::new(p)?.d2_psi_max_formula(w)
}

pub fn d2_psi_dual_pair(p: &CompositeProblem, w: &[f64]) -> Result<DualPair> {
    Calculus::new(p)?.d2_psi_dual_pair(w)
}

pub fn sum_rule_graphical(p: &CompositeProblem, w: &[f64]) -> Result<GraphDerivValue> {
    Calculus::new(p)?.sum_rule_graphical(w)
}

pub fn sum_rule_second_subderivative(p: &CompositeProblem, w: &[f64]) -> Result<ExtReal> {
    Calculus::new(p)?.sum_rule_second_subderivative(w)
}

pub fn sum_rule_parabolic(p: &CompositeProblem, w: &[f64], z: &[f64]) -> Result<ExtReal> {
    Calculus::new(p)?.sum_rule_parabolic(w, z)
}

pub fn chain_rule_parabolic(p: &CompositeProblem, w: &[f64], z: &[f64]) -> Result<ExtReal> {
    Calculus::new(p)?.chain_rule_parabolic(w, z)
}

pub fn parabolic_regularity_check(p: &CompositeProblem, w: &[f64]) -> Result<ParabolicRegularity> {
    Calculus::new(p)?.parabolic_regularity_check(w)
}
