//! Polyhedral convex functions `g : ℝᵐ → ℝ ∪ {+∞}` with exact first- and
//! second-order calculus.
//!
//! Every variant is normalized to `g(y) = Σ_j max_i (⟨a_ji, y⟩ + β_ji) + δ_P(y)`.
//! Near a point `y ∈ dom g` the function agrees with `g(y) + dg(y)(· − y)`,
//! where `dg(y)` keeps only the active affine pieces and the rows of `P`
//! active at `y`. All second-order objects follow from that local form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::set::{PolyCone, Polyhedron};
use crate::error::{check_dim, Error, Result};
use crate::ext::ExtReal;
use crate::linalg::{self, EPS_FEAS};
use crate::lpsolve::{LpOutcome, LpProblem, Sense, VRep};

pub const MAX_SUBDIFF_VERTICES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolyhedralFn {
    Indicator { set: Polyhedron },
    MaxAffine { a: Vec<Vec<f64>>, beta: Vec<f64> },
    L1 { dim: usize },
    LInf { dim: usize },
    Affine { a: Vec<f64>, beta: f64 },
    Sum { terms: Vec<PolyhedralFn> },
}

/// One `max_i (⟨a_i, y⟩ + β_i)` term.
#[derive(Clone, Debug, PartialEq)]
struct Piece {
    a: Vec<Vec<f64>>,
    beta: Vec<f64>,
}

impl Piece {
    fn values(&self, y: &[f64]) -> Vec<f64> {
        self.a.iter().zip(&self.beta).map(|(a, b)| linalg::dot(a, y) + b).collect()
    }

    fn active(&self, y: &[f64]) -> Vec<usize> {
        let v = self.values(y);
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = EPS_FEAS * (1.0 + m.abs());
        (0..v.len()).filter(|&i| v[i] >= m - tol).collect()
    }
}

#[derive(Clone, Debug)]
struct Canon {
    pieces: Vec<Piece>,
    dom: Polyhedron,
}

/// Local first-order model of `g` at a point: `dg(y)(u) = Σ_j max_{i∈act_j} ⟨a_ji,u⟩ + δ_T(u)`.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub slopes: Vec<Vec<Vec<f64>>>,
    pub tangent: PolyCone,
}

impl LocalModel {
    pub fn eval(&self, u: &[f64]) -> ExtReal {
        if !self.tangent.contains(u) {
            return ExtReal::PosInf;
        }
        ExtReal::Finite(
            self.slopes
                .iter()
                .map(|s| s.iter().map(|a| linalg::dot(a, u)).fold(f64::NEG_INFINITY, f64::max))
                .sum(),
        )
    }

    /// Subderivative of this piecewise-linear function at `u`; tangent rows
    /// count as active when `|⟨a,u⟩| ≤ ε_feas·max(1,‖u‖)`.
    pub fn at(&self, u: &[f64]) -> LocalModel {
        let tol = EPS_FEAS * linalg::norm(u).max(1.0);
        let slopes = self
            .slopes
            .iter()
            .map(|s| {
                let vals: Vec<f64> = s.iter().map(|a| linalg::dot(a, u)).collect();
                let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                s.iter()
                    .zip(&vals)
                    .filter(|(_, &v)| v >= m - tol)
                    .map(|(a, _)| a.clone())
                    .collect()
            })
            .collect();
        let mut tangent = PolyCone::universe(self.tangent.dim());
        for i in 0..self.tangent.poly.n_rows() {
            let r = &self.tangent.poly.a[i];
            if self.tangent.poly.eq[i] {
                tangent.push_eq(r.clone());
            } else if linalg::dot(r, u).abs() <= tol {
                tangent.push_le(r.clone());
            }
        }
        LocalModel { slopes, tangent }
    }

    /// `sup_z ⟨v,z⟩ − self(z)`: 0 or `+∞` for this sublinear function.
    fn conjugate_at(&self, v: &[f64]) -> Result<ExtReal> {
        let m = v.len();
        let k = self.slopes.len();
        let mut c = v.to_vec();
        c.extend(std::iter::repeat(-1.0).take(k));
        let mut lp = LpProblem::new(m + k, Sense::Max).objective(&c);
        for (j, s) in self.slopes.iter().enumerate() {
            for a in s {
                let mut row = a.clone();
                row.extend(std::iter::repeat(0.0).take(k));
                row[m + j] = -1.0;
                lp.push_le(row, 0.0);
            }
        }
        for i in 0..self.tangent.poly.n_rows() {
            let mut row = self.tangent.poly.a[i].clone();
            row.extend(std::iter::repeat(0.0).take(k));
            if self.tangent.poly.eq[i] {
                lp.push_eq(row, 0.0);
            } else {
                lp.push_le(row, 0.0);
            }
        }
        // a homogeneous LP is either 0 at the origin or unbounded
        match lp.solve()? {
            LpOutcome::Optimal { .. } => Ok(ExtReal::Finite(0.0)),
            LpOutcome::Unbounded { .. } => Ok(ExtReal::PosInf),
            LpOutcome::Infeasible { .. } => Err(Error::HypothesisViolated("homogeneous LP infeasible".into())),
        }
    }
}

/// Both sides of the duality between the parabolic and second
/// subderivatives: conjugate of the former versus minus the latter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugateCheck {
    pub lhs: ExtReal,
    pub rhs: ExtReal,
}

impl PolyhedralFn {
    pub fn indicator(set: Polyhedron) -> Self {
        PolyhedralFn::Indicator { set }
    }

    /// `δ_{ℝᵐ₋}`.
    pub fn nonpositive_orthant(dim: usize) -> Self {
        PolyhedralFn::Indicator {
            set: Polyhedron::orthant(dim, 1.0),
        }
    }

    pub fn zero(dim: usize) -> Self {
        PolyhedralFn::Affine {
            a: vec![0.0; dim],
            beta: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PolyhedralFn::Indicator { set } => set.dim,
            PolyhedralFn::MaxAffine { a, .. } => a.first().map_or(0, |r| r.len()),
            PolyhedralFn::L1 { dim } | PolyhedralFn::LInf { dim } => *dim,
            PolyhedralFn::Affine { a, .. } => a.len(),
            PolyhedralFn::Sum { terms } => terms.first().map_or(0, |t| t.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolyhedralFn::MaxAffine { a, beta } => {
                if a.is_empty() || a.len() != beta.len() {
                    return Err(Error::InvalidArgument("max_affine needs matching nonempty a/beta".into()));
                }
                let d = a[0].len();
                if a.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidArgument("max_affine rows differ in length".into()));
                }
            }
            PolyhedralFn::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidArgument("empty sum".into()));
                }
                let d = terms[0].dim();
                for t in terms {
                    t.validate()?;
                    check_dim(d, t.dim(), "sum term dimension")?;
                }
            }
            PolyhedralFn::Indicator { set } => {
                if set.a.iter().any(|r| r.len() != set.dim) {
                    return Err(Error::InvalidArgument("indicator rows differ in length".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Lipschitz constant relative to the domain.
    pub fn lipschitz(&self) -> f64 {
        match self {
            PolyhedralFn::Indicator { .. } => 0.0,
            PolyhedralFn::MaxAffine { a, .. } => a.iter().map(|r| linalg::norm(r)).fold(0.0, f64::max),
            PolyhedralFn::L1 { dim } => (*dim as f64).sqrt(),
            PolyhedralFn::LInf { .. } => 1.0,
            PolyhedralFn::Affine { a, .. } => linalg::norm(a),
            PolyhedralFn::Sum { terms } => terms.iter().map(|t| t.lipschitz()).sum(),
        }
    }

    fn canon(&self) -> Canon {
        let m = self.dim();
        let unit = |i: usize, s: f64| {
            let mut e = vec![0.0; m];
            e[i] = s;
            e
        };
        match self {
            PolyhedralFn::Indicator { set } => Canon {
                pieces: vec![],
                dom: set.clone(),
            },
            PolyhedralFn::MaxAffine { a, beta } => Canon {
                pieces: vec![Piece {
                    a: a.clone(),
                    beta: beta.clone(),
                }],
                dom: Polyhedron::universe(m),
            },
            PolyhedralFn::L1 { .. } => Canon {
                pieces: (0..m)
                    .map(|i| Piece {
                        a: vec![unit(i, 1.0), unit(i, -1.0)],
                        beta: vec![0.0, 0.0],
                    })
                    .collect(),
                dom: Polyhedron::universe(m),
            },
            PolyhedralFn::LInf { .. } => Canon {
                pieces: vec![Piece {
                    a: (0..m).flat_map(|i| [unit(i, 1.0), unit(i, -1.0)]).collect(),
                    beta: vec![0.0; 2 * m],
                }],
                dom: Polyhedron::universe(m),
            },
            PolyhedralFn::Affine { a, beta } => Canon {
                pieces: vec![Piece {
                    a: vec![a.clone()],
                    beta: vec![*beta],
                }],
                dom: Polyhedron::universe(m),
            },
            PolyhedralFn::Sum { terms } => {
                let mut pieces = vec![];
                let mut dom = Polyhedron::universe(m);
                for t in terms {
                    let c = t.canon();
                    pieces.extend(c.pieces);
                    dom = dom.intersect(&c.dom);
                }
                Canon { pieces, dom }
            }
        }
    }

    /// Number of max-terms in the normalized form.
    pub fn n_pieces(&self) -> usize {
        self.canon().pieces.len()
    }

    pub fn domain(&self) -> Polyhedron {
        self.canon().dom
    }

    pub fn eval(&self, y: &[f64]) -> ExtReal {
        let c = self.canon();
        if !c.dom.contains_strict(y) {
            return ExtReal::PosInf;
        }
        ExtReal::Finite(
            c.pieces
                .iter()
                .map(|p| p.values(y).into_iter().fold(f64::NEG_INFINITY, f64::max))
                .sum(),
        )
    }

    fn require_domain(&self, y: &[f64]) -> Result<Canon> {
        check_dim(self.dim(), y.len(), "polyhedral function argument")?;
        let c = self.canon();
        if !c.dom.contains(y) {
            return Err(Error::NotInDomain(format!("y violates dom g by {:e}", c.dom.violation(y))));
        }
        Ok(c)
    }

    /// Local model `dg(y)(·)`.
    pub fn local_model(&self, y: &[f64]) -> Result<LocalModel> {
        let c = self.require_domain(y)?;
        let slopes = c
            .pieces
            .iter()
            .map(|p| p.active(y).into_iter().map(|i| p.a[i].clone()).collect())
            .collect();
        Ok(LocalModel {
            slopes,
            tangent: c.dom.tangent_cone(y)?,
        })
    }

    /// Generators of `∂g(y) = Σ_j conv{a_ji : i active} + N_dom(y)`.
    pub fn subdifferential_generators(&self, y: &[f64]) -> Result<VRep> {
        let lm = self.local_model(y)?;
        let m = self.dim();
        let mut vertices: Vec<Vec<f64>> = vec![vec![0.0; m]];
        for s in &lm.slopes {
            if vertices.len() * s.len() > MAX_SUBDIFF_VERTICES {
                return Err(Error::Overflow("too many subdifferential vertices".into()));
            }
            vertices = vertices
                .iter()
                .flat_map(|v| s.iter().map(move |a| v.iter().zip(a).map(|(x, y)| x + y).collect::<Vec<f64>>()))
                .collect();
        }
        let mut rays = vec![];
        let mut lines = vec![];
        for i in 0..lm.tangent.poly.n_rows() {
            let r = lm.tangent.poly.a[i].clone();
            if lm.tangent.poly.eq[i] {
                lines.push(r);
            } else {
                rays.push(r);
            }
        }
        Ok(VRep { vertices, rays, lines })
    }

    /// H-representation of `∂g(y)`.
    pub fn subdifferential(&self, y: &[f64]) -> Result<Polyhedron> {
        let v = self.subdifferential_generators(y)?;
        Ok(Polyhedron::from_generators(self.dim(), &v)?)
    }

    /// Membership `v ∈ ∂g(y)` decided by a feasibility LP on the generators.
    pub fn is_subgradient(&self, y: &[f64], v: &[f64]) -> Result<bool> {
        check_dim(self.dim(), v.len(), "subgradient")?;
        let lm = self.local_model(y)?;
        let m = self.dim();
        // variables: λ for every active slope, μ ≥ 0 for cone rows, ν free for equalities
        let mut cols: Vec<(Vec<f64>, bool)> = vec![];
        let mut groups: Vec<(usize, usize)> = vec![];
        for s in &lm.slopes {
            let start = cols.len();
            for a in s {
                cols.push((a.clone(), true));
            }
            groups.push((start, cols.len()));
        }
        for i in 0..lm.tangent.poly.n_rows() {
            cols.push((lm.tangent.poly.a[i].clone(), !lm.tangent.poly.eq[i]));
        }
        let nv = cols.len();
        if nv == 0 {
            return Ok(v.iter().all(|x| x.abs() <= EPS_FEAS));
        }
        let mut lp = LpProblem::new(nv, Sense::Min);
        lp.nonneg = cols.iter().map(|(_, nn)| *nn).collect();
        for k in 0..m {
            lp.push_eq(cols.iter().map(|(c, _)| c[k]).collect(), v[k]);
        }
        for (s, e) in groups {
            let mut row = vec![0.0; nv];
            for r in row.iter_mut().take(e).skip(s) {
                *r = 1.0;
            }
            lp.push_eq(row, 1.0);
        }
        Ok(!lp.solve()?.is_infeasible())
    }

    /// `dg(y)(u)`.
    pub fn subderivative(&self, y: &[f64], u: &[f64]) -> Result<ExtReal> {
        check_dim(self.dim(), u.len(), "direction")?;
        Ok(self.local_model(y)?.eval(u))
    }

    /// `d²g(y|v)(u)`: 0 on the critical cone `{u : dg(y)(u) = ⟨v,u⟩}`, `+∞` off it.
    pub fn second_subderivative(&self, y: &[f64], v: &[f64], u: &[f64]) -> Result<ExtReal> {
        if !self.is_subgradient(y, v)? {
            return Err(Error::NotSubgradient("v is not in ∂g(y)".into()));
        }
        let d = self.subderivative(y, u)?;
        Ok(match d {
            ExtReal::Finite(val) => {
                let lin = linalg::dot(v, u);
                let tol = 1e-9 * (1.0 + val.abs().max(lin.abs()));
                if (val - lin).abs() <= tol {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            ExtReal::PosInf => ExtReal::PosInf,
        })
    }

    /// `d²g(y)(u|z)`, the subderivative of `dg(y)` at `u` in direction `z`.
    pub fn parabolic_subderivative(&self, y: &[f64], u: &[f64], z: &[f64]) -> Result<ExtReal> {
        check_dim(self.dim(), z.len(), "parabolic direction")?;
        let lm = self.local_model(y)?;
        if lm.eval(u).is_infinite() {
            return Err(Error::NotTangent("dg(y)(u) = +inf".into()));
        }
        Ok(lm.at(u).eval(z))
    }

    /// Polyhedral set `{z : d²g(y)(u|z) < ∞}` together with the local model
    /// at `u` (used by the chain-rule LPs).
    pub fn parabolic_model(&self, y: &[f64], u: &[f64]) -> Result<LocalModel> {
        let lm = self.local_model(y)?;
        if lm.eval(u).is_infinite() {
            return Err(Error::NotTangent("dg(y)(u) = +inf".into()));
        }
        Ok(lm.at(u))
    }

    /// Conjugate of `d²g(y)(u|·)` at `v` against `−d²g(y|v)(u)` restricted to
    /// `A(y,u) = {v ∈ ∂g(y) : dg(y)(u) = ⟨v,u⟩}`.
    pub fn parabolic_conjugate_check(&self, y: &[f64], u: &[f64], v: &[f64]) -> Result<ConjugateCheck> {
        let lm = self.local_model(y)?;
        let du = lm.eval(u);
        let ExtReal::Finite(du) = du else {
            return Err(Error::NotTangent("dg(y)(u) = +inf".into()));
        };
        let lhs = lm.at(u).conjugate_at(v)?;
        let lin = linalg::dot(v, u);
        let in_a = self.is_subgradient(y, v)? && (du - lin).abs() <= 1e-9 * (1.0 + du.abs());
        let rhs = if in_a {
            self.second_subderivative(y, v, u)?.scale(-1.0)?
        } else {
            ExtReal::PosInf
        };
        Ok(ConjugateCheck { lhs, rhs })
    }

    /// Fenchel conjugate `g*(v) = sup_y ⟨v,y⟩ − g(y)`.
    pub fn conjugate(&self, v: &[f64]) -> Result<ExtReal> {
        check_dim(self.dim(), v.len(), "conjugate argument")?;
        let tol = 1e-9;
        match self {
            PolyhedralFn::L1 { .. } => Ok(if v.iter().all(|x| x.abs() <= 1.0 + tol) {
                ExtReal::Finite(0.0)
            } else {
                ExtReal::PosInf
            }),
            PolyhedralFn::LInf { .. } => Ok(if v.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 + tol {
                ExtReal::Finite(0.0)
            } else {
                ExtReal::PosInf
            }),
            PolyhedralFn::Affine { a, beta } => Ok(if a.iter().zip(v).all(|(x, y)| (x - y).abs() <= tol) {
                ExtReal::Finite(-beta)
            } else {
                ExtReal::PosInf
            }),
            _ => self.conjugate_lp(v),
        }
    }

    /// LP evaluation of the conjugate, valid for every variant.
    pub fn conjugate_lp(&self, v: &[f64]) -> Result<ExtReal> {
        let c = self.canon();
        let m = self.dim();
        let k = c.pieces.len();
        let mut obj = v.to_vec();
        obj.extend(std::iter::repeat(-1.0).take(k));
        let mut lp = LpProblem::new(m + k, Sense::Max).objective(&obj);
        for (j, p) in c.pieces.iter().enumerate() {
            for (a, b) in p.a.iter().zip(&p.beta) {
                let mut row = a.clone();
                row.extend(std::iter::repeat(0.0).take(k));
                row[m + j] = -1.0;
                lp.push_le(row, -b);
            }
        }
        for i in 0..c.dom.n_rows() {
            let mut row = c.dom.a[i].clone();
            row.extend(std::iter::repeat(0.0).take(k));
            if c.dom.eq[i] {
                lp.push_eq(row, c.dom.b[i]);
            } else {
                lp.push_le(row, c.dom.b[i]);
            }
        }
        match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Ok(ExtReal::Finite(value)),
            LpOutcome::Unbounded { .. } => Ok(ExtReal::PosInf),
            LpOutcome::Infeasible { .. } => Err(Error::NotInDomain("dom g is empty".into())),
        }
    }
}

/// `g` known only through evaluations; usable by the estimators.
#[derive(Clone)]
pub struct BlackBoxFn {
    pub dim: usize,
    pub name: String,
    f: Arc<dyn Fn(&[f64]) -> ExtReal + Send + Sync>,
}

impl BlackBoxFn {
    pub fn new(dim: usize, name: impl Into<String>, f: impl Fn(&[f64]) -> ExtReal + Send + Sync + 'static) -> Self {
        BlackBoxFn {
            dim,
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, y: &[f64]) -> ExtReal {
        (self.f)(y)
    }
}

impl fmt::Debug for BlackBoxFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlackBoxFn({}, dim={})", self.name, self.dim)
    }
}
