//! H-represented polyhedra and polyhedral cones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EPS_FEAS};
use crate::lpsolve::{self, LpError, LpOutcome, LpProblem, Sense, VRep};

/// `{y : A_i y ≤ b_i} ∩ {y : A_j y = b_j for rows flagged eq}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedronFile", into = "PolyhedronFile")]
pub struct Polyhedron {
    pub dim: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub eq: Vec<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyhedronFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    eq: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<PolyhedronFile> for Polyhedron {
    type Error = String;
    fn try_from(f: PolyhedronFile) -> std::result::Result<Self, String> {
        let dim = match (f.dim, f.a.first()) {
            (Some(d), _) => d,
            (None, Some(r)) => r.len(),
            (None, None) => return Err("polyhedron without rows needs \"dim\"".into()),
        };
        if f.a.len() != f.b.len() {
            return Err(format!("A has {} rows but b has {} entries", f.a.len(), f.b.len()));
        }
        if let Some(i) = f.a.iter().position(|r| r.len() != dim) {
            return Err(format!("row {i} of A has length {} (expected {dim})", f.a[i].len()));
        }
        let eq = if f.eq.is_empty() { vec![false; f.a.len()] } else { f.eq };
        if eq.len() != f.a.len() {
            return Err("eq flags must match the number of rows".into());
        }
        Ok(Polyhedron { dim, a: f.a, b: f.b, eq })
    }
}

impl From<Polyhedron> for PolyhedronFile {
    fn from(p: Polyhedron) -> Self {
        let any_eq = p.eq.iter().any(|&e| e);
        PolyhedronFile {
            dim: if p.a.is_empty() { Some(p.dim) } else { None },
            a: p.a,
            b: p.b,
            eq: if any_eq { p.eq } else { vec![] },
        }
    }
}

impl Polyhedron {
    /// The whole space.
    pub fn universe(dim: usize) -> Self {
        Polyhedron { dim, a: vec![], b: vec![], eq: vec![] }
    }

    pub fn from_rows(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len());
        let eq = vec![false; a.len()];
        Polyhedron { dim, a, b, eq }
    }

    /// `{y : y ≤ 0}` (or `≥ 0` with `sign = -1`).
    pub fn orthant(dim: usize, sign: f64) -> Self {
        let rows = (0..dim)
            .map(|i| {
                let mut r = vec![0.0; dim];
                r[i] = sign;
                r
            })
            .collect();
        Polyhedron::from_rows(dim, rows, vec![0.0; dim])
    }

    /// A single point.
    pub fn point(p: &[f64]) -> Self {
        let mut poly = Polyhedron::universe(p.len());
        for i in 0..p.len() {
            let mut r = vec![0.0; p.len()];
            r[i] = 1.0;
            poly.push_eq(r, p[i]);
        }
        poly
    }

    /// Always-empty set.
    pub fn empty(dim: usize) -> Self {
        Polyhedron::from_rows(dim, vec![vec![0.0; dim]], vec![-1.0])
    }

    pub fn push_le(&mut self, row: Vec<f64>, b: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.a.push(row);
        self.b.push(b);
        self.eq.push(false);
    }

    pub fn push_eq(&mut self, row: Vec<f64>, b: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.a.push(row);
        self.b.push(b);
        self.eq.push(true);
    }

    pub fn n_rows(&self) -> usize {
        self.a.len()
    }

    pub fn inequalities(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.filter_rows(false)
    }

    pub fn equalities(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.filter_rows(true)
    }

    fn filter_rows(&self, want_eq: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut a = vec![];
        let mut b = vec![];
        for i in 0..self.a.len() {
            if self.eq[i] == want_eq {
                a.push(self.a[i].clone());
                b.push(self.b[i]);
            }
        }
        (a, b)
    }

    /// Largest row residual (0 inside the set).
    pub fn violation(&self, y: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for i in 0..self.a.len() {
            let r = linalg::dot(&self.a[i], y) - self.b[i];
            v = v.max(if self.eq[i] { r.abs() } else { r });
        }
        v
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.violation(y) <= EPS_FEAS
    }

    /// Membership up to rounding in the row products only. Pointwise function
    /// values use this so that difference quotients at tiny steps stay meaningful.
    pub fn contains_strict(&self, y: &[f64]) -> bool {
        (0..self.a.len()).all(|i| {
            let r = linalg::dot(&self.a[i], y) - self.b[i];
            let scale: f64 = self.a[i].iter().zip(y).map(|(a, v)| (a * v).abs()).sum::<f64>() + self.b[i].abs();
            let tol = 8.0 * f64::EPSILON * scale;
            if self.eq[i] {
                r.abs() <= tol
            } else {
                r <= tol
            }
        })
    }

    /// Inequality rows with `|A_i y − b_i| ≤ tol` (indices into all rows).
    pub fn active_rows(&self, y: &[f64], tol: f64) -> Vec<usize> {
        (0..self.a.len())
            .filter(|&i| !self.eq[i] && (linalg::dot(&self.a[i], y) - self.b[i]).abs() <= tol)
            .collect()
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        assert_eq!(self.dim, other.dim);
        let mut p = self.clone();
        p.a.extend(other.a.iter().cloned());
        p.b.extend(other.b.iter().copied());
        p.eq.extend(other.eq.iter().copied());
        p
    }

    pub fn to_lp(&self, c: &[f64], sense: Sense) -> LpProblem {
        let mut lp = LpProblem::new(self.dim, sense).objective(c);
        for i in 0..self.a.len() {
            if self.eq[i] {
                lp.push_eq(self.a[i].clone(), self.b[i]);
            } else {
                lp.push_le(self.a[i].clone(), self.b[i]);
            }
        }
        lp
    }

    /// A point of the set, or `None` if the phase-1 LP proves it empty.
    pub fn feasible_point(&self) -> std::result::Result<Option<Vec<f64>>, LpError> {
        let out = self.to_lp(&vec![0.0; self.dim], Sense::Min).solve()?;
        Ok(out.point().map(|p| p.to_vec()))
    }

    pub fn is_empty(&self) -> std::result::Result<bool, LpError> {
        Ok(self.feasible_point()?.is_none())
    }

    /// Support function `sup {⟨c,y⟩ : y ∈ P}`; `None` for an empty set.
    pub fn support(&self, c: &[f64]) -> std::result::Result<Option<crate::ext::ExtReal>, LpError> {
        Ok(match self.to_lp(c, Sense::Max).solve()? {
            LpOutcome::Optimal { value, .. } => Some(crate::ext::ExtReal::Finite(value)),
            LpOutcome::Unbounded { .. } => Some(crate::ext::ExtReal::PosInf),
            LpOutcome::Infeasible { .. } => None,
        })
    }

    pub fn vrep(&self) -> std::result::Result<VRep, LpError> {
        lpsolve::vertex_enumerate(self)
    }

    /// H-representation of `conv(vertices) + cone(rays) + span(lines)`,
    /// obtained from the extreme rays of the polar cone.
    pub fn from_generators(dim: usize, v: &VRep) -> std::result::Result<Polyhedron, LpError> {
        if v.vertices.is_empty() {
            return Ok(Polyhedron::empty(dim));
        }
        // polar variables (a, β): ⟨a,v⟩ − β ≤ 0, ⟨a,r⟩ ≤ 0, ⟨a,l⟩ = 0
        let mut polar = Polyhedron::universe(dim + 1);
        for p in &v.vertices {
            let mut r = p.clone();
            r.push(-1.0);
            polar.push_le(r, 0.0);
        }
        for ray in &v.rays {
            let mut r = ray.clone();
            r.push(0.0);
            polar.push_le(r, 0.0);
        }
        for l in &v.lines {
            let mut r = l.clone();
            r.push(0.0);
            polar.push_eq(r, 0.0);
        }
        let gens = lpsolve::vertex_enumerate(&polar)?;
        let mut out = Polyhedron::universe(dim);
        let split = |g: &Vec<f64>| -> Option<(Vec<f64>, f64)> {
            let a = g[..dim].to_vec();
            let na = linalg::norm(&a);
            if na < 1e-10 {
                return None;
            }
            Some((a.iter().map(|x| x / na).collect(), g[dim] / na))
        };
        for g in &gens.rays {
            if let Some((a, b)) = split(g) {
                out.push_le(a, b);
            }
        }
        for g in &gens.lines {
            if let Some((a, b)) = split(g) {
                out.push_eq(a, b);
            }
        }
        Ok(out)
    }

    /// `{M y : y ∈ P}` for an `r × dim` matrix `M`.
    pub fn image(&self, m: &linalg::Mat) -> std::result::Result<Polyhedron, LpError> {
        assert_eq!(m.ncols(), self.dim);
        let v = self.vrep()?;
        let map = |x: &Vec<f64>| -> Vec<f64> { (m * linalg::vec_from(x)).iter().copied().collect() };
        let mapped = VRep {
            vertices: v.vertices.iter().map(map).collect(),
            rays: v.rays.iter().map(map).filter(|r| linalg::norm(r) > 1e-12).collect(),
            lines: v.lines.iter().map(map).filter(|r| linalg::norm(r) > 1e-12).collect(),
        };
        Polyhedron::from_generators(m.nrows(), &mapped)
    }

    /// `T_P(y) = {u : A_i u ≤ 0 for active rows, A_j u = 0 for equalities}`.
    pub fn tangent_cone(&self, y: &[f64]) -> Result<PolyCone> {
        crate::error::check_dim(self.dim, y.len(), "tangent_cone point")?;
        if !self.contains(y) {
            return Err(Error::NotInDomain(format!("point violates polyhedron by {:e}", self.violation(y))));
        }
        let mut c = PolyCone::universe(self.dim);
        for i in 0..self.a.len() {
            if self.eq[i] {
                c.push_eq(self.a[i].clone());
            }
        }
        for i in self.active_rows(y, EPS_FEAS) {
            c.push_le(self.a[i].clone());
        }
        Ok(c)
    }

    /// `T²_P(y, u) = {z : A_i z ≤ 0 for rows active at y with A_i u = 0}`.
    pub fn second_order_tangent_set(&self, y: &[f64], u: &[f64]) -> Result<Polyhedron> {
        let t = self.tangent_cone(y)?;
        crate::error::check_dim(self.dim, u.len(), "second_order_tangent_set direction")?;
        if !t.contains(u) {
            return Err(Error::NotTangent("u is not in the tangent cone".into()));
        }
        let tol = EPS_FEAS * linalg::norm(u).max(1.0);
        let mut s = Polyhedron::universe(self.dim);
        for i in 0..self.a.len() {
            if self.eq[i] {
                s.push_eq(self.a[i].clone(), 0.0);
            }
        }
        for i in self.active_rows(y, EPS_FEAS) {
            if linalg::dot(&self.a[i], u).abs() <= tol {
                s.push_le(self.a[i].clone(), 0.0);
            }
        }
        Ok(s)
    }
}

/// A polyhedral cone `{w : C w ≤ 0, D w = 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCone {
    pub poly: Polyhedron,
}

impl PolyCone {
    pub fn universe(dim: usize) -> Self {
        PolyCone { poly: Polyhedron::universe(dim) }
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        PolyCone { poly: Polyhedron::from_rows(dim, rows, vec![0.0; n]) }
    }

    /// The trivial cone `{0}`.
    pub fn zero(dim: usize) -> Self {
        PolyCone { poly: Polyhedron::point(&vec![0.0; dim]) }
    }

    pub fn dim(&self) -> usize {
        self.poly.dim
    }

    pub fn push_le(&mut self, row: Vec<f64>) {
        self.poly.push_le(row, 0.0);
    }

    pub fn push_eq(&mut self, row: Vec<f64>) {
        self.poly.push_eq(row, 0.0);
    }

    /// Membership with the tolerance scaled by `max(1, ‖w‖)`.
    pub fn contains(&self, w: &[f64]) -> bool {
        self.poly.violation(w) <= EPS_FEAS * linalg::norm(w).max(1.0)
    }

    /// Whether the cone is `{0}`.
    pub fn is_trivial(&self) -> std::result::Result<bool, LpError> {
        let n = self.dim();
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; n];
                c[i] = s;
                let mut lp = self.poly.to_lp(&c, Sense::Max);
                for j in 0..n {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    lp.push_le(e.clone(), 1.0);
                    e[j] = -1.0;
                    lp.push_le(e, 1.0);
                }
                if let LpOutcome::Optimal { value, .. } = lp.solve()? {
                    if value > 1e-9 {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Extreme rays and lineality directions.
    pub fn generators(&self) -> std::result::Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), LpError> {
        let v = self.poly.vrep()?;
        Ok((v.rays, v.lines))
    }

    pub fn intersect(&self, other: &PolyCone) -> PolyCone {
        PolyCone { poly: self.poly.intersect(&other.poly) }
    }
}
