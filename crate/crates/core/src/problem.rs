//! The composite model `f = φ + g∘F` around a base point.

use crate::error::{check_dim, Error, Result};
use crate::ext::ExtReal;
use crate::linalg::{self, Mat, Vector};
use crate::lpsolve::VRep;
use crate::polyhedral::{BlackBoxFn, PolyhedralFn, Polyhedron};
use crate::smooth::{SmoothMap, SmoothOracle};

#[derive(Clone, Debug)]
pub enum Outer {
    Polyhedral(PolyhedralFn),
    BlackBox(BlackBoxFn),
}

impl Outer {
    pub fn dim(&self) -> usize {
        match self {
            Outer::Polyhedral(g) => g.dim(),
            Outer::BlackBox(g) => g.dim,
        }
    }

    pub fn eval(&self, y: &[f64]) -> ExtReal {
        match self {
            Outer::Polyhedral(g) => g.eval(y),
            Outer::BlackBox(g) => g.eval(y),
        }
    }

    pub fn polyhedral(&self) -> Option<&PolyhedralFn> {
        match self {
            Outer::Polyhedral(g) => Some(g),
            Outer::BlackBox(_) => None,
        }
    }
}

/// `f(x) = φ(x) + g(F(x))` with base point `x̄` and a subgradient `v̄` of `f`
/// at `x̄` (zero for stationarity analyses).
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub phi: Option<SmoothOracle>,
    pub map: SmoothMap,
    pub g: Outer,
    pub x_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
}

/// First- and second-order data at `x̄`.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub f_val: Vec<f64>,
    pub jac: Mat,
    pub hessians: Vec<Mat>,
    pub grad_phi: Vector,
    pub hess_phi: Mat,
}

impl CompositeProblem {
    pub fn new(phi: Option<SmoothOracle>, map: SmoothMap, g: Outer, x_bar: Vec<f64>) -> Result<Self> {
        let n = map.dim_in;
        let v_bar = vec![0.0; n];
        Self::with_subgradient(phi, map, g, x_bar, v_bar)
    }

    pub fn with_subgradient(
        phi: Option<SmoothOracle>,
        map: SmoothMap,
        g: Outer,
        x_bar: Vec<f64>,
        v_bar: Vec<f64>,
    ) -> Result<Self> {
        let n = map.dim_in;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if let Some(p) = &phi {
            check_dim(n, p.dim_in, "phi input dimension")?;
        }
        check_dim(map.dim_out(), g.dim(), "g domain dimension")?;
        check_dim(n, x_bar.len(), "x_bar")?;
        check_dim(n, v_bar.len(), "v_bar")?;
        if let Outer::Polyhedral(pg) = &g {
            pg.validate()?;
        }
        let p = CompositeProblem {
            phi,
            map,
            g,
            x_bar,
            v_bar,
        };
        let fx = p.map.eval(&p.x_bar)?;
        if p.g.eval(&fx).is_infinite() {
            return Err(Error::NotInDomain("g(F(x_bar)) = +inf".into()));
        }
        if let Some(phi) = &p.phi {
            phi.eval(&p.x_bar)?;
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.map.dim_in
    }

    pub fn m(&self) -> usize {
        self.map.dim_out()
    }

    pub fn g_poly(&self) -> Result<&PolyhedralFn> {
        self.g
            .polyhedral()
            .ok_or_else(|| Error::InvalidArgument("operation needs a polyhedral g".into()))
    }

    pub fn phi_val(&self, x: &[f64]) -> Result<f64> {
        match &self.phi {
            Some(p) => p.eval(x),
            None => Ok(0.0),
        }
    }

    pub fn phi_grad(&self, x: &[f64]) -> Result<Vector> {
        match &self.phi {
            Some(p) => p.grad(x),
            None => Ok(Vector::zeros(self.n())),
        }
    }

    pub fn phi_hess(&self, x: &[f64]) -> Result<Mat> {
        match &self.phi {
            Some(p) => p.hess(x),
            None => Ok(Mat::zeros(self.n(), self.n())),
        }
    }

    /// `f(x) = φ(x) + g(F(x))`.
    pub fn eval_f(&self, x: &[f64]) -> Result<ExtReal> {
        check_dim(self.n(), x.len(), "eval_f point")?;
        let fx = self.map.eval(x)?;
        let gv = self.g.eval(&fx);
        if gv.is_infinite() {
            return Ok(ExtReal::PosInf);
        }
        Ok(gv + self.phi_val(x)?)
    }

    pub fn f_bar(&self) -> Result<f64> {
        Ok(self.eval_f(&self.x_bar)?.to_f64())
    }

    pub fn linearize(&self) -> Result<Linearization> {
        let x = &self.x_bar;
        Ok(Linearization {
            f_val: self.map.eval(x)?,
            jac: self.map.jacobian(x)?,
            hessians: self.map.hessians(x)?,
            grad_phi: self.phi_grad(x)?,
            hess_phi: self.phi_hess(x)?,
        })
    }

    /// `v̄ − ∇φ(x̄)`: the subgradient of `ψ = g∘F` paired with `v̄`.
    pub fn psi_v_bar(&self) -> Result<Vector> {
        Ok(linalg::vec_from(&self.v_bar) - self.phi_grad(&self.x_bar)?)
    }

    /// `∇φ(x) + ∇F(x)ᵀ∂g(F(x))` as generators, for polyhedral `g`.
    pub fn subdifferential_generators(&self, x: &[f64]) -> Result<VRep> {
        let g = self.g_poly()?;
        let fx = self.map.eval(x)?;
        let gens = g.subdifferential_generators(&fx)?;
        let jt = self.map.jacobian(x)?.transpose();
        let gp = self.phi_grad(x)?;
        let map = |v: &Vec<f64>| -> Vec<f64> { (&jt * linalg::vec_from(v)).iter().copied().collect() };
        Ok(VRep {
            vertices: gens
                .vertices
                .iter()
                .map(|v| (&jt * linalg::vec_from(v) + &gp).iter().copied().collect())
                .collect(),
            rays: gens.rays.iter().map(map).filter(|r| linalg::norm(r) > 1e-14).collect(),
            lines: gens.lines.iter().map(map).filter(|r| linalg::norm(r) > 1e-14).collect(),
        })
    }

    /// `dist(0, ∂f(x))` under the chain rule; `None` if `x ∉ dom f`.
    pub fn subgradient_distance(&self, x: &[f64]) -> Result<Option<f64>> {
        if self.eval_f(x)?.is_infinite() {
            return Ok(None);
        }
        let gens = self.subdifferential_generators(x)?;
        if gens.rays.is_empty() && gens.lines.is_empty() && gens.vertices.len() == 1 {
            return Ok(Some(linalg::norm(&gens.vertices[0])));
        }
        let poly = Polyhedron::from_generators(self.n(), &gens)?;
        let pr = crate::lpsolve::project_onto_polyhedron(&poly, &vec![0.0; self.n()])?;
        Ok(Some(pr.distance))
    }

    /// Gradient of `f` at a point where `∂f(x)` is a singleton.
    pub fn gradient_if_smooth(&self, x: &[f64]) -> Result<Option<Vector>> {
        if self.eval_f(x)?.is_infinite() {
            return Ok(None);
        }
        let gens = self.subdifferential_generators(x)?;
        if gens.rays.is_empty() && gens.lines.is_empty() && gens.vertices.len() == 1 {
            return Ok(Some(linalg::vec_from(&gens.vertices[0])));
        }
        // a point of non-differentiability of g: several active pieces
        let first = &gens.vertices[0];
        let same = gens
            .vertices
            .iter()
            .all(|v| v.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-12));
        Ok(if same && gens.rays.is_empty() && gens.lines.is_empty() {
            Some(linalg::vec_from(first))
        } else {
            None
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::{Finite, PosInf};

    fn indicator_line() -> CompositeProblem {
        CompositeProblem::new(
            None,
            SmoothMap::identity(1),
            Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(1)),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn eval_indicator() {
        let p = indicator_line();
        assert_eq!(p.eval_f(&[-1.0]).unwrap(), Finite(0.0));
        assert_eq!(p.eval_f(&[1.0]).unwrap(), PosInf);
        assert!(p.eval_f(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn base_point_must_be_in_domain() {
        let r = CompositeProblem::new(
            None,
            SmoothMap::identity(1),
            Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(1)),
            vec![1.0],
        );
        assert!(matches!(r, Err(Error::NotInDomain(_))));
    }

    #[test]
    fn dimension_checks() {
        let r = CompositeProblem::new(
            None,
            SmoothMap::identity(2),
            Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(1)),
            vec![0.0, 0.0],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn subgradient_distance_abs() {
        let p = CompositeProblem::new(None, SmoothMap::identity(1), Outer::Polyhedral(PolyhedralFn::L1 { dim: 1 }), vec![0.0]).unwrap();
        assert_eq!(p.subgradient_distance(&[0.3]).unwrap(), Some(1.0));
        assert_eq!(p.subgradient_distance(&[0.0]).unwrap(), Some(0.0));
        let q = indicator_line();
        assert_eq!(q.subgradient_distance(&[-0.5]).unwrap(), Some(0.0));
        assert_eq!(q.subgradient_distance(&[0.5]).unwrap(), None);
    }
}
