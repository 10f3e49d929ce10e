use crate::error::{check_dim, Result};
use crate::ext::ExtReal;
use crate::linalg::{self, Mat};
use crate::polyhedral::PolyhedralFn;
use crate::problem::CompositeProblem;

/// `L(x,y) = φ(x) + ⟨F(x),y⟩ − g*(y)`.
pub struct Lagrangian<'a> {
    p: &'a CompositeProblem,
    g: &'a PolyhedralFn,
}

impl<'a> Lagrangian<'a> {
    pub fn new(p: &'a CompositeProblem) -> Result<Self> {
        Ok(Lagrangian { p, g: p.g_poly()? })
    }

    /// `None` stands for `−∞` (when `g*(y) = +∞`).
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
        check_dim(self.p.m(), y.len(), "multiplier")?;
        let fx = self.p.map.eval(x)?;
        Ok(match self.g.conjugate(y)? {
            ExtReal::Finite(c) => Some(self.p.phi_val(x)? + linalg::dot(&fx, y) - c),
            ExtReal::PosInf => None,
        })
    }

    /// `∇²ₓₓL(x,y) = ∇²φ(x) + Σ_k y_k ∇²F_k(x)`, symmetrized.
    pub fn hess_xx(&self, x: &[f64], y: &[f64]) -> Result<Mat> {
        check_dim(self.p.m(), y.len(), "multiplier")?;
        let mut h = self.p.phi_hess(x)?;
        for (k, hk) in self.p.map.hessians(x)?.iter().enumerate() {
            h += hk * y[k];
        }
        Ok(linalg::symmetrize(&h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Outer;
    use crate::smooth::{second_form, SmoothMap, SmoothOracle};

    #[test]
    fn hessian_identity_on_samples() {
        let phi = SmoothOracle::parse("x0^2 - x0*x1", 2).unwrap();
        let map = SmoothMap::parse(&["x0^2 + x1", "x0*x1 - x1^2"], 2).unwrap();
        let p = CompositeProblem::new(Some(phi), map, Outer::Polyhedral(PolyhedralFn::L1 { dim: 2 }), vec![0.0, 0.0]).unwrap();
        let l = Lagrangian::new(&p).unwrap();
        let hphi = p.phi_hess(&p.x_bar).unwrap();
        let hs = p.map.hessians(&p.x_bar).unwrap();
        for (w, y) in [([1.0, 2.0], [0.5, -1.0]), ([-0.3, 0.7], [1.0, 1.0]), ([2.0, 0.0], [-0.2, 0.9])] {
            let wv = linalg::vec_from(&w);
            let lhs = (wv.transpose() * &hphi * &wv)[0] + linalg::dot(&y, second_form(&hs, &wv).as_slice());
            let hl = l.hess_xx(&p.x_bar, &y).unwrap();
            let rhs = (wv.transpose() * hl * &wv)[0];
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn value_uses_conjugate() {
        let map = SmoothMap::identity(1);
        let p = CompositeProblem::new(None, map, Outer::Polyhedral(PolyhedralFn::L1 { dim: 1 }), vec![0.0]).unwrap();
        let l = Lagrangian::new(&p).unwrap();
        // |·|* is the indicator of [−1, 1]
        assert_eq!(l.value(&[2.0], &[0.5]).unwrap(), Some(1.0));
        assert_eq!(l.value(&[2.0], &[1.5]).unwrap(), None);
    }
}
