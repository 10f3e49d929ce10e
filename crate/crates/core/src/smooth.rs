//! Smooth scalar oracles `φ, F_k : ℝⁿ → ℝ` and vector maps built from them.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;
use crate::linalg::{self, Mat, Vector};

type ScalarFnBox = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;
type VectorFnBox = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
type MatrixFnBox = Arc<dyn Fn(&[f64]) -> Result<Mat> + Send + Sync>;

/// Relative finite-difference steps: `h = rel · max(1, ‖x‖)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdSteps {
    pub grad_rel: f64,
    pub hess_rel: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            grad_rel: 1e-6,
            hess_rel: 1e-4,
        }
    }
}

#[derive(Clone)]
enum Source {
    Expr {
        f: Expr,
        grad: Option<Vec<Expr>>,
        hess: Option<Vec<Vec<Expr>>>,
    },
    Closure {
        f: ScalarFnBox,
        grad: Option<VectorFnBox>,
        hess: Option<MatrixFnBox>,
    },
}

/// A scalar function with optional exact derivatives. Missing derivatives
/// fall back to central differences.
#[derive(Clone)]
pub struct SmoothOracle {
    pub dim_in: usize,
    source: Source,
    /// The Hessian at the base point holds only in the extended sense.
    pub extended: bool,
    pub fd: FdSteps,
    pub label: String,
}

impl fmt::Debug for SmoothOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothOracle({}, n={})", self.label, self.dim_in)
    }
}

impl SmoothOracle {
    /// Oracle from an expression with symbolic first and second derivatives.
    /// Derivatives that cannot be formed symbolically fall back to finite differences.
    pub fn from_expr(f: Expr, dim_in: usize) -> Result<Self> {
        if f.arity() > dim_in {
            return Err(Error::InvalidArgument(format!(
                "expression {f} uses x{} but n = {dim_in}",
                f.arity() - 1
            )));
        }
        let grad = f.gradient(dim_in).ok();
        let hess = grad
            .as_ref()
            .and_then(|g| g.iter().map(|gi| gi.gradient(dim_in)).collect::<std::result::Result<Vec<_>, _>>().ok());
        let label = f.to_string();
        Ok(SmoothOracle {
            dim_in,
            source: Source::Expr { f, grad, hess },
            extended: false,
            fd: FdSteps::default(),
            label,
        })
    }

    pub fn parse(src: &str, dim_in: usize) -> Result<Self> {
        Self::from_expr(Expr::parse(src)?, dim_in)
    }

    pub fn from_closure(
        dim_in: usize,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothOracle {
            dim_in,
            source: Source::Closure {
                f: Arc::new(f),
                grad: None,
                hess: None,
            },
            extended: false,
            fd: FdSteps::default(),
            label: label.into(),
        }
    }

    pub fn with_grad(mut self, g: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static) -> Self {
        if let Source::Closure { grad, .. } = &mut self.source {
            *grad = Some(Arc::new(g));
        }
        self
    }

    pub fn with_hess(mut self, h: impl Fn(&[f64]) -> Result<Mat> + Send + Sync + 'static) -> Self {
        if let Source::Closure { hess, .. } = &mut self.source {
            *hess = Some(Arc::new(h));
        }
        self
    }

    pub fn with_extended(mut self, flag: bool) -> Self {
        self.extended = flag;
        self
    }

    pub fn with_fd(mut self, fd: FdSteps) -> Self {
        self.fd = fd;
        self
    }

    /// Strips exact derivatives so that finite differences are used.
    pub fn without_derivatives(mut self) -> Self {
        match &mut self.source {
            Source::Expr { grad, hess, .. } => {
                *grad = None;
                *hess = None;
            }
            Source::Closure { grad, hess, .. } => {
                *grad = None;
                *hess = None;
            }
        }
        self
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.source {
            Source::Expr { f, .. } => Some(f),
            Source::Closure { .. } => None,
        }
    }

    pub fn has_grad(&self) -> bool {
        match &self.source {
            Source::Expr { grad, .. } => grad.is_some(),
            Source::Closure { grad, .. } => grad.is_some(),
        }
    }

    pub fn has_hess(&self) -> bool {
        match &self.source {
            Source::Expr { hess, .. } => hess.is_some(),
            Source::Closure { hess, .. } => hess.is_some(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim_in, x.len(), "oracle input")?;
        match &self.source {
            Source::Expr { f, .. } => Ok(f.eval(x)?),
            Source::Closure { f, .. } => f(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vector> {
        check_dim(self.dim_in, x.len(), "oracle input")?;
        match &self.source {
            Source::Expr { grad: Some(g), .. } => {
                let v: std::result::Result<Vec<f64>, _> = g.iter().map(|e| e.eval(x)).collect();
                Ok(Vector::from_vec(v?))
            }
            Source::Closure { grad: Some(g), .. } => Ok(Vector::from_vec(g(x)?)),
            _ => self.fd_grad(x),
        }
    }

    /// Central-difference gradient with step `grad_rel · max(1, ‖x‖)`.
    pub fn fd_grad(&self, x: &[f64]) -> Result<Vector> {
        let h = self.fd.grad_rel * linalg::norm(x).max(1.0);
        let mut g = Vector::zeros(self.dim_in);
        let mut xp = x.to_vec();
        for i in 0..self.dim_in {
            xp[i] = x[i] + h;
            let fp = self.eval(&xp)?;
            xp[i] = x[i] - h;
            let fm = self.eval(&xp)?;
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }

    /// Symmetrized Hessian.
    pub fn hess(&self, x: &[f64]) -> Result<Mat> {
        check_dim(self.dim_in, x.len(), "oracle input")?;
        let n = self.dim_in;
        let h = match &self.source {
            Source::Expr { hess: Some(hs), .. } => {
                let mut m = Mat::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = hs[i][j].eval(x)?;
                    }
                }
                m
            }
            Source::Closure { hess: Some(h), .. } => {
                let m = h(x)?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.nrows(),
                        context: "Hessian size",
                    });
                }
                m
            }
            _ => {
                let step = self.fd.hess_rel * linalg::norm(x).max(1.0);
                let mut m = Mat::zeros(n, n);
                let mut xp = x.to_vec();
                for j in 0..n {
                    xp[j] = x[j] + step;
                    let gp = self.grad(&xp)?;
                    xp[j] = x[j] - step;
                    let gm = self.grad(&xp)?;
                    xp[j] = x[j];
                    m.set_column(j, &((gp - gm) / (2.0 * step)));
                }
                m
            }
        };
        Ok(linalg::symmetrize(&h))
    }
}

/// `F = (F_1, …, F_m) : ℝⁿ → ℝᵐ`.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    pub dim_in: usize,
    pub components: Vec<SmoothOracle>,
}

impl SmoothMap {
    pub fn new(dim_in: usize, components: Vec<SmoothOracle>) -> Result<Self> {
        for c in &components {
            check_dim(dim_in, c.dim_in, "map component input dimension")?;
        }
        Ok(SmoothMap { dim_in, components })
    }

    pub fn identity(n: usize) -> Self {
        let comps = (0..n)
            .map(|i| SmoothOracle::from_expr(Expr::Var(i), n).expect("identity component"))
            .collect();
        SmoothMap {
            dim_in: n,
            components: comps,
        }
    }

    pub fn parse(srcs: &[&str], dim_in: usize) -> Result<Self> {
        let comps = srcs.iter().map(|s| SmoothOracle::parse(s, dim_in)).collect::<Result<Vec<_>>>()?;
        SmoothMap::new(dim_in, comps)
    }

    pub fn dim_out(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// `m × n` Jacobian.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        let mut j = Mat::zeros(self.dim_out(), self.dim_in);
        for (k, c) in self.components.iter().enumerate() {
            j.set_row(k, &c.grad(x)?.transpose());
        }
        Ok(j)
    }

    pub fn hessians(&self, x: &[f64]) -> Result<Vec<Mat>> {
        self.components.iter().map(|c| c.hess(x)).collect()
    }
}

/// `∇²F(x)(w,w)`: the vector of `⟨∇²F_k(x)w, w⟩`.
pub fn second_form(hessians: &[Mat], w: &Vector) -> Vector {
    Vector::from_iterator(hessians.len(), hessians.iter().map(|h| (w.transpose() * h * w)[0]))
}

/// `‖∇o(x) − ∇o(x̄) − A(x − x̄)‖ / ‖x − x̄‖` at every sample.
pub fn extended_hessian_residual(o: &SmoothOracle, x_bar: &[f64], a: &Mat, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_dim(o.dim_in, x_bar.len(), "base point")?;
    let gbar = o
        .grad(x_bar)
        .map_err(|e| Error::GradientUnavailable(format!("at base point: {e}")))?;
    extended_hessian_residual_from(o, x_bar, gbar.as_slice(), a, samples)
}

/// Same as [`extended_hessian_residual`] with a caller-supplied candidate
/// gradient at the base point (for functions not differentiable there).
pub fn extended_hessian_residual_from(
    o: &SmoothOracle,
    x_bar: &[f64],
    grad_bar: &[f64],
    a: &Mat,
    samples: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_dim(o.dim_in, grad_bar.len(), "base gradient")?;
    let gbar = linalg::vec_from(grad_bar);
    let xb = linalg::vec_from(x_bar);
    samples
        .iter()
        .map(|x| {
            check_dim(o.dim_in, x.len(), "sample")?;
            let d = linalg::vec_from(x) - &xb;
            let nd = d.norm();
            if nd == 0.0 {
                return Err(Error::InvalidArgument("sample equals the base point".into()));
            }
            let g = o
                .grad(x)
                .map_err(|e| Error::GradientUnavailable(format!("at {x:?}: {e}")))?;
            Ok((g - &gbar - a * d).norm() / nd)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_residual_is_zero() {
        let o = SmoothOracle::parse("0.5*x^2", 1).unwrap();
        let r = extended_hessian_residual(&o, &[0.0], &Mat::identity(1, 1), &[vec![0.1], vec![0.01]]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn abs_refutes_extended_hessian() {
        let o = SmoothOracle::parse("abs(x)", 1).unwrap();
        assert!(matches!(
            extended_hessian_residual(&o, &[0.0], &Mat::zeros(1, 1), &[vec![0.1]]),
            Err(Error::GradientUnavailable(_))
        ));
        let samples: Vec<Vec<f64>> = (1..8).flat_map(|k| [vec![10f64.powi(-k)], vec![-10f64.powi(-k)]]).collect();
        for g0 in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            for a in [-10.0, 0.0, 3.0] {
                let r = extended_hessian_residual_from(&o, &[0.0], &[g0], &Mat::from_element(1, 1, a), &samples).unwrap();
                // the worse side of each ±s pair stays ≥ 1 once s is small
                for pair in r.chunks(2).skip(2) {
                    assert!(pair[0].max(pair[1]) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn sample_equal_to_base_rejected() {
        let o = SmoothOracle::parse("x^2", 1).unwrap();
        assert!(extended_hessian_residual(&o, &[0.0], &Mat::zeros(1, 1), &[vec![0.0]]).is_err());
    }

    #[test]
    fn fd_fallback_matches_symbolic() {
        let o = SmoothOracle::parse("sin(x0)*x1 + x1^3", 2).unwrap();
        let fd = o.clone().without_derivatives();
        let x = [0.3, -0.7];
        let (g1, g2) = (o.grad(&x).unwrap(), fd.grad(&x).unwrap());
        assert!((g1 - g2).norm() < 1e-8);
        let (h1, h2) = (o.hess(&x).unwrap(), fd.hess(&x).unwrap());
        assert!((h1 - &h2).norm() < 1e-6);
        assert_eq!(h2, h2.transpose());
    }

    #[test]
    fn closure_hessian_is_symmetrized() {
        let o = SmoothOracle::from_closure(2, "skew", |x| Ok(x[0] * x[1]))
            .with_hess(|_| Ok(linalg::mat_from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]], 2)));
        let h = o.hess(&[0.0, 0.0]).unwrap();
        assert_eq!(h, h.transpose());
        assert_eq!(h[(0, 1)], 1.0);
    }
}
