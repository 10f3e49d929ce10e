//! The three worked examples: an extended-twice-differentiable function that is
//! not prox-regular, a twice differentiable one that is not prox-regular either,
//! and a one-dimensional constrained problem with a strong local minimizer.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::quadrature;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::polyhedral::PolyhedralFn;
use crate::problem::{CompositeProblem, Outer};
use crate::smooth::{SmoothMap, SmoothOracle};

/// Pieces `[1/(n+1), 1/n)` with `n > N_MAX` are not resolved; the function is
/// taken to be 0 there. Its true magnitude is below `N_MAX^{-10/3} ≈ 5e-24`.
pub const N_MAX: f64 = 1e7;

fn c_n(n: f64) -> f64 {
    (2.0 * n + 1.0) * (2.0 * n * n + 2.0 * n + 1.0) / (n.powi(3) * (n + 1.0).powi(3))
}

fn d_n(n: f64) -> f64 {
    1.0 / (n + 1.0).powi(3) - 1.0 / n.powi(3)
}

/// Piece index `n` with `x ∈ [1/(n+1), 1/n)` for `0 < x < 1`.
fn piece(x: f64) -> f64 {
    let mut n = (1.0 / x).floor();
    if x < 1.0 / (n + 1.0) {
        n += 1.0;
    }
    if n > 1.0 && x >= 1.0 / n {
        n -= 1.0;
    }
    n.max(1.0)
}

/// True when `x > 0` is within rounding of a breakpoint `1/k` (or of 1).
fn at_breakpoint(x: f64) -> bool {
    if x >= 1.0 {
        return (x - 1.0).abs() <= 4.0 * f64::EPSILON;
    }
    let n = piece(x);
    [n, n + 1.0].iter().any(|&k| (x - 1.0 / k).abs() <= 4.0 * f64::EPSILON * x)
}

/// The piecewise function `g` of the first example, evaluated for `x ≥ 0` and
/// reflected evenly.
pub fn g32(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 || x < 1.0 / N_MAX {
        return 0.0;
    }
    let osc = x.powf(10.0 / 3.0) * (1.0 / x).cos();
    if x >= 1.0 {
        return osc + x.powi(4);
    }
    let n = piece(x);
    osc + c_n(n) * x + d_n(n)
}

/// `∇g`, odd in `x`. Fails exactly at breakpoints `±1/k` where `g` has kinks.
pub fn g32_grad(x: f64) -> Result<f64> {
    let s = x.signum();
    let a = x.abs();
    if a == 0.0 || a < 1.0 / N_MAX {
        return Ok(0.0);
    }
    if at_breakpoint(a) {
        return Err(Error::GradientUnavailable(format!("g is not differentiable at the breakpoint {x}")));
    }
    let osc = (10.0 / 3.0) * a.powf(7.0 / 3.0) * (1.0 / a).cos() + a.powf(4.0 / 3.0) * (1.0 / a).sin();
    let lin = if a > 1.0 { 4.0 * a.powi(3) } else { c_n(piece(a)) };
    Ok(s * (osc + lin))
}

/// Classical second derivative on the open pieces; 0 at the origin, where it is
/// a Hessian only in the extended sense.
pub fn g32_hess(x: f64) -> Result<f64> {
    let a = x.abs();
    if a == 0.0 || a < 1.0 / N_MAX {
        return Ok(0.0);
    }
    if at_breakpoint(a) {
        return Err(Error::GradientUnavailable(format!("g is not differentiable at the breakpoint {x}")));
    }
    let (s, c) = (1.0 / a).sin_cos();
    let mut h = (70.0 / 9.0) * a.powf(4.0 / 3.0) * c + (14.0 / 3.0) * a.powf(1.0 / 3.0) * s - a.powf(-2.0 / 3.0) * c;
    if a > 1.0 {
        h += 12.0 * a * a;
    }
    Ok(h)
}

/// Largest jump of `g` across the breakpoints `1/k`, `k = 1..=k_max`.
pub fn g32_max_jump(k_max: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..=k_max {
        let kf = k as f64;
        let x = 1.0 / kf;
        let osc = x.powf(10.0 / 3.0) * kf.cos();
        // right piece at its left end, left piece extended to its right end
        let right = if k == 1 { osc + 1.0 } else { osc + c_n(kf - 1.0) * x + d_n(kf - 1.0) };
        let left = osc + c_n(kf) * x + d_n(kf);
        worst = worst.max((right - left).abs());
    }
    worst
}

/// The bound `(10/3)x^{4/3} + x^{1/3} + c_n/x` on `|∇g(x)|/|x|` for `0 < |x| < 1`.
pub fn g32_residual_bound(x: f64) -> f64 {
    let a = x.abs();
    (10.0 / 3.0) * a.powf(4.0 / 3.0) + a.powf(1.0 / 3.0) + c_n(piece(a)) / a
}

pub fn g32_oracle() -> SmoothOracle {
    SmoothOracle::from_closure(1, "example_3_2.g", |x| Ok(g32(x[0])))
        .with_grad(|x| Ok(vec![g32_grad(x[0])?]))
        .with_hess(|x| Ok(Mat::from_element(1, 1, g32_hess(x[0])?)))
        .with_extended(true)
}

// ---- second example: f(x) = ∫_0^x t² sin(1/t²) dt ----

/// Below `S_END = K·π` the substituted integral `½∫ sin(s) s^{-5/2} ds` is
/// integrated per π-interval; above it an asymptotic series is used.
const K_INTERVALS: usize = 3184;
const P: f64 = 2.5;
const QUAD_TOL: f64 = 1e-16;

fn s_end() -> f64 {
    K_INTERVALS as f64 * PI
}

fn substituted(s: f64) -> f64 {
    s.sin() * s.powf(-P)
}

/// `∫_S^∞ sin(s) s^{-p} ds` by repeated integration by parts, valid for large `S`.
fn oscillatory_tail(s0: f64, p: f64, depth: u32) -> f64 {
    let (sn, cs) = s0.sin_cos();
    let lead = cs * s0.powf(-p) + p * sn * s0.powf(-p - 1.0);
    if depth == 0 {
        lead
    } else {
        lead - p * (p + 1.0) * oscillatory_tail(s0, p + 2.0, depth - 1)
    }
}

/// `suffix[k] = ∫_{kπ}^{S_END} sin(s) s^{-5/2} ds` for `k = 1..=K`.
fn suffix_table() -> &'static Result<Vec<f64>> {
    static TABLE: OnceLock<Result<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut suffix = vec![0.0; K_INTERVALS + 1];
        for k in (1..K_INTERVALS).rev() {
            let a = k as f64 * PI;
            suffix[k] = suffix[k + 1] + quadrature::integrate(&substituted, a, a + PI, QUAD_TOL)?;
        }
        Ok(suffix)
    })
}

/// `x_c = 1/√π`: for larger `|x|` the integrand in `t` is not oscillatory.
fn x_switch() -> f64 {
    1.0 / PI.sqrt()
}

fn f33_small(x: f64) -> Result<f64> {
    let s0 = 1.0 / (x * x);
    if s0 >= s_end() {
        return Ok(0.5 * oscillatory_tail(s0, P, 4));
    }
    let table = suffix_table().as_ref().map_err(Clone::clone)?;
    let k = ((s0 / PI).floor() as usize + 1).clamp(1, K_INTERVALS);
    let head = quadrature::integrate(&substituted, s0, k as f64 * PI, QUAD_TOL)?;
    Ok(0.5 * (head + table[k] + oscillatory_tail(s_end(), P, 4)))
}

/// `f(x) = ∫_0^x t² sin(1/t²) dt`, odd in `x`, accurate to about `1e-12`.
pub fn f33(x: f64) -> Result<f64> {
    let a = x.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let v = if a <= x_switch() {
        f33_small(a)?
    } else {
        let xc = x_switch();
        f33_small(xc)? + quadrature::integrate(&|t: f64| t * t * (1.0 / (t * t)).sin(), xc, a, 1e-14)?
    };
    Ok(x.signum() * v)
}

pub fn f33_grad(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x * (1.0 / (x * x)).sin()
    }
}

pub fn f33_hess(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        let (s, c) = (1.0 / (x * x)).sin_cos();
        2.0 * x * s - 2.0 / x * c
    }
}

pub fn f33_oracle() -> SmoothOracle {
    SmoothOracle::from_closure(1, "example_3_3.f", |x| f33(x[0]))
        .with_grad(|x| Ok(vec![f33_grad(x[0])]))
        .with_hess(|x| Ok(Mat::from_element(1, 1, f33_hess(x[0]))))
}

// ---- the constrained example ----

/// `φ(x) = 2x + g(x)` with `g` from the first example.
pub fn phi46_oracle() -> SmoothOracle {
    SmoothOracle::from_closure(1, "2*x + example_3_2.g", |x| Ok(2.0 * x[0] + g32(x[0])))
        .with_grad(|x| Ok(vec![2.0 + g32_grad(x[0])?]))
        .with_hess(|x| Ok(Mat::from_element(1, 1, g32_hess(x[0])?)))
        .with_extended(true)
}

/// `min 2x + g(x)  s.t.  (−x, −x³) ∈ ℝ²₋` at `x̄ = 0`.
pub fn problem_4_6() -> CompositeProblem {
    let map = SmoothMap::parse(&["-x0", "-x0^3"], 1).expect("static expressions parse");
    CompositeProblem::new(
        Some(phi46_oracle()),
        map,
        Outer::Polyhedral(PolyhedralFn::nonpositive_orthant(2)),
        vec![0.0],
    )
    .expect("x_bar = 0 is feasible")
}

/// A one-dimensional problem with `φ = o` and `ψ = 0`.
pub fn smooth_only(o: SmoothOracle) -> CompositeProblem {
    CompositeProblem::new(Some(o), SmoothMap::identity(1), Outer::Polyhedral(PolyhedralFn::zero(1)), vec![0.0])
        .expect("origin is in the domain")
}
