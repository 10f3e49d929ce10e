//! Sample-based checks of quadratic growth and strong metric subregularity.

use serde::Serialize;

use super::schedule::Halton;
use super::Evaluable;
use crate::error::{check_dim, Error, Result};
use crate::ext::ExtReal;
use crate::linalg;
use crate::problem::CompositeProblem;

const SHELLS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleCheck {
    pub holds: bool,
    /// Smallest sampled ratio; `+∞` if no sample produced a finite ratio.
    pub worst_ratio: ExtReal,
    /// The sample attaining `worst_ratio`.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    pub skipped: usize,
}

/// Points of the `γ`-ball around `x̄`: half quasi-uniform, half on geometric
/// shells `γ·2^{-i}` so that behaviour close to `x̄` is seen.
pub(crate) fn ball_samples(x_bar: &[f64], gamma: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = x_bar.len();
    let shift = |p: &[f64], r: f64| -> Vec<f64> { x_bar.iter().zip(p).map(|(a, b)| a + r * b).collect() };
    let uniform = count / 2;
    let mut out: Vec<Vec<f64>> = Halton::ball_points(n, seed, uniform).iter().map(|p| shift(p, gamma)).collect();
    let rest = count - uniform;
    let dirs = Halton::sphere_points(n, seed.wrapping_add(7), rest.max(1));
    for (i, d) in dirs.iter().take(rest).enumerate() {
        let r = gamma * 0.5f64.powi((i % SHELLS) as i32);
        out.push(shift(d, r));
    }
    out.retain(|x| linalg::norm(&x.iter().zip(x_bar).map(|(a, b)| a - b).collect::<Vec<_>>()) > 0.0);
    out
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Checks `f(x) − f(x̄) ≥ (κ/2)‖x − x̄‖²` on samples of the `γ`-ball.
/// `worst_ratio = min 2(f(x) − f(x̄))/‖x − x̄‖²` bounds the growth modulus from above.
pub fn qgc_sample_check(f: &dyn Evaluable, x_bar: &[f64], kappa: f64, gamma: f64, n_samples: usize) -> Result<SampleCheck> {
    check_dim(f.dim(), x_bar.len(), "x_bar")?;
    if !(kappa > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument("kappa and gamma must be positive".into()));
    }
    let fb = f
        .value(x_bar)?
        .finite()
        .ok_or_else(|| Error::NotInDomain("f(x_bar) = +inf".into()))?;
    let mut worst = ExtReal::PosInf;
    let mut witness = None;
    let mut used = 0;
    let mut skipped = 0;
    for x in ball_samples(x_bar, gamma, n_samples, 0) {
        let fx = match f.value(&x) {
            Ok(v) => v,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        used += 1;
        if let Some(fx) = fx.finite() {
            let d = dist(&x, x_bar);
            let ratio = 2.0 * (fx - fb) / (d * d);
            if ratio < worst.to_f64() {
                worst = ExtReal::Finite(ratio);
                witness = Some(x);
            }
        }
    }
    let holds = worst.to_f64() >= kappa * (1.0 - 1e-12);
    Ok(SampleCheck {
        holds,
        worst_ratio: worst,
        witness,
        samples: used,
        skipped,
    })
}

/// Checks `‖x − x̄‖ ≤ κ·dist(0, ∂f(x))` at samples in `dom ∂f` near `x̄`.
/// `worst_ratio = min dist(0, ∂f(x))/‖x − x̄‖`; the check holds iff it is at least `1/κ`.
pub fn sms_sample_check(p: &CompositeProblem, kappa: f64, gamma: f64, n_samples: usize) -> Result<SampleCheck> {
    if !(kappa > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument("kappa and gamma must be positive".into()));
    }
    p.g_poly()?;
    let x_bar = &p.x_bar;
    let mut worst = ExtReal::PosInf;
    let mut witness = None;
    let mut used = 0;
    let mut skipped = 0;
    for x in ball_samples(x_bar, gamma, n_samples, 0) {
        match p.subgradient_distance(&x) {
            Ok(Some(dv)) => {
                used += 1;
                let ratio = dv / dist(&x, x_bar);
                if ratio < worst.to_f64() {
                    worst = ExtReal::Finite(ratio);
                    witness = Some(x);
                }
            }
            Ok(None) => {}
            Err(_) => skipped += 1,
        }
    }
    let holds = worst.to_f64() * kappa >= 1.0 - 1e-12;
    Ok(SampleCheck {
        holds,
        worst_ratio: worst,
        witness,
        samples: used,
        skipped,
    })
}
