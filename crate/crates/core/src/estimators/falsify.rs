//! Search for pairs violating `⟨v₂−v₁, x₂−x₁⟩ ≥ −r‖x₂−x₁‖²` near `(x̄, v̄)`.
//! A violation for `r = r_max` at every scale `ε` rules out prox-regularity;
//! finding nothing proves nothing.

use std::f64::consts::PI;

use serde::Serialize;

use super::schedule::Halton;
use super::GradientSource;
use crate::catalog::SequenceFamily;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

pub const DEFAULT_EPS_SWEEP: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Largest sequence index probed.
const K_MAX: f64 = 1e13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FalsifyStrategy {
    /// The oscillation-aligned sequences along the first coordinate.
    Sequences,
    /// All pairs among quasi-random points of the `ε`-ball.
    PairGrid { points: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub r: f64,
    /// `⟨v₂−v₁, x₂−x₁⟩`.
    pub inner: f64,
    /// `r‖x₂−x₁‖²`.
    pub penalty: f64,
    pub origin: String,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Sum with Neumaier compensation.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    let mut mag = 0.0f64;
    for x in terms {
        mag += x.abs();
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    (s + c, mag)
}

/// `(⟨v₂−v₁, x₂−x₁⟩ + r‖x₂−x₁‖², rounding bound)`.
fn violation(x1: &[f64], x2: &[f64], v1: &[f64], v2: &[f64], r: f64) -> (f64, f64) {
    let dx = diff(x2, x1);
    let dv = diff(v2, v1);
    let terms = dx.iter().zip(&dv).map(|(a, b)| a * b).chain(dx.iter().map(|a| r * a * a));
    let (s, mag) = compensated_sum(terms);
    // each product and each difference contributes a few ulps
    let scale = mag + dx.iter().map(|a| a.abs()).sum::<f64>() * (v1.iter().chain(v2).map(|v| v.abs()).sum::<f64>());
    (s, 16.0 * f64::EPSILON * scale)
}

impl Counterexample {
    fn build(x1: Vec<f64>, x2: Vec<f64>, v1: Vec<f64>, v2: Vec<f64>, r: f64, origin: String) -> Self {
        let dx = diff(&x2, &x1);
        let inner = linalg::dot(&diff(&v2, &v1), &dx);
        let penalty = r * linalg::dot(&dx, &dx);
        Counterexample {
            x1,
            x2,
            v1,
            v2,
            r,
            inner,
            penalty,
            origin,
        }
    }

    /// Re-evaluates both gradients and checks the strict reversed inequality with
    /// a rounding margin. Also confirms the stored gradients.
    pub fn verify(&self, grad: &dyn GradientSource) -> Result<bool> {
        let g1: Vec<f64> = grad.gradient(&self.x1)?.iter().copied().collect();
        let g2: Vec<f64> = grad.gradient(&self.x2)?.iter().copied().collect();
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        if !same(&g1, &self.v1) || !same(&g2, &self.v2) {
            return Ok(false);
        }
        let (s, margin) = violation(&self.x1, &self.x2, &g1, &g2, self.r);
        Ok(s < -margin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalsifyOutcome {
    pub eps: f64,
    pub r_max: f64,
    pub counterexample: Option<Counterexample>,
    /// Probe points where a gradient was obtained.
    pub probes: usize,
    /// Probe points rejected as non-differentiable or out of range.
    pub rejected: usize,
}

impl FalsifyOutcome {
    pub fn verdict(&self) -> &'static str {
        if self.counterexample.is_some() {
            "not prox-regular (violating pair found)"
        } else {
            "not falsified at this scale"
        }
    }
}

struct Probe {
    x: Vec<f64>,
    v: Vec<f64>,
}

fn probe(grad: &dyn GradientSource, x: Vec<f64>, x_bar: &[f64], v_bar: &[f64], eps: f64) -> Option<Probe> {
    if linalg::norm(&diff(&x, x_bar)) > eps {
        return None;
    }
    let v: Vec<f64> = grad.gradient(&x).ok()?.iter().copied().collect();
    if v.iter().any(|a| !a.is_finite()) || linalg::norm(&diff(&v, v_bar)) > eps {
        return None;
    }
    Some(Probe { x, v })
}

fn family_points(family: SequenceFamily, k: f64) -> (f64, f64) {
    match family {
        SequenceFamily::Reciprocal => (1.0 / (2.0 * k * PI), 1.0 / (PI / 2.0 + 2.0 * k * PI)),
        SequenceFamily::ReciprocalSqrt => (1.0 / (2.0 * k * PI).sqrt(), 1.0 / (PI / 2.0 + 2.0 * k * PI).sqrt()),
    }
}

fn sequence_indices() -> Vec<f64> {
    let mut ks = Vec::new();
    let mut k = 1.0f64;
    while k <= K_MAX {
        ks.push(k);
        k = (k * 1.05).ceil().max(k + 1.0);
    }
    ks
}

/// Looks for a pair violating the inequality for `r = r_max` (hence for every
/// `r ≤ r_max`) with both points in `B(x̄, ε)` and gradients in `B(v̄, ε)`.
pub fn prox_regularity_falsify(
    grad: &dyn GradientSource,
    x_bar: &[f64],
    v_bar: &[f64],
    r_max: f64,
    eps: f64,
    strategy: FalsifyStrategy,
) -> Result<FalsifyOutcome> {
    let n = grad.dim();
    check_dim(n, x_bar.len(), "x_bar")?;
    check_dim(n, v_bar.len(), "v_bar")?;
    if !(r_max > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument("r_max and eps must be positive".into()));
    }
    let mut probes = 0;
    let mut rejected = 0;
    let mut found = None;
    match strategy {
        FalsifyStrategy::Sequences => {
            'outer: for family in [SequenceFamily::Reciprocal, SequenceFamily::ReciprocalSqrt] {
                for &k in &sequence_indices() {
                    let (u, x) = family_points(family, k);
                    if u > eps {
                        continue;
                    }
                    for sign in [1.0, -1.0] {
                        let at = |s: f64| {
                            let mut p = x_bar.to_vec();
                            p[0] += sign * s;
                            p
                        };
                        let (Some(a), Some(b)) = (probe(grad, at(u), x_bar, v_bar, eps), probe(grad, at(x), x_bar, v_bar, eps))
                        else {
                            rejected += 1;
                            continue;
                        };
                        probes += 2;
                        let (s, margin) = violation(&a.x, &b.x, &a.v, &b.v, r_max);
                        if s < -margin {
                            found = Some(Counterexample::build(
                                a.x,
                                b.x,
                                a.v,
                                b.v,
                                r_max,
                                format!("{family:?} sequence, k = {k}, sign {sign:+}"),
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
        FalsifyStrategy::PairGrid { points, seed } => {
            let mut pts = Vec::new();
            for p in Halton::ball_points(n, seed, points) {
                let x: Vec<f64> = x_bar.iter().zip(&p).map(|(a, b)| a + eps * b).collect();
                match probe(grad, x, x_bar, v_bar, eps) {
                    Some(pr) => pts.push(pr),
                    None => rejected += 1,
                }
            }
            probes = pts.len();
            let mut worst: Option<(f64, usize, usize)> = None;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let (s, margin) = violation(&pts[i].x, &pts[j].x, &pts[i].v, &pts[j].v, r_max);
                    if s < -margin {
                        let d2 = linalg::norm(&diff(&pts[j].x, &pts[i].x)).powi(2);
                        let score = s / d2;
                        if worst.map_or(true, |w| score < w.0) {
                            worst = Some((score, i, j));
                        }
                    }
                }
            }
            if let Some((_, i, j)) = worst {
                found = Some(Counterexample::build(
                    pts[i].x.clone(),
                    pts[j].x.clone(),
                    pts[i].v.clone(),
                    pts[j].v.clone(),
                    r_max,
                    format!("pair grid, points {i} and {j}"),
                ));
            }
        }
    }
    if probes == 0 {
        return Err(Error::NoProbePoints);
    }
    Ok(FalsifyOutcome {
        eps,
        r_max,
        counterexample: found,
        probes,
        rejected,
    })
}

/// Runs the falsifier once per `ε`.
pub fn prox_regularity_sweep(
    grad: &dyn GradientSource,
    x_bar: &[f64],
    v_bar: &[f64],
    r_max: f64,
    eps: &[f64],
    strategy: FalsifyStrategy,
) -> Result<Vec<FalsifyOutcome>> {
    eps.iter()
        .map(|&e| prox_regularity_falsify(grad, x_bar, v_bar, r_max, e, strategy))
        .collect()
}
