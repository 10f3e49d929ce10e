//! Liminf of difference quotients over nested grids `t_j ↓ 0` with shrinking
//! direction balls.

use std::io::Write;

use serde::Serialize;

use super::schedule::{GridSchedule, Halton};
use super::{axpy, Evaluable};
use crate::error::{check_dim, Error, Result};
use crate::ext::{ExtReal, Finite, PosInf};
use crate::linalg;

/// Levels whose quotient carries more relative roundoff than this are not used.
const NOISE_REL: f64 = 1e-5;
/// Consecutive level minima growing at least this fast count as divergence.
const GROWTH: f64 = 1.3;
const TREND_LEVELS: usize = 4;
const TREND_FLOOR: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    /// The perturbed direction (or second-order term for parabolic quotients).
    pub direction: Vec<f64>,
    pub quotient: ExtReal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiminfEstimate {
    /// Minimum over the witnesses, or `+∞` when diverging.
    pub value: ExtReal,
    /// Best candidate of each resolved level past the burn-in.
    pub witnesses: Vec<Witness>,
    pub diverging: bool,
    pub threshold: f64,
    /// Levels discarded because roundoff dominated the quotient.
    pub unresolved_levels: usize,
    pub evaluations: usize,
}

impl LiminfEstimate {
    /// Rows `t, d_0, …, d_{n−1}, quotient`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.witnesses.first().map_or(0, |w| w.direction.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("d{i}")));
        header.push("quotient".into());
        w.write_record(&header).map_err(csv_err)?;
        for wit in &self.witnesses {
            let mut row = vec![format!("{:e}", wit.t)];
            row.extend(wit.direction.iter().map(|v| format!("{v:e}")));
            row.push(wit.quotient.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// One quotient evaluation: the value and an estimate of its absolute roundoff.
type Quotient<'a> = dyn Fn(f64, &[f64]) -> Result<Option<(ExtReal, f64)>> + 'a;

struct Level {
    t: f64,
    best: Vec<f64>,
    q: ExtReal,
    noise: f64,
}

fn better(a: ExtReal, b: ExtReal) -> bool {
    a.to_f64() < b.to_f64()
}

/// Opportunistic pattern search inside the ball `B(center, radius)`.
fn refine(
    q: &Quotient<'_>,
    t: f64,
    center: &[f64],
    radius: f64,
    dirs: &[Vec<f64>],
    start: (Vec<f64>, ExtReal, f64),
    evals: &mut usize,
) -> Result<(Vec<f64>, ExtReal, f64)> {
    let (mut p, mut val, mut noise) = start;
    let budget = 60 * (center.len() + 1);
    let mut step = 0.5 * radius;
    let mut used = 0;
    while step > 1e-7 * radius && used < budget {
        let mut moved = false;
        for d in dirs {
            let mut cand = axpy(&p, step, d);
            let off: Vec<f64> = cand.iter().zip(center).map(|(a, b)| a - b).collect();
            let r = linalg::norm(&off);
            if r > radius {
                cand = axpy(center, radius / r, &off);
            }
            used += 1;
            *evals += 1;
            if let Some((qv, nz)) = q(t, &cand)? {
                if better(qv, val) {
                    p = cand;
                    val = qv;
                    noise = nz;
                    moved = true;
                    break;
                }
            }
            if used >= budget {
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((p, val, noise))
}

fn run(center: &[f64], sched: &GridSchedule, q: &Quotient<'_>) -> Result<LiminfEstimate> {
    sched.validate()?;
    let n = center.len();
    let ball = Halton::ball_points(n, sched.seed, sched.directions);
    let mut pattern: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        pattern.push(e.clone());
        e[i] = -1.0;
        pattern.push(e);
    }
    if n > 1 {
        for s in Halton::sphere_points(n, sched.seed.wrapping_add(1), 2 * n) {
            pattern.push(s.iter().map(|v| -v).collect());
            pattern.push(s);
        }
    }

    let mut evals = 0;
    let mut levels = Vec::with_capacity(sched.levels);
    for j in 0..sched.levels {
        let t = sched.t(j);
        let delta = sched.delta(j);
        let mut best: Option<(Vec<f64>, ExtReal, f64)> = None;
        let offsets = std::iter::once(vec![0.0; n]).chain(ball.iter().cloned());
        for off in offsets {
            let cand = axpy(center, delta, &off);
            evals += 1;
            if let Some((qv, nz)) = q(t, &cand)? {
                if best.as_ref().map_or(true, |b| better(qv, b.1)) {
                    best = Some((cand, qv, nz));
                }
            }
            if delta == 0.0 {
                break;
            }
        }
        let Some(mut b) = best else {
            continue;
        };
        if sched.refine && delta > 0.0 && b.1.is_finite() {
            b = refine(q, t, center, delta, &pattern, b, &mut evals)?;
        }
        levels.push(Level {
            t,
            best: b.0,
            q: b.1,
            noise: b.2,
        });
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no quotient could be evaluated on any level".into()));
    }

    let resolved = |l: &Level| match l.q {
        PosInf => true,
        Finite(v) => l.noise <= NOISE_REL * v.abs().max(1.0),
    };
    let first_value_level = sched.t(sched.burn_in.min(sched.levels - 1));
    let mut witnesses: Vec<Witness> = levels
        .iter()
        .filter(|l| l.t <= first_value_level && resolved(l))
        .map(|l| Witness {
            t: l.t,
            direction: l.best.clone(),
            quotient: l.q,
        })
        .collect();
    let unresolved = levels.iter().filter(|l| l.t <= first_value_level && !resolved(l)).count();
    if witnesses.is_empty() {
        // everything past the burn-in is roundoff-dominated; keep the least noisy level
        let l = levels
            .iter()
            .filter(|l| l.t <= first_value_level)
            .min_by(|a, b| (a.noise / a.q.to_f64().abs().max(1.0)).total_cmp(&(b.noise / b.q.to_f64().abs().max(1.0))))
            .unwrap_or(&levels[levels.len() - 1]);
        witnesses.push(Witness {
            t: l.t,
            direction: l.best.clone(),
            quotient: l.q,
        });
    }
    let value = witnesses.iter().map(|w| w.quotient).fold(PosInf, ExtReal::min);

    // divergence: value past the threshold, or the last resolved minima keep growing
    let trend: Vec<ExtReal> = levels.iter().filter(|l| resolved(l)).map(|l| l.q).collect();
    let growing = trend.len() >= TREND_LEVELS && {
        let tail = &trend[trend.len() - TREND_LEVELS..];
        let last = tail[TREND_LEVELS - 1];
        tail.windows(2).all(|w| match (w[0], w[1]) {
            (_, PosInf) => true,
            (PosInf, Finite(_)) => false,
            (Finite(a), Finite(b)) => a > 0.0 && b >= GROWTH * a,
        }) && last.to_f64() >= TREND_FLOOR
    };
    let diverging = value.to_f64() >= sched.divergence_threshold || growing;
    Ok(LiminfEstimate {
        value: if diverging { PosInf } else { value },
        witnesses,
        diverging,
        threshold: sched.divergence_threshold,
        unresolved_levels: unresolved,
        evaluations: evals,
    })
}

fn base_value(f: &dyn Evaluable, x_bar: &[f64]) -> Result<f64> {
    check_dim(f.dim(), x_bar.len(), "x_bar")?;
    f.value(x_bar)?
        .finite()
        .ok_or_else(|| Error::NotInDomain("f(x_bar) = +inf".into()))
}

fn roundoff(terms: &[f64], denom: f64) -> f64 {
    4.0 * f64::EPSILON * terms.iter().map(|v| v.abs()).sum::<f64>() / denom + 1e-300
}

/// `df(x̄)(w) ≈ liminf (f(x̄+tw′) − f(x̄))/t`.
pub fn est_subderivative(f: &dyn Evaluable, x_bar: &[f64], w: &[f64], sched: &GridSchedule) -> Result<LiminfEstimate> {
    let fb = base_value(f, x_bar)?;
    check_dim(x_bar.len(), w.len(), "direction")?;
    let q = move |t: f64, wp: &[f64]| -> Result<Option<(ExtReal, f64)>> {
        Ok(match f.value(&axpy(x_bar, t, wp)) {
            Ok(Finite(fx)) => Some((Finite((fx - fb) / t), roundoff(&[fx, fb], t))),
            Ok(PosInf) => Some((PosInf, 0.0)),
            Err(_) => None,
        })
    };
    run(w, sched, &q)
}

/// `d²f(x̄|v)(w) ≈ liminf (f(x̄+tw′) − f(x̄) − t⟨v,w′⟩)/(½t²)`.
pub fn est_second_subderivative(
    f: &dyn Evaluable,
    x_bar: &[f64],
    v: &[f64],
    w: &[f64],
    sched: &GridSchedule,
) -> Result<LiminfEstimate> {
    let fb = base_value(f, x_bar)?;
    check_dim(x_bar.len(), w.len(), "direction")?;
    check_dim(x_bar.len(), v.len(), "subgradient")?;
    let q = move |t: f64, wp: &[f64]| -> Result<Option<(ExtReal, f64)>> {
        let lin = t * linalg::dot(v, wp);
        let den = 0.5 * t * t;
        Ok(match f.value(&axpy(x_bar, t, wp)) {
            Ok(Finite(fx)) => Some((Finite((fx - fb - lin) / den), roundoff(&[fx, fb, lin], den))),
            Ok(PosInf) => Some((PosInf, 0.0)),
            Err(_) => None,
        })
    };
    run(w, sched, &q)
}

/// `d²f(x̄)(w|z) ≈ liminf (f(x̄+tw+½t²z′) − f(x̄) − t·df(x̄)(w))/(½t²)`.
pub fn est_parabolic_subderivative(
    f: &dyn Evaluable,
    x_bar: &[f64],
    w: &[f64],
    df_val: f64,
    z: &[f64],
    sched: &GridSchedule,
) -> Result<LiminfEstimate> {
    let fb = base_value(f, x_bar)?;
    check_dim(x_bar.len(), w.len(), "direction")?;
    check_dim(x_bar.len(), z.len(), "second-order direction")?;
    if !df_val.is_finite() {
        return Err(Error::InvalidArgument("df(x_bar)(w) must be finite".into()));
    }
    let q = move |t: f64, zp: &[f64]| -> Result<Option<(ExtReal, f64)>> {
        let den = 0.5 * t * t;
        let x: Vec<f64> = (0..x_bar.len()).map(|i| x_bar[i] + t * w[i] + den * zp[i]).collect();
        let lin = t * df_val;
        Ok(match f.value(&x) {
            Ok(Finite(fx)) => Some((Finite((fx - fb - lin) / den), roundoff(&[fx, fb, lin], den))),
            Ok(PosInf) => Some((PosInf, 0.0)),
            Err(_) => None,
        })
    };
    run(z, sched, &q)
}
