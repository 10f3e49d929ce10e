//! Dense two-phase primal simplex with Bland's rule.

use super::{LpError, LpOutcome, LpProblem, Sense, MAX_ROWS, MAX_VARS};

const PIVOT_TOL: f64 = 1e-12;
const RC_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 50_000;

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        self.basis[r] = j;
    }

    /// Reduced costs `c_j - c_B^T T_j` for every column.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.ncols {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.rows.len()).map(|i| cost[self.basis[i]] * self.rhs(i)).sum()
    }

    /// Runs Bland-rule iterations; returns `Some(col)` if column `col` proves unboundedness.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<Option<usize>, LpError> {
        for _ in 0..MAX_ITERS {
            let d = self.reduced_costs(cost);
            let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let entering = (0..self.ncols).find(|&j| allowed[j] && d[j] < -RC_TOL * scale);
            let Some(j) = entering else {
                return Ok(None);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((br, bvar, _)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            (ratio < br && !tie) || (tie && self.basis[i] < bvar)
                        }
                    };
                    if better {
                        best = Some((ratio, self.basis[i], i));
                    }
                }
            }
            match best {
                None => return Ok(Some(j)),
                Some((_, _, r)) => self.pivot(r, j),
            }
        }
        Err(LpError::IterationLimit(MAX_ITERS))
    }
}

/// Column bookkeeping from the user's variables to the standard form.
struct Layout {
    /// (positive column, optional negative column) per original variable
    var_cols: Vec<(usize, Option<usize>)>,
    n_struct: usize,
    n_slack: usize,
    n_rows: usize,
}

impl Layout {
    fn art(&self, i: usize) -> usize {
        self.n_struct + self.n_slack + i
    }

    fn recover(&self, xs: &[f64]) -> Vec<f64> {
        self.var_cols
            .iter()
            .map(|&(p, m)| xs[p] - m.map_or(0.0, |m| xs[m]))
            .collect()
    }
}

pub(super) fn solve(p: &LpProblem) -> Result<LpOutcome, LpError> {
    let n = p.c.len();
    let n_ub = p.a_ub.len();
    let n_eq = p.a_eq.len();
    if n > MAX_VARS || n_ub + n_eq > MAX_ROWS {
        return Err(LpError::DimensionOverflow {
            vars: n,
            rows: n_ub + n_eq,
        });
    }
    p.validate()?;

    let mut var_cols = Vec::with_capacity(n);
    let mut col = 0;
    for j in 0..n {
        if p.nonneg[j] {
            var_cols.push((col, None));
            col += 1;
        } else {
            var_cols.push((col, Some(col + 1)));
            col += 2;
        }
    }
    let lay = Layout {
        var_cols,
        n_struct: col,
        n_slack: n_ub,
        n_rows: n_ub + n_eq,
    };
    let ncols = lay.n_struct + lay.n_slack + lay.n_rows;

    let mut sigma = vec![1.0; lay.n_rows];
    let mut rows = Vec::with_capacity(lay.n_rows);
    for i in 0..lay.n_rows {
        let (a, b) = if i < n_ub {
            (&p.a_ub[i], p.b_ub[i])
        } else {
            (&p.a_eq[i - n_ub], p.b_eq[i - n_ub])
        };
        let s = if b < 0.0 { -1.0 } else { 1.0 };
        sigma[i] = s;
        let mut row = vec![0.0; ncols + 1];
        for (j, &(pc, mc)) in lay.var_cols.iter().enumerate() {
            row[pc] = s * a[j];
            if let Some(mc) = mc {
                row[mc] = -s * a[j];
            }
        }
        if i < n_ub {
            row[lay.n_struct + i] = s;
        }
        row[lay.art(i)] = 1.0;
        row[ncols] = s * b;
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (0..lay.n_rows).map(|i| lay.art(i)).collect(),
        ncols,
    };

    // phase 1
    let mut cost1 = vec![0.0; ncols];
    for i in 0..lay.n_rows {
        cost1[lay.art(i)] = 1.0;
    }
    let all = vec![true; ncols];
    t.optimize(&cost1, &all)?;
    let infeas = t.objective(&cost1);
    let bscale = 1.0 + p.b_ub.iter().chain(&p.b_eq).fold(0.0f64, |a, b| a.max(b.abs()));
    if infeas > 1e-9 * bscale {
        let d = t.reduced_costs(&cost1);
        let y: Vec<f64> = (0..lay.n_rows).map(|i| 1.0 - d[lay.art(i)]).collect();
        let lam: Vec<f64> = (0..lay.n_rows).map(|i| -sigma[i] * y[i]).collect();
        let mut farkas_ub: Vec<f64> = lam[..n_ub].to_vec();
        for v in farkas_ub.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let farkas_eq = lam[n_ub..].to_vec();
        let out = LpOutcome::Infeasible {
            farkas_ub,
            farkas_eq,
        };
        p.check_farkas(&out)?;
        return Ok(out);
    }

    // drive artificials out of the basis where possible
    for r in 0..lay.n_rows {
        if t.basis[r] >= lay.art(0) {
            let j = (0..lay.art(0)).find(|&j| t.rows[r][j].abs() > 1e-9);
            if let Some(j) = j {
                t.pivot(r, j);
            }
        }
    }

    // phase 2
    let sgn = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut cost2 = vec![0.0; ncols];
    for (j, &(pc, mc)) in lay.var_cols.iter().enumerate() {
        cost2[pc] = sgn * p.c[j];
        if let Some(mc) = mc {
            cost2[mc] = -sgn * p.c[j];
        }
    }
    let allowed: Vec<bool> = (0..ncols).map(|j| j < lay.art(0)).collect();
    let unbounded = t.optimize(&cost2, &allowed)?;

    let mut xs = vec![0.0; ncols];
    for (i, &b) in t.basis.iter().enumerate() {
        xs[b] = t.rhs(i);
    }
    let x = lay.recover(&xs);

    if let Some(j) = unbounded {
        let mut dir = vec![0.0; ncols];
        dir[j] = 1.0;
        for (i, &b) in t.basis.iter().enumerate() {
            dir[b] = -t.rows[i][j];
        }
        let mut ray = lay.recover(&dir);
        let nr = ray.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nr < PIVOT_TOL {
            return Err(LpError::NumericalStall("degenerate unbounded ray".into()));
        }
        for v in ray.iter_mut() {
            *v /= nr;
        }
        let out = LpOutcome::Unbounded { x, ray };
        p.check_ray(&out)?;
        return Ok(out);
    }

    let d = t.reduced_costs(&cost2);
    let y: Vec<f64> = (0..lay.n_rows).map(|i| -d[lay.art(i)]).collect();
    let mult: Vec<f64> = (0..lay.n_rows).map(|i| -sigma[i] * y[i]).collect();
    let value = crate::linalg::dot(&p.c, &x);
    let out = LpOutcome::Optimal {
        x,
        value,
        dual_ub: mult[..n_ub].iter().map(|v| v.max(0.0)).collect(),
        dual_eq: mult[n_ub..].to_vec(),
    };
    p.check_duality(&out)?;
    Ok(out)
}
