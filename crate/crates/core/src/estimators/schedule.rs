//! Geometric step grids and low-discrepancy directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Discretization of `t ↓ 0, w′ → w`: steps `t_j = t0·ρ^j` and direction balls
/// of radius `δ_j = c·t_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSchedule {
    pub t0: f64,
    pub rho: f64,
    pub levels: usize,
    pub c: f64,
    pub directions: usize,
    /// Leading levels that only feed the divergence test, not the value.
    pub burn_in: usize,
    /// Local pattern search around the best sampled direction on each level.
    pub refine: bool,
    /// Quotients at or above this are treated as `+∞`.
    pub divergence_threshold: f64,
    pub seed: u64,
}

impl Default for GridSchedule {
    fn default() -> Self {
        GridSchedule {
            t0: 1e-1,
            rho: 0.5,
            levels: 20,
            c: 1.0,
            directions: 64,
            burn_in: 10,
            refine: true,
            divergence_threshold: 1e6,
            seed: 0,
        }
    }
}

impl GridSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t0 > 0.0
            && self.t0.is_finite()
            && self.rho > 0.0
            && self.rho < 1.0
            && self.levels > 0
            && self.c >= 0.0
            && self.c.is_finite()
            && self.divergence_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad grid schedule {self:?}")))
        }
    }

    pub fn t(&self, level: usize) -> f64 {
        self.t0 * self.rho.powi(level as i32)
    }

    pub fn delta(&self, level: usize) -> f64 {
        self.c * self.t(level)
    }

    pub fn steps(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.t(j)).collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points with a seeded Cranley–Patterson shift.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
        let shift = if seed == 0 {
            vec![0.0; dim]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim).map(|_| rng.gen::<f64>()).collect()
        };
        Halton { dim, shift, index: 1 }
    }

    /// Next point of `[0,1)^dim`.
    pub fn next_unit(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        (0..self.dim)
            .map(|k| (radical_inverse(i, PRIMES[k]) + self.shift[k]).fract())
            .collect()
    }

    /// Next point of the closed unit ball, by rejection from the cube.
    pub fn next_ball(&mut self) -> Vec<f64> {
        loop {
            let p: Vec<f64> = self.next_unit().into_iter().map(|u| 2.0 * u - 1.0).collect();
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return p;
            }
        }
    }

    pub fn ball_points(dim: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut h = Halton::new(dim, seed);
        (0..count).map(|_| h.next_ball()).collect()
    }

    /// Unit vectors obtained by normalizing ball points.
    pub fn sphere_points(dim: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut h = Halton::new(dim, seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = h.next_ball();
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-3 {
                out.push(p.into_iter().map(|v| v / n).collect());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_steps_decrease() {
        let s = GridSchedule::default();
        let t = s.steps();
        assert_eq!(t.len(), 20);
        assert!(t.windows(2).all(|w| w[1] < w[0]));
        assert!(s.delta(19) < 1e-6);
    }

    #[test]
    fn halton_base2() {
        let mut h = Halton::new(1, 0);
        let v: Vec<f64> = (0..4).map(|_| h.next_unit()[0]).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn ball_points_inside_and_reproducible() {
        let a = Halton::ball_points(3, 9, 50);
        assert!(a.iter().all(|p| p.iter().map(|v| v * v).sum::<f64>() <= 1.0));
        assert_eq!(a, Halton::ball_points(3, 9, 50));
        assert_ne!(a, Halton::ball_points(3, 10, 50));
    }

    #[test]
    fn rejects_bad_schedule() {
        let s = GridSchedule { rho: 1.5, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
