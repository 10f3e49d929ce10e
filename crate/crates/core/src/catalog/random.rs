//! Seeded random instances that are stationary at `x̄` by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{self, Mat};
use crate::polyhedral::{PolyhedralFn, Polyhedron};
use crate::problem::{CompositeProblem, Outer};
use crate::smooth::{SmoothMap, SmoothOracle};

/// Which outer function a random instance uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuterKind {
    Orthant,
    MaxAffine,
    L1,
    LInf,
    Affine,
    L1PlusOrthant,
}

impl OuterKind {
    pub const ALL: [OuterKind; 6] = [
        OuterKind::Orthant,
        OuterKind::MaxAffine,
        OuterKind::L1,
        OuterKind::LInf,
        OuterKind::Affine,
        OuterKind::L1PlusOrthant,
    ];
}

/// A generated instance along with the data used to build it.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub problem: CompositeProblem,
    pub kind: OuterKind,
    /// `φ` and `F` as parseable expressions.
    pub phi_src: String,
    pub f_src: Vec<String>,
    /// The curvature matrix of `φ`.
    pub p: Mat,
    /// The multiplier used to make `x̄` stationary.
    pub y: Vec<f64>,
}

fn num(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

/// Round to a few digits so generated expressions stay readable.
fn r3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// `½ dᵀPd + ⟨c, d⟩` with `d = x − x̄`, as an expression.
fn quadratic_src(p: &Mat, c: &[f64], x_bar: &[f64], offset: f64) -> String {
    let n = x_bar.len();
    let d: Vec<String> = (0..n)
        .map(|i| if x_bar[i] == 0.0 { format!("x{i}") } else { format!("(x{i} - {})", num(x_bar[i])) })
        .collect();
    let mut terms = vec![num(offset)];
    for i in 0..n {
        if c[i] != 0.0 {
            terms.push(format!("{}*{}", num(c[i]), d[i]));
        }
        for j in i..n {
            let coef = if i == j { 0.5 * p[(i, i)] } else { p[(i, j)] };
            if coef != 0.0 {
                terms.push(format!("{}*{}*{}", num(coef), d[i], d[j]));
            }
        }
    }
    terms.join(" + ")
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Mat {
    let b = Mat::from_fn(n, n, |_, _| r3(rng.gen_range(-1.0..1.0)));
    let mut p = &b * b.transpose() / n as f64;
    for i in 0..n {
        p[(i, i)] += shift;
    }
    p.map(r3)
}

/// `φ(x) = ½ xᵀQx` with `Q = BBᵀ/n + 0.1 I` at `x̄ = 0`, with `ψ = 0`.
pub fn random_qp(seed: u64, n: usize) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_psd(&mut rng, n, 0.1);
    let x_bar = vec![0.0; n];
    let phi_src = quadratic_src(&q, &vec![0.0; n], &x_bar, 0.0);
    let phi = SmoothOracle::parse(&phi_src, n)?;
    let problem = CompositeProblem::new(
        Some(phi),
        SmoothMap::identity(n),
        Outer::Polyhedral(PolyhedralFn::zero(n)),
        x_bar,
    )?;
    Ok(RandomInstance {
        problem,
        kind: OuterKind::Affine,
        phi_src,
        f_src: (0..n).map(|i| format!("x{i}")).collect(),
        p: q,
        y: vec![0.0; n],
    })
}

/// A random composite `φ + g∘F` with quadratic `F`, a catalog `g` with kinks
/// active at `F(x̄)`, and `φ` shifted so that `0 ∈ ∇φ(x̄) + ∇F(x̄)ᵀ∂g(F(x̄))`.
pub fn random_nlp(seed: u64, n: usize, m: usize) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = OuterKind::ALL[rng.gen_range(0..OuterKind::ALL.len())];
    random_nlp_with(&mut rng, kind, n, m, false)
}

/// Like [`random_nlp`] but with `∇F(x̄)` of rank one, so `Λ` is typically unbounded.
pub fn random_nlp_degenerate(seed: u64, n: usize, m: usize) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_nlp_with(&mut rng, OuterKind::Orthant, n, m, true)
}

/// Generate with a fixed outer kind.
pub fn random_nlp_kind(seed: u64, kind: OuterKind, n: usize, m: usize) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_nlp_with(&mut rng, kind, n, m, false)
}

fn random_nlp_with(rng: &mut ChaCha8Rng, kind: OuterKind, n: usize, m: usize, rank_one: bool) -> Result<RandomInstance> {
    let x_bar: Vec<f64> = (0..n).map(|_| r3(rng.gen_range(-0.5..0.5))).collect();
    let (g, y_bar) = random_outer(rng, kind, m, n);

    let jac = if rank_one {
        let a: Vec<f64> = (0..m).map(|_| r3(rng.gen_range(0.5..1.5))).collect();
        let b: Vec<f64> = (0..n).map(|_| r3(rng.gen_range(-1.0..1.0))).collect();
        Mat::from_fn(m, n, |i, j| a[i] * b[j])
    } else {
        Mat::from_fn(m, n, |_, _| r3(rng.gen_range(-1.0..1.0)))
    };
    let mut f_src = Vec::with_capacity(m);
    for k in 0..m {
        let h = Mat::from_fn(n, n, |_, _| r3(rng.gen_range(-0.5..0.5)));
        let h = linalg::symmetrize(&h).map(r3);
        let row: Vec<f64> = jac.row(k).iter().cloned().collect();
        f_src.push(quadratic_src(&h, &row, &x_bar, y_bar[k]));
    }
    let map = SmoothMap::parse(&f_src.iter().map(String::as_str).collect::<Vec<_>>(), n)?;

    // a subgradient y of g at ȳ: convex combination of vertices plus bounded ray steps
    let gens = g.subdifferential_generators(&y_bar)?;
    let mut y = vec![0.0; m];
    let w: Vec<f64> = gens.vertices.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    for (v, wi) in gens.vertices.iter().zip(&w) {
        for i in 0..m {
            y[i] += wi / total * v[i];
        }
    }
    for r in &gens.rays {
        let s = r3(rng.gen_range(0.0..1.0));
        for i in 0..m {
            y[i] += s * r[i];
        }
    }
    for l in &gens.lines {
        let s = r3(rng.gen_range(-1.0..1.0));
        for i in 0..m {
            y[i] += s * l[i];
        }
    }
    let y: Vec<f64> = y.into_iter().map(|v| (v * 1e6).round() / 1e6).collect();
    // nudge back onto ∂g if rounding left it
    let y = if g.is_subgradient(&y_bar, &y)? { y } else { gens.vertices[0].clone() };

    let v_psi = jac.transpose() * linalg::vec_from(&y);
    let shift = r3(rng.gen_range(-0.3..0.6));
    let p = random_psd(rng, n, shift);
    let c: Vec<f64> = v_psi.iter().map(|v| -v).collect();
    let phi_src = quadratic_src(&p, &c, &x_bar, 0.0);
    let phi = SmoothOracle::parse(&phi_src, n)?;
    let problem = CompositeProblem::new(Some(phi), map, Outer::Polyhedral(g), x_bar)?;
    Ok(RandomInstance { problem, kind, phi_src, f_src, p, y })
}

/// A catalog `g` on `ℝᵐ` together with a point `ȳ` where several pieces are active.
/// For indicator parts at most `n` constraints are active so that the
/// constraint qualification is generic.
fn random_outer(rng: &mut ChaCha8Rng, kind: OuterKind, m: usize, n: usize) -> (PolyhedralFn, Vec<f64>) {
    let orthant_point = |rng: &mut ChaCha8Rng| {
        let mut active = 0;
        (0..m)
            .map(|_| {
                if active < n && rng.gen_bool(0.6) {
                    active += 1;
                    0.0
                } else {
                    -r3(rng.gen_range(0.2..1.0))
                }
            })
            .collect::<Vec<f64>>()
    };
    match kind {
        OuterKind::Orthant => (PolyhedralFn::nonpositive_orthant(m), orthant_point(rng)),
        OuterKind::L1 => {
            let y = (0..m)
                .map(|_| if rng.gen_bool(0.5) { 0.0 } else { r3(rng.gen_range(-1.0..1.0)) })
                .collect();
            (PolyhedralFn::L1 { dim: m }, y)
        }
        OuterKind::LInf => {
            let r = r3(rng.gen_range(0.5..1.0));
            let y = (0..m)
                .map(|i| {
                    if i == 0 || rng.gen_bool(0.4) {
                        if rng.gen_bool(0.5) {
                            r
                        } else {
                            -r
                        }
                    } else {
                        r3(rng.gen_range(-0.4..0.4))
                    }
                })
                .collect();
            (PolyhedralFn::LInf { dim: m }, y)
        }
        OuterKind::MaxAffine => {
            let k = m + 1;
            let y: Vec<f64> = (0..m).map(|_| r3(rng.gen_range(-1.0..1.0))).collect();
            let a: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| r3(rng.gen_range(-1.0..1.0))).collect()).collect();
            let n_active = rng.gen_range(1..=k.min(m + 1));
            let beta = a
                .iter()
                .enumerate()
                .map(|(i, ai)| {
                    let gap = if i < n_active { 0.0 } else { r3(rng.gen_range(0.2..1.0)) };
                    -linalg::dot(ai, &y) - gap
                })
                .collect();
            (PolyhedralFn::MaxAffine { a, beta }, y)
        }
        OuterKind::Affine => {
            let a = (0..m).map(|_| r3(rng.gen_range(-1.0..1.0))).collect();
            let y = (0..m).map(|_| r3(rng.gen_range(-1.0..1.0))).collect();
            (PolyhedralFn::Affine { a, beta: 0.5 }, y)
        }
        OuterKind::L1PlusOrthant => {
            let g = PolyhedralFn::Sum {
                terms: vec![PolyhedralFn::L1 { dim: m }, PolyhedralFn::indicator(Polyhedron::orthant(m, 1.0))],
            };
            (g, orthant_point(rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = random_nlp(7, 3, 2).unwrap();
        let b = random_nlp(7, 3, 2).unwrap();
        assert_eq!(a.phi_src, b.phi_src);
        assert_eq!(a.f_src, b.f_src);
        assert_ne!(random_nlp(8, 3, 2).unwrap().phi_src, a.phi_src);
    }

    #[test]
    fn stationary_by_construction() {
        for seed in 0..40 {
            let inst = random_nlp(seed, 1 + (seed as usize % 4), 1 + (seed as usize % 3)).unwrap();
            let p = &inst.problem;
            let lin = p.linearize().unwrap();
            let g = p.g_poly().unwrap();
            assert!(g.is_subgradient(&lin.f_val, &inst.y).unwrap(), "seed {seed}");
            let r = &lin.grad_phi + lin.jac.transpose() * linalg::vec_from(&inst.y);
            assert!(r.norm() < 1e-9, "seed {seed}: residual {}", r.norm());
        }
    }

    #[test]
    fn qp_has_expected_curvature() {
        let inst = random_qp(3, 4).unwrap();
        let h = inst.problem.phi_hess(&[0.0; 4]).unwrap();
        assert!((h - &inst.p).abs().max() < 1e-12);
        assert!(linalg::lambda_min(&inst.p) >= 0.09);
    }

    #[test]
    fn degenerate_jacobian_has_rank_one() {
        let inst = random_nlp_degenerate(1, 3, 3).unwrap();
        let lin = inst.problem.linearize().unwrap();
        assert_eq!(linalg::rank(&lin.jac), 1);
    }
}
