//! Lagrangian identities and growth-bound sanity on random instances.

use proptest::prelude::*;

use varcalc::catalog::random::{random_nlp, random_qp};
use varcalc::ext::ExtReal;
use varcalc::growth::{qg_modulus, Budgets, Lagrangian};
use varcalc::linalg;
use varcalc::smooth::second_form;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn lagrangian_hessian_identity(
        seed in 0u64..200,
        w in prop::collection::vec(-2.0f64..2.0, 4),
        y in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let inst = random_nlp(seed, 1 + seed as usize % 4, 1 + seed as usize / 4 % 3).unwrap();
        let p = &inst.problem;
        let (w, y) = (&w[..p.n()], &y[..p.m()]);
        let lag = Lagrangian::new(p).unwrap();
        let wv = linalg::vec_from(w);
        let h = lag.hess_xx(&p.x_bar, y).unwrap();
        let lhs = (wv.transpose() * h * &wv)[0];
        let hphi = p.phi_hess(&p.x_bar).unwrap();
        let curv = second_form(&p.map.hessians(&p.x_bar).unwrap(), &wv);
        let rhs = (wv.transpose() * hphi * &wv)[0] + linalg::dot(y, curv.as_slice());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn lagrangian_is_a_lower_bound(
        seed in 0u64..200,
        dx in prop::collection::vec(-0.5f64..0.5, 4),
        y in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let inst = random_nlp(seed, 1 + seed as usize % 4, 1 + seed as usize / 4 % 3).unwrap();
        let p = &inst.problem;
        let lag = Lagrangian::new(p).unwrap();
        // equality at (x̄, ȳ) for the constructing multiplier
        let at_bar = lag.value(&p.x_bar, &inst.y).unwrap().expect("multiplier is in dom g*");
        prop_assert!((at_bar - p.f_bar().unwrap()).abs() <= 1e-9 * (1.0 + at_bar.abs()));
        // Fenchel-Young: L(x, y) ≤ f(x)
        let x: Vec<f64> = p.x_bar.iter().zip(&dx).map(|(a, b)| a + b).collect();
        if let (Some(l), ExtReal::Finite(f)) = (lag.value(&x, &y[..p.m()]).unwrap(), p.eval_f(&x).unwrap()) {
            prop_assert!(l <= f + 1e-9 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn growth_bounds_are_ordered(seed in 0u64..120) {
        let inst = random_nlp(seed, 1 + seed as usize % 4, 1 + seed as usize / 4 % 3).unwrap();
        let q = qg_modulus(&inst.problem, &Budgets::default()).unwrap();
        if let Some(l) = q.lower {
            prop_assert!(l.to_f64() <= q.upper.to_f64() + 1e-9 * (1.0 + l.to_f64().abs()) || q.upper.is_infinite());
        }
    }

    #[test]
    fn quadratic_modulus_is_smallest_eigenvalue(seed in 0u64..100, n in 1usize..=6) {
        let inst = random_qp(seed, n).unwrap();
        let lmin = nalgebra::SymmetricEigen::new(inst.p.clone()).eigenvalues.min();
        let q = qg_modulus(&inst.problem, &Budgets::default()).unwrap();
        prop_assert!(q.exact);
        prop_assert!((q.lower.unwrap().to_f64() - lmin).abs() <= 1e-6);
        prop_assert!((q.upper.to_f64() - lmin).abs() <= 1e-6);
    }
}
