//! Invariants of the exact calculus on seeded random instances.

use proptest::prelude::*;

use varcalc::calculus::Calculus;
use varcalc::catalog::random::{random_nlp, random_nlp_degenerate};
use varcalc::ext::ExtReal;
use varcalc::linalg;
use varcalc::lpsolve::project_onto_polyhedron;
use varcalc::CompositeProblem;

fn instance(seed: u64, degenerate: bool) -> CompositeProblem {
    let n = 1 + (seed as usize % 4);
    let m = 1 + (seed as usize / 4 % 3);
    if degenerate {
        random_nlp_degenerate(seed, n.max(2), m.max(2)).unwrap().problem
    } else {
        random_nlp(seed, n, m).unwrap().problem
    }
}

/// `d` projected onto the critical cone and normalized, if nonzero.
fn critical(cal: &Calculus, d: &[f64]) -> Option<Vec<f64>> {
    let cone = &cal.critical_cone().unwrap().cone;
    let w = project_onto_polyhedron(&cone.poly, &d[..cal.n()]).unwrap().point;
    let nw = linalg::norm(&w);
    (nw > 1e-6).then(|| w.iter().map(|v| v / nw).collect())
}

fn close(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())),
        (ExtReal::PosInf, ExtReal::PosInf) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn second_subderivative_is_positively_homogeneous(
        seed in 0u64..200,
        degenerate in any::<bool>(),
        d in prop::collection::vec(-1.0f64..1.0, 4),
        lam in 0.1f64..10.0,
    ) {
        let p = instance(seed, degenerate);
        let cal = Calculus::new(&p).unwrap();
        for w in [d[..p.n()].to_vec()].into_iter().chain(critical(&cal, &d)) {
            let a = cal.sum_rule_second_subderivative(&w).unwrap();
            let scaled: Vec<f64> = w.iter().map(|v| lam * v).collect();
            let b = cal.sum_rule_second_subderivative(&scaled).unwrap();
            let expect = match a { ExtReal::Finite(x) => ExtReal::Finite(lam * lam * x), inf => inf };
            prop_assert!(close(b, expect, 1e-8), "{a} vs {b} at lambda {lam}");
        }
    }

    #[test]
    fn graphical_derivative_pairs_to_second_subderivative(
        seed in 0u64..200,
        degenerate in any::<bool>(),
        d in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let p = instance(seed, degenerate);
        let cal = Calculus::new(&p).unwrap();
        let Some(w) = critical(&cal, &d) else { return Ok(()) };
        let q = cal.sum_rule_second_subderivative(&w).unwrap();
        let gd = cal.sum_rule_graphical(&w).unwrap();
        let gens = gd.generators.expect("nonempty on the critical cone");
        prop_assert!(!gens.vertices.is_empty());
        for z in &gens.vertices {
            prop_assert!(close(ExtReal::Finite(linalg::dot(z, &w)), q, 1e-7), "<z,w> = {} vs {q}", linalg::dot(z, &w));
        }
        for r in gens.rays.iter().chain(&gens.lines) {
            prop_assert!(linalg::dot(r, &w).abs() <= 1e-7 * (1.0 + linalg::norm(r)));
        }
    }

    #[test]
    fn cone_membership_matches_criticality(
        seed in 0u64..200,
        degenerate in any::<bool>(),
        d in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let p = instance(seed, degenerate);
        let cal = Calculus::new(&p).unwrap();
        let cone = &cal.critical_cone().unwrap().cone;
        let raw = d[..p.n()].to_vec();
        prop_assert_eq!(cone.contains(&raw), cal.is_critical(&raw).unwrap());
        if let Some(w) = critical(&cal, &d) {
            prop_assert!(cal.is_critical(&w).unwrap());
            prop_assert!(cal.sum_rule_second_subderivative(&w).unwrap().is_finite());
        }
    }

    #[test]
    fn primal_and_dual_values_agree(
        seed in 0u64..200,
        degenerate in any::<bool>(),
        d in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let p = instance(seed, degenerate);
        let cal = Calculus::new(&p).unwrap();
        let Some(w) = critical(&cal, &d) else { return Ok(()) };
        let dp = cal.d2_psi_dual_pair(&w).unwrap();
        prop_assert!(close(dp.primal, dp.dual, 1e-8), "{} vs {}", dp.primal, dp.dual);
        prop_assert!(dp.z_bar.is_some());
        let r = cal.parabolic_regularity_check(&w).unwrap();
        prop_assert!(close(r.lhs, r.rhs, 1e-8));
    }
}
