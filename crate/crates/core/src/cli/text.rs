//! Human-readable renderings, numbered like the conditions they report.

use std::fmt::Write;

use crate::catalog::Fact;
use crate::estimators::FalsifyOutcome;
use crate::growth::{GrowthReport, Verdict};
use crate::lpsolve::VRep;

const LABELS: [&str; 6] = [
    "quadratic growth",
    "subregularity + nonnegative d2",
    "subregularity + local minimizer",
    "graphical derivative positive",
    "graphical derivative uniform",
    "second-order sufficiency",
];

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Undetermined => "undetermined",
    }
}

pub fn growth(r: &GrowthReport, mult: &VRep, tau: f64, facts: &[Fact]) -> String {
    let mut s = String::new();
    let conds = [&r.cond_i, &r.cond_ii, &r.cond_iii, &r.cond_iv, &r.cond_v, &r.cond_vi];
    let names = ["(i)", "(ii)", "(iii)", "(iv)", "(v)", "(vi)"];
    for ((c, name), label) in conds.iter().zip(names).zip(LABELS) {
        let _ = writeln!(s, "{name:<6}{label:<34}{:<13}[{}] {}", verdict(c.verdict), c.basis, c.evidence);
        if let Some(w) = &c.witness {
            let _ = writeln!(s, "      witness {w:?}");
        }
    }
    if let Some(q) = &r.qg_modulus {
        let lower = q.lower.map_or("none".to_string(), |l| l.to_string());
        let _ = writeln!(s, "growth modulus: lower {lower}, upper {}", q.upper);
    }
    let _ = writeln!(
        s,
        "multipliers: vertices {:?}, rays {:?}, lines {:?}; tau = {tau}",
        mult.vertices, mult.rays, mult.lines
    );
    let _ = writeln!(s, "consistency: {}", if r.consistency { "yes" } else { "NO" });
    if let Some(f) = &r.finding {
        let _ = writeln!(s, "finding: {f}");
    }
    if let Some(c) = r.caveat {
        let _ = writeln!(s, "caveat: {c}");
    }
    for f in facts {
        let _ = writeln!(s, "expected: {} ({:?})", f.statement, f.basis);
    }
    s
}

pub fn falsify(outs: &[FalsifyOutcome], verified: &[Option<bool>]) -> String {
    let mut s = String::new();
    for (o, v) in outs.iter().zip(verified) {
        let _ = writeln!(s, "eps {:e}, r_max {:e}: {}", o.eps, o.r_max, o.verdict());
        if let Some(c) = &o.counterexample {
            let _ = writeln!(
                s,
                "  x1 {:?} x2 {:?}\n  <v2-v1, x2-x1> = {:e} < -{:e}; re-evaluated: {}",
                c.x1,
                c.x2,
                c.inner,
                c.penalty,
                v.unwrap_or(false)
            );
        }
    }
    s
}
