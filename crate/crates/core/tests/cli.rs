//! End-to-end runs of the `varcalc` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const NEG_HALF_LINE: &str =
    r#"{"n": 1, "phi": "0", "g": {"variant": "indicator", "set": {"A": [[1]], "b": [0]}}, "x_bar": [0]}"#;

const QUAD_L1: &str = r#"{
    "n": 2,
    "phi": "x0^2 + 3*x1^2 + x0*x1",
    "g": {"variant": "l1", "dim": 2},
    "x_bar": [0, 0],
    "options": {"seed": 4}
}"#;

const CONSTRAINED: &str = r#"{
    "n": 2, "m": 1,
    "phi": "x0 + 0.5*x1^2",
    "F": ["-x0 - x1^2"],
    "g": {"variant": "indicator", "set": {"A": [[1]], "b": [0]}},
    "x_bar": [0, 0]
}"#;

fn file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn varcalc(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varcalc"));
    cmd.args(args).env_remove("VARCALC_SEED");
    if let Some(s) = seed {
        cmd.env("VARCALC_SEED", s);
    }
    cmd.output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn d2_off_the_cone_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    let f = file(&dir, "neg.json", NEG_HALF_LINE);
    let o = varcalc(&["d2", f.to_str().unwrap(), "--w", "1"], None);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["tool"], "varcalc");
    assert_eq!(r["result"]["value"], "+inf");
    assert_eq!(r["result"]["critical"], false);
}

#[test]
fn estimate_on_the_cone_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = file(&dir, "neg.json", NEG_HALF_LINE);
    let csv = dir.path().join("w.csv");
    let o = varcalc(
        &["--witness-csv", csv.to_str().unwrap(), "estimate", f.to_str().unwrap(), "--object", "d2", "--w=-1"],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["result"]["estimate"]["value"].as_f64(), Some(0.0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains(','));
    assert!(lines.count() > 0);
}

#[test]
fn analyze_quadratic_plus_l1() {
    let dir = tempfile::tempdir().unwrap();
    let f = file(&dir, "q.json", QUAD_L1);
    let o = varcalc(&["analyze", f.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["seed"], 4);
    let rep = &r["result"]["growth"];
    for c in ["cond_i", "cond_ii", "cond_iii", "cond_iv", "cond_v", "cond_vi"] {
        assert_eq!(rep[c]["verdict"], "holds", "{c}: {}", rep[c]);
    }
}

#[test]
fn analyze_curved_constraint_fails() {
    // minimize x0 + x1²/2 subject to x0 + x1² ≥ 0: along the boundary arc
    // x0 = -x1² the objective is -x1²/2, so no growth condition can hold.
    let dir = tempfile::tempdir().unwrap();
    let f = file(&dir, "c.json", CONSTRAINED);
    let o = varcalc(&["analyze", f.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = &json(&o)["result"]["growth"];
    assert_eq!(rep["cond_vi"]["verdict"], "fails", "{}", rep["cond_vi"]);
    assert_eq!(rep["cond_i"]["verdict"], "fails", "{}", rep["cond_i"]);
    assert_eq!(rep["consistency"], true);
}

#[test]
fn seed_override_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let f = file(&dir, "q.json", QUAD_L1);
    let args = ["analyze", f.to_str().unwrap()];
    let a = varcalc(&args, Some("17"));
    let b = varcalc(&args, Some("17"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 17);
    assert_eq!(varcalc(&args, Some("seventeen")).status.code(), Some(2));
}

#[test]
fn invalid_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = file(&dir, "bad.json", &QUAD_L1.replace("\"x_bar\"", "\"xbar\": 0,\n    \"x_bar\""));
    let o = varcalc(&["analyze", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unknown field") && err.contains("line 5"), "{err}");

    // x_bar = 0 is not stationary once phi has a large linear term
    let moving = file(&dir, "ns.json", &QUAD_L1.replace("x0^2", "5*x0 + x0^2"));
    assert_eq!(varcalc(&["analyze", moving.to_str().unwrap()], None).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(varcalc(&["analyze", missing.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn catalog_commands() {
    let o = varcalc(&["catalog", "list"], None);
    assert_eq!(o.status.code(), Some(0));
    let list = json(&o);
    let ids: Vec<&str> =
        list["result"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    for id in ["example_3_2", "example_3_3", "example_4_6"] {
        assert!(ids.contains(&id), "{ids:?}");
    }
    let o = varcalc(&["--format", "text", "catalog", "run", "example_3_2"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(!o.stdout.is_empty());
    assert_eq!(varcalc(&["catalog", "run", "example_9_9"], None).status.code(), Some(2));
}
