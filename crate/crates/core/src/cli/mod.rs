//! Command-line front end: problem files in, JSON (or text) reports out.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid or inconsistent
//! problem, 3 only undetermined results (budget exhausted).

mod file;
mod text;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::calculus::{self, Calculus};
use crate::catalog::{self, CatalogEntry, Fact};
use crate::error::{Error, Result};
use crate::estimators::{
    est_parabolic_subderivative, est_second_subderivative, est_subderivative, prox_regularity_sweep, FalsifyOutcome,
    FalsifyStrategy, GridSchedule, LiminfEstimate, DEFAULT_EPS_SWEEP,
};
use crate::ext::ExtReal;
use crate::growth::{self, Budgets, GrowthReport, Verdict};
use crate::linalg;
use crate::problem::CompositeProblem;

pub use file::{CatalogRef, Loaded, Options, PhiSpec, ProblemFile};

pub const TOOL: &str = "varcalc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable overriding the seed of the problem file.
pub const SEED_VAR: &str = "VARCALC_SEED";

#[derive(Parser, Debug)]
#[command(name = "varcalc", version, about = "Second-order variational analysis of f = phi + g(F(x))")]
pub struct Cli {
    /// Write witnesses as CSV to this path.
    #[arg(long, global = true)]
    pub witness_csv: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Object {
    Subderivative,
    D2,
    Parabolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Sequences,
    Grid,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Growth battery (i)-(vi) with calculus cross-checks.
    Analyze { file: PathBuf },
    /// Second subderivative of f at x_bar for v along w.
    D2 {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        v: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        w: Vec<f64>,
    },
    /// Parabolic subderivative of f at x_bar along w with second-order term z.
    Parabolic {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        w: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        z: Vec<f64>,
    },
    /// Sampling estimate of a generalized derivative.
    Estimate {
        file: PathBuf,
        #[arg(long, value_enum)]
        object: Object,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        w: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        z: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        v: Option<Vec<f64>>,
        /// Grid schedule as JSON; replaces the one in the file.
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Search for pairs violating the prox-regularity inequality.
    FalsifyProx {
        file: PathBuf,
        #[arg(long, default_value_t = 1e3)]
        r_max: f64,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Strategy::Sequences)]
        strategy: Strategy,
        /// Points per ball for the grid strategy.
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Built-in examples.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum CatalogAction {
    List,
    Run { id: String },
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    result: Value,
}

/// What a command produced before formatting.
pub struct Outcome {
    pub command: &'static str,
    pub seed: u64,
    pub result: Value,
    pub text: String,
    pub undetermined_only: bool,
    pub csv: Option<CsvRows>,
}

pub struct CsvRows {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Lp(_) | Error::Quadrature(_) | Error::ProjectionStall(_) | Error::NegativeInfinity(_) => 1,
        Error::Overflow(_) | Error::NoProbePoints => 3,
        _ => 2,
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidArgument(format!("serialization: {e}")))
}

fn parse_seed(raw: Option<&str>) -> Result<Option<u64>> {
    raw.map(|s| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_VAR} must be an unsigned integer, got {s:?}")))
    })
    .transpose()
}

fn load(path: &Path, seed: Option<u64>) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    ProblemFile::from_json(&text)?.build(seed)
}

/// Runs one command; `env_seed` is the raw value of `VARCALC_SEED`.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<Outcome> {
    let seed = parse_seed(env_seed)?;
    match &cli.command {
        Command::Analyze { file } => {
            let l = load(file, seed)?;
            analyze(&l.problem, &l.options.budgets, l.options.seed, &[])
        }
        Command::D2 { file, v, w } => {
            let mut l = load(file, seed)?;
            if let Some(v) = v {
                l.problem.v_bar = v.clone();
            }
            cmd_d2(&l.problem, w, l.options.seed)
        }
        Command::Parabolic { file, w, z } => {
            let l = load(file, seed)?;
            cmd_parabolic(&l.problem, w, z, l.options.seed)
        }
        Command::Estimate { file, object, w, z, v, schedule } => {
            let l = load(file, seed)?;
            let sched = match schedule {
                Some(s) => {
                    let mut sc: GridSchedule =
                        serde_json::from_str(s).map_err(|e| Error::Schema(format!("--schedule: {e}")))?;
                    if seed.is_some() {
                        sc.seed = l.options.seed;
                    }
                    sc.validate()?;
                    sc
                }
                None => l.options.schedule.clone(),
            };
            let v = v.clone().unwrap_or_else(|| l.problem.v_bar.clone());
            cmd_estimate(&l.problem, *object, w, z.as_deref(), &v, &sched)
        }
        Command::FalsifyProx { file, r_max, eps, strategy, points } => {
            let l = load(file, seed)?;
            let strat = match strategy {
                Strategy::Sequences => FalsifyStrategy::Sequences,
                Strategy::Grid => FalsifyStrategy::PairGrid { points: *points, seed: l.options.seed },
            };
            let eps = eps.clone().unwrap_or_else(|| DEFAULT_EPS_SWEEP.to_vec());
            cmd_falsify(&l.problem, *r_max, &eps, strat, l.options.seed)
        }
        Command::Catalog { action: CatalogAction::List } => catalog_list(),
        Command::Catalog { action: CatalogAction::Run { id } } => catalog_run(id, seed.unwrap_or(0)),
    }
}

/// Parses arguments, runs, writes the report and returns the exit code.
pub fn run<I, S>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, env_seed).and_then(|o| emit(&cli, o, out)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(cli: &Cli, o: Outcome, out: &mut dyn Write) -> Result<i32> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
    if let (Some(path), Some(rows)) = (&cli.witness_csv, &o.csv) {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(&rows.header).map_err(csv_err)?;
        for r in &rows.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    match cli.format {
        Format::Json => writeln!(out, "{}", render(o.command, o.seed, o.result)?).map_err(io)?,
        Format::Text => {
            writeln!(out, "{TOOL} {VERSION}  command {}  seed {}", o.command, o.seed).map_err(io)?;
            write!(out, "{}", o.text).map_err(io)?;
        }
    }
    Ok(if o.undetermined_only { 3 } else { 0 })
}

fn render(command: &str, seed: u64, result: Value) -> Result<String> {
    let report = Report { tool: TOOL, version: VERSION, command, seed, result };
    serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// The same reports with problem files passed as text, for hosts without a
/// filesystem. Each returns the pretty JSON the binary would print.
pub mod source {
    use super::*;

    fn done(o: Outcome) -> Result<String> {
        render(o.command, o.seed, o.result)
    }

    pub fn analyze(problem: &str) -> Result<String> {
        let l = ProblemFile::from_json(problem)?.build(None)?;
        done(super::analyze(&l.problem, &l.options.budgets, l.options.seed, &[])?)
    }

    pub fn d2(problem: &str, w: &[f64]) -> Result<String> {
        let l = ProblemFile::from_json(problem)?.build(None)?;
        done(cmd_d2(&l.problem, w, l.options.seed)?)
    }

    /// `c` overrides the direction-ball factor of the file's schedule.
    pub fn estimate_d2(problem: &str, w: &[f64], c: Option<f64>) -> Result<String> {
        let l = ProblemFile::from_json(problem)?.build(None)?;
        let v = l.problem.v_bar.clone();
        let mut sched = l.options.schedule.clone();
        if let Some(c) = c {
            sched.c = c;
            sched.validate()?;
        }
        done(cmd_estimate(&l.problem, Object::D2, w, None, &v, &sched)?)
    }

    pub fn catalog_run(id: &str) -> Result<String> {
        done(super::catalog_run(id, 0)?)
    }

    pub fn catalog_list() -> Result<String> {
        done(super::catalog_list()?)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

fn conditions(r: &GrowthReport) -> [(&'static str, &growth::Condition); 6] {
    [
        ("i", &r.cond_i),
        ("ii", &r.cond_ii),
        ("iii", &r.cond_iii),
        ("iv", &r.cond_iv),
        ("v", &r.cond_v),
        ("vi", &r.cond_vi),
    ]
}

#[derive(Serialize)]
struct CalculusSummary {
    multipliers: crate::lpsolve::VRep,
    critical_cone_rays: Vec<Vec<f64>>,
    critical_cone_lines: Vec<Vec<f64>>,
    kappa_linearized: f64,
    lipschitz: f64,
    tau: f64,
    msqc: calculus::MsqcReport,
}

/// Roundoff-level entries are shown as zero.
fn chop(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    vs.into_iter()
        .map(|v| v.into_iter().map(|x| if x.abs() < 1e-12 { 0.0 } else { x }).collect())
        .collect()
}

fn calculus_summary(p: &CompositeProblem) -> Result<CalculusSummary> {
    let cal = Calculus::new(p)?;
    let (rays, lines) = cal.critical_cone()?.cone.generators()?;
    let m = cal.multipliers.generators()?;
    Ok(CalculusSummary {
        multipliers: crate::lpsolve::VRep {
            vertices: chop(m.vertices),
            rays: chop(m.rays),
            lines: chop(m.lines),
        },
        critical_cone_rays: chop(rays),
        critical_cone_lines: chop(lines),
        kappa_linearized: cal.kappa,
        lipschitz: cal.ell,
        tau: cal.tau,
        msqc: calculus::msqc_check(p, 0.5, 200)?,
    })
}

fn analyze(p: &CompositeProblem, budgets: &Budgets, seed: u64, facts: &[Fact]) -> Result<Outcome> {
    let report = growth::growth_battery(p, budgets)?;
    let calc = calculus_summary(p)?;
    let conds = conditions(&report);
    let undetermined_only = conds.iter().all(|(_, c)| c.verdict == Verdict::Undetermined);
    let rows = conds
        .iter()
        .filter_map(|(name, c)| c.witness.as_ref().map(|w| vec![name.to_string(), fmt_vec(w)]))
        .collect();
    let text = text::growth(&report, &calc.multipliers, calc.tau, facts);
    let mut result = json!({
        "problem": {"n": p.n(), "m": p.m(), "x_bar": p.x_bar, "f_bar": p.f_bar()?},
        "growth": to_value(&report)?,
        "calculus": to_value(&calc)?,
    });
    if !facts.is_empty() {
        result["facts"] = to_value(&facts)?;
    }
    Ok(Outcome {
        command: "analyze",
        seed,
        result,
        text,
        undetermined_only,
        csv: Some(CsvRows {
            header: vec!["condition".into(), "witness".into()],
            rows,
        }),
    })
}

fn cmd_d2(p: &CompositeProblem, w: &[f64], seed: u64) -> Result<Outcome> {
    let cal = Calculus::new(p)?;
    let mf = cal.d2_psi_max_formula(w)?;
    let value = cal.sum_rule_second_subderivative(w)?;
    let critical = cal.is_critical(w)?;
    let text = format!("d2 f(x_bar | {:?})({:?}) = {value}\ncritical: {critical}\n", p.v_bar, w);
    Ok(Outcome {
        command: "d2",
        seed,
        result: json!({
            "w": w, "v": p.v_bar, "value": value, "critical": critical,
            "d2_psi": to_value(&mf)?,
        }),
        text,
        undetermined_only: false,
        csv: None,
    })
}

fn cmd_parabolic(p: &CompositeProblem, w: &[f64], z: &[f64], seed: u64) -> Result<Outcome> {
    let cal = Calculus::new(p)?;
    let value = cal.sum_rule_parabolic(w, z)?;
    let regularity = if cal.is_critical(w)? { Some(cal.parabolic_regularity_check(w)?) } else { None };
    let text = format!("d2 f(x_bar)({w:?} | {z:?}) = {value}\n");
    Ok(Outcome {
        command: "parabolic",
        seed,
        result: json!({"w": w, "z": z, "value": value, "regularity": to_value(&regularity)?}),
        text,
        undetermined_only: false,
        csv: None,
    })
}

/// `df(x̄)(w) = ∇φ(x̄)w + dg(F(x̄))(∇F(x̄)w)`.
fn first_subderivative(p: &CompositeProblem, w: &[f64]) -> Result<ExtReal> {
    let lin = p.linearize()?;
    let jw: Vec<f64> = (&lin.jac * linalg::vec_from(w)).iter().copied().collect();
    let dg = p.g_poly()?.subderivative(&lin.f_val, &jw)?;
    Ok(dg + linalg::dot(lin.grad_phi.as_slice(), w))
}

fn cmd_estimate(
    p: &CompositeProblem,
    object: Object,
    w: &[f64],
    z: Option<&[f64]>,
    v: &[f64],
    sched: &GridSchedule,
) -> Result<Outcome> {
    let (est, exact, name): (LiminfEstimate, Option<ExtReal>, &str) = match object {
        Object::Subderivative => (est_subderivative(p, &p.x_bar, w, sched)?, first_subderivative(p, w).ok(), "subderivative"),
        Object::D2 => {
            let mut q = p.clone();
            q.v_bar = v.to_vec();
            let exact = Calculus::new(&q).and_then(|c| c.sum_rule_second_subderivative(w)).ok();
            (est_second_subderivative(p, &p.x_bar, v, w, sched)?, exact, "d2")
        }
        Object::Parabolic => {
            let z = z.ok_or_else(|| Error::InvalidArgument("--object parabolic needs --z".into()))?;
            let df = first_subderivative(p, w)?;
            let ExtReal::Finite(df) = df else {
                return Err(Error::NotTangent("df(x_bar)(w) = +inf".into()));
            };
            let exact = Calculus::new(p).and_then(|c| c.sum_rule_parabolic(w, z)).ok();
            (est_parabolic_subderivative(p, &p.x_bar, w, df, z, sched)?, exact, "parabolic")
        }
    };
    let n = est.witnesses.first().map_or(0, |w| w.direction.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("d{i}")));
    header.push("quotient".into());
    let rows = est
        .witnesses
        .iter()
        .map(|wit| {
            let mut r = vec![format!("{:e}", wit.t)];
            r.extend(wit.direction.iter().map(|v| format!("{v:e}")));
            r.push(wit.quotient.to_string());
            r
        })
        .collect();
    let text = format!(
        "estimate of {name} along {w:?}: {}{}\nexact (calculus): {}\n",
        est.value,
        if est.diverging { " (diverging)" } else { "" },
        exact.map_or("unavailable".to_string(), |e| e.to_string())
    );
    Ok(Outcome {
        command: "estimate",
        seed: sched.seed,
        result: json!({"object": name, "w": w, "estimate": to_value(&est)?, "exact": exact}),
        text,
        undetermined_only: false,
        csv: Some(CsvRows { header, rows }),
    })
}

fn falsify_rows(outs: &[FalsifyOutcome]) -> CsvRows {
    CsvRows {
        header: ["eps", "x1", "x2", "v1", "v2", "inner", "penalty"].map(String::from).to_vec(),
        rows: outs
            .iter()
            .filter_map(|o| {
                o.counterexample.as_ref().map(|c| {
                    vec![
                        format!("{:e}", o.eps),
                        fmt_vec(&c.x1),
                        fmt_vec(&c.x2),
                        fmt_vec(&c.v1),
                        fmt_vec(&c.v2),
                        format!("{:e}", c.inner),
                        format!("{:e}", c.penalty),
                    ]
                })
            })
            .collect(),
    }
}

fn cmd_falsify(p: &CompositeProblem, r_max: f64, eps: &[f64], strat: FalsifyStrategy, seed: u64) -> Result<Outcome> {
    let outs = prox_regularity_sweep(p, &p.x_bar, &p.v_bar, r_max, eps, strat)?;
    let mut verified = vec![];
    for o in &outs {
        verified.push(match &o.counterexample {
            Some(c) => Some(c.verify(p)?),
            None => None,
        });
    }
    let undetermined_only = outs.iter().all(|o| o.counterexample.is_none());
    Ok(Outcome {
        command: "falsify-prox",
        seed,
        text: text::falsify(&outs, &verified),
        result: json!({"r_max": r_max, "strategy": to_value(&strat)?, "outcomes": to_value(&outs)?, "verified": verified}),
        undetermined_only,
        csv: Some(falsify_rows(&outs)),
    })
}

fn catalog_list() -> Result<Outcome> {
    let entries: Vec<Value> = catalog::all()
        .iter()
        .map(|e| json!({"id": e.id, "summary": e.summary, "facts": e.facts}))
        .collect();
    let text = catalog::all().iter().map(|e| format!("{:<12} {}\n", e.id, e.summary)).collect();
    Ok(Outcome {
        command: "catalog list",
        seed: 0,
        result: Value::Array(entries),
        text,
        undetermined_only: false,
        csv: None,
    })
}

fn catalog_run(id: &str, seed: u64) -> Result<Outcome> {
    let entry: CatalogEntry = catalog::by_id(id)?;
    let mut o = match entry.sequences {
        Some(_) => {
            let mut o = cmd_falsify(&entry.problem, 1e3, &[1e-1, 1e-2], FalsifyStrategy::Sequences, seed)?;
            o.result["facts"] = to_value(&entry.facts)?;
            o
        }
        None => {
            let budgets = Budgets { seed, ..Budgets::default() };
            analyze(&entry.problem, &budgets, seed, &entry.facts)?
        }
    };
    o.result["id"] = Value::String(entry.id.into());
    o.command = "catalog run";
    Ok(o)
}
