//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
//! 3 domain verdict (a trivial solution is not simple, or a start point is
//! singular), 4 a comparison exceeded its tolerance.

mod config;
mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::builtin::Builtin;
use crate::continuation::{
    check_branch, eigenpair_scan, trace_branch, trace_secondary, Branch, BranchEvent, ContinuationSettings,
    Orientation, ScanWindow, Termination,
};
use crate::error::Error;
use crate::oracles::{distance_to_family, OracleFamily};
use crate::parallel::Execution;
use crate::simplicity::check_simple;

pub use config::{
    BuiltinRef, CompareConfig, InlineProblem, LoadedProblem, ProblemSource, RunConfig, ScanConfig, StartPoint,
    TrivialSelector,
};
pub use table::{branch_csv, parse_branch_csv, polylines_csv, read_branch_csv, zero_cells_csv, BranchRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

const DEFAULT_OUT_DIR: &str = "eigbranch-out";

#[derive(Debug, Parser)]
#[command(name = "eigbranch", version, about = "Trace solution branches of perturbed eigenvalue problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for tables and summaries.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Initial direction of the trace: `+` or `-`.
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "+|-")]
    orient: Option<String>,
    /// Continuation setting override, repeatable.
    #[arg(long = "settings", global = true, value_name = "KEY=VAL")]
    settings: Vec<String>,
    /// Also trace the secondary branches through every branch point.
    #[arg(long, global = true)]
    secondary_branches: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify whether a trivial solution is simple.
    CheckSimple,
    /// Trace the branch through a start point.
    Trace,
    /// Contour the eigenpair set over an (eps, lambda) window.
    Scan,
    /// Compare a branch table against the closed-form solution families.
    CompareOracle {
        /// Branch table written by `trace`.
        #[arg(long, value_name = "PATH")]
        branch: PathBuf,
        /// Only compare against this family.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the built-in problems, trivial-solution labels and oracle families.
    ListExamples,
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_) | Error::NotTrivial { .. } => {
                EXIT_USAGE
            }
            Error::SingularStart { .. } | Error::Transversality { .. } => EXIT_VERDICT,
            Error::Numerical(_) | Error::Evaluation(_) | Error::CorrectionFailure { .. } => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    if let Command::ListExamples = cli.command {
        return list_examples(out);
    }
    let path = cli
        .common
        .config
        .as_deref()
        .ok_or_else(|| usage("--config PATH is required"))?;
    let cfg = RunConfig::load(path)?;
    let loaded = cfg.load_problem()?;
    match &cli.command {
        Command::CheckSimple => cmd_check_simple(&cfg, &loaded, &cli.common, out),
        Command::Trace => cmd_trace(&cfg, &loaded, &cli.common, out),
        Command::Scan => cmd_scan(&cfg, &loaded, &cli.common, out),
        Command::CompareOracle { branch, family, tol } => {
            cmd_compare_oracle(&cfg, &loaded, branch, family.as_deref(), *tol, out)
        }
        Command::ListExamples => unreachable!(),
    }
}

fn emit(out: &mut dyn Write, doc: &Value) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json values serialize");
    writeln!(out, "{text}").map_err(|e| usage(format!("cannot write output: {e}")))
}

fn out_dir(common: &Common) -> std::result::Result<PathBuf, Failure> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_check_simple(cfg: &RunConfig, loaded: &LoadedProblem, common: &Common, out: &mut dyn Write) -> CmdResult {
    let sel = cfg
        .check_simple
        .as_ref()
        .ok_or_else(|| usage("config has no check_simple section"))?;
    let (x, lambda) = sel.resolve(loaded)?;
    let rep = check_simple(&loaded.problem, &x, lambda, &cfg.simplicity)?;
    let mut doc = Map::new();
    doc.insert("problem".into(), json!(loaded.problem.label()));
    doc.insert("lambda_star".into(), json!(lambda));
    doc.insert("kernel_dim".into(), json!(rep.kernel_dim));
    doc.insert("kernel_alignment".into(), json!(rep.kernel_alignment));
    doc.insert("c_xstar_norm".into(), json!(rep.c_xstar_norm));
    doc.insert("ls_residual".into(), json!(rep.ls_residual));
    doc.insert("dpsi_margin".into(), json!(rep.dpsi_margin));
    doc.insert("verdict".into(), json!(rep.verdict.as_str()));
    if let Value::Object(tols) = json!(rep.tolerances) {
        for (k, v) in tols {
            doc.insert(format!("tol_{k}"), v);
        }
    }
    let doc = Value::Object(doc);
    emit(out, &doc)?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join("simplicity.json"), &serde_json::to_string_pretty(&doc).expect("json"))?;
    }
    Ok(if rep.verdict.is_simple() { EXIT_OK } else { EXIT_VERDICT })
}

fn settings(cfg: &RunConfig, common: &Common) -> std::result::Result<ContinuationSettings, Failure> {
    let mut s = cfg.settings.clone();
    for kv in &common.settings {
        s.apply_override(kv)?;
    }
    s.validate()?;
    Ok(s)
}

fn orientation(cfg: &RunConfig, common: &Common) -> std::result::Result<Orientation, Failure> {
    match common.orient.as_deref().or(cfg.orient.as_deref()) {
        None => Ok(Orientation::Forward),
        Some(s) => Orientation::parse(s).ok_or_else(|| usage(format!("orientation must be + or -, got '{s}'"))),
    }
}

fn event_json(e: &BranchEvent) -> Value {
    json!({
        "kind": e.kind,
        "eps": e.location.eps,
        "lambda": e.location.lambda,
        "x": e.location.x.as_slice(),
        "step_index": e.step_index,
        "arclength": e.arclength,
        "degraded": e.degraded,
    })
}

fn branch_summary(loaded: &LoadedProblem, b: &Branch, cfg: &ContinuationSettings) -> std::result::Result<Value, Failure> {
    let check = check_branch(&loaded.problem, b, cfg)?;
    Ok(json!({
        "problem": loaded.problem.label(),
        "termination": b.termination,
        "steps": b.points.len(),
        "arclength": b.arclength,
        "winding_number": b.winding_number(),
        "crossing_lambdas": b.crossing_lambdas(),
        "events": b.events.iter().map(event_json).collect::<Vec<_>>(),
        "check": check,
    }))
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::ClosedLoop | Termination::Escaped => EXIT_OK,
        Termination::SingularStall | Termination::MaxSteps => EXIT_NUMERICAL,
    }
}

fn cmd_trace(cfg: &RunConfig, loaded: &LoadedProblem, common: &Common, out: &mut dyn Write) -> CmdResult {
    let start = cfg
        .start
        .as_ref()
        .ok_or_else(|| usage("config has no start section"))?
        .resolve(loaded)?;
    let settings = settings(cfg, common)?;
    let orient = orientation(cfg, common)?;
    let branch = trace_branch(&loaded.problem, &start, orient, &settings)?;
    let dir = out_dir(common)?;
    write_file(&dir.join("branch.csv"), &branch_csv(&branch))?;
    let mut summary = branch_summary(loaded, &branch, &settings)?;
    summary["table"] = json!("branch.csv");
    let mut code = termination_code(branch.termination);
    if common.secondary_branches {
        let mut secondary = Vec::new();
        for (i, ev) in branch.branch_points().enumerate() {
            for o in [Orientation::Forward, Orientation::Backward] {
                let tag = if o == Orientation::Forward { "plus" } else { "minus" };
                let file = format!("secondary_{i}_{tag}.csv");
                let mut entry = json!({
                    "branch_point": i,
                    "eps": ev.location.eps,
                    "lambda": ev.location.lambda,
                    "orient": tag,
                });
                match trace_secondary(&loaded.problem, ev, o, &settings) {
                    Ok(sb) => {
                        write_file(&dir.join(&file), &branch_csv(&sb))?;
                        code = code.max(termination_code(sb.termination));
                        entry["table"] = json!(file);
                        entry["summary"] = branch_summary(loaded, &sb, &settings)?;
                    }
                    Err(e) => {
                        entry["error"] = json!(e.to_string());
                        code = code.max(Failure::from(e).code);
                    }
                }
                secondary.push(entry);
            }
        }
        summary["secondary"] = Value::Array(secondary);
    }
    write_file(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("json"),
    )?;
    emit(out, &summary)?;
    Ok(code)
}

fn cmd_scan(cfg: &RunConfig, loaded: &LoadedProblem, common: &Common, out: &mut dyn Write) -> CmdResult {
    let scan = cfg.scan.as_ref().ok_or_else(|| usage("config has no scan section"))?;
    let window = ScanWindow::new(scan.eps, scan.lambda, scan.grid)?;
    let res = eigenpair_scan(&loaded.problem, &window, Execution::default())?;
    let dir = out_dir(common)?;
    write_file(&dir.join("contour.csv"), &polylines_csv(&res.polylines))?;
    write_file(&dir.join("zero_cells.csv"), &zero_cells_csv(&res.zero_cells))?;
    let doc = json!({
        "problem": loaded.problem.label(),
        "grid": [scan.grid.0, scan.grid.1],
        "polylines": res.polylines.len(),
        "closed": res.polylines.iter().map(|p| p.closed).collect::<Vec<_>>(),
        "vertices": res.polylines.iter().map(|p| p.points.len()).sum::<usize>(),
        "zero_cells": res.zero_cells.len(),
        "table": "contour.csv",
    });
    emit(out, &doc)?;
    Ok(EXIT_OK)
}

fn cmd_compare_oracle(
    cfg: &RunConfig,
    loaded: &LoadedProblem,
    branch: &Path,
    family: Option<&str>,
    tol: Option<f64>,
    out: &mut dyn Write,
) -> CmdResult {
    let builtin = loaded
        .builtin
        .ok_or_else(|| usage("compare-oracle needs a builtin problem"))?;
    let tol = tol.unwrap_or(cfg.compare.tol);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(usage("tolerance must be positive"));
    }
    let labels: Vec<String> = match family.or(cfg.compare.family.as_deref()) {
        Some(f) => vec![f.to_owned()],
        None => OracleFamily::labels_for(builtin).iter().map(|s| s.to_string()).collect(),
    };
    let families = labels
        .iter()
        .map(|l| OracleFamily::for_builtin(l, builtin))
        .collect::<crate::Result<Vec<_>>>()?;
    let points: Vec<_> = read_branch_csv(branch)?.into_iter().map(|r| r.point).collect();
    if points.is_empty() {
        return Err(usage("branch table has no rows"));
    }
    let mut distances = Map::new();
    let mut best: Option<(f64, &str)> = None;
    for f in &families {
        let d = distance_to_family(&points, f, Execution::default())?;
        distances.insert(f.label().into(), json!(d));
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, f.label()));
        }
    }
    let (best_d, best_label) = best.expect("at least one family");
    let pass = best_d <= tol;
    emit(
        out,
        &json!({
            "problem": loaded.problem.label(),
            "branch": branch.display().to_string(),
            "points": points.len(),
            "tolerance": tol,
            "distances": distances,
            "nearest_family": best_label,
            "pass": pass,
        }),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn list_examples(out: &mut dyn Write) -> CmdResult {
    let mut items = Vec::new();
    for (b, note) in [
        (Builtin::Ex41, None),
        (Builtin::Ex42 { modes: 1 }, Some("modes M >= 1; dim 2M+1")),
        (Builtin::Ex43 { modes: 1 }, Some("modes M >= 1; dim 4M+2")),
        (Builtin::Ex44, None),
    ] {
        let labels: Vec<String> = b.trivial_solutions()?.into_iter().map(|(l, _)| l).collect();
        items.push(json!({
            "name": b.name(),
            "modes": note,
            "trivial_solutions": labels,
            "oracle_families": OracleFamily::labels_for(b),
        }));
    }
    emit(out, &Value::Array(items))?;
    Ok(EXIT_OK)
}
