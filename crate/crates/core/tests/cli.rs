use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eigbranch::builtin::Builtin;
use eigbranch::cli::read_branch_csv;
use eigbranch::continuation::check_points;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eigbranch"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, json: &str) -> String {
        write_config(self.dir.path(), name, json).to_str().unwrap().to_owned()
    }

    fn out(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_owned()
    }
}

const EX41: &str = r#"{"problem": {"builtin": {"name": "ex41"}}, "start": {"trivial": "e1"}, "check_simple": {"trivial": "e1"},
                       "scan": {"eps": [-2, 2], "lambda": [-2, 2], "grid": [128, 128]}}"#;

#[test]
fn check_simple_exit_codes() {
    let f = Fixture::new();
    let c = f.config("a.json", r#"{"problem": {"builtin": {"name": "ex41"}}, "check_simple": {"explicit": {"x_star": [1, 0], "lambda_star": 1}}}"#);
    let out = run(&["check-simple", "--config", &c]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["verdict"], "Simple");

    let c = f.config("b.json", r#"{"problem": {"builtin": {"name": "ex44"}}, "check_simple": {"explicit": {"x_star": [0, 1], "lambda_star": 0}}}"#);
    let out = run(&["check-simple", "--config", &c]);
    assert_eq!(code(&out), 3);
    let doc = json(&out);
    assert_eq!(doc["verdict"], "NotSimple_Solvable");
    // flat document: no nested objects
    assert!(doc.as_object().unwrap().values().all(|v| !v.is_object() && !v.is_array()));

    let c = f.config("c.json", r#"{"problem": {"inline": {"dim": 2, "l": [[1, 0, 0], [0, 1, 0]], "c": [[1, 0], [0, 1]]}}, "check_simple": {"explicit": {"x_star": [1, 0], "lambda_star": 1}}}"#);
    assert_eq!(code(&run(&["check-simple", "--config", &c])), 1);

    let c = f.config("d.json", r#"{"problem": {"builtin": {"name": "ex41"}}, "check_simple": {"explicit": {"x_star": [1, 0], "lambda_star": 0.3}}}"#);
    assert_eq!(code(&run(&["check-simple", "--config", &c])), 1);
}

#[test]
fn trace_round_trip() {
    let f = Fixture::new();
    let c = f.config("ex41.json", EX41);
    let out_dir = f.out("t41");
    let out = run(&["trace", "--config", &c, "--out", &out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["termination"], "ClosedLoop");
    assert_eq!(summary["crossing_lambdas"].as_array().unwrap().len(), 4);
    assert_eq!(summary["winding_number"].as_i64().unwrap().abs(), 2);
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&out_dir).join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);

    let rows = read_branch_csv(&Path::new(&out_dir).join("branch.csv")).unwrap();
    assert_eq!(rows.len() as u64, summary["steps"].as_u64().unwrap());
    assert!(rows.windows(2).all(|w| w[1].step == w[0].step + 1 && w[1].arclength > w[0].arclength));
    let points: Vec<_> = rows.into_iter().map(|r| r.point).collect();
    let p = Builtin::Ex41.problem().unwrap();
    let chk = check_points(&p, &points).unwrap();
    assert!(chk.max_phi_norm <= 1e-10);
    assert!(chk.max_sphere_defect <= 1e-9);

    let cmp = run(&["compare-oracle", "--config", &c, "--branch", &format!("{out_dir}/branch.csv")]);
    assert_eq!(code(&cmp), 0);
    assert!(json(&cmp)["distances"]["ex41"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn trace_orientation_flag() {
    let f = Fixture::new();
    let c = f.config("ex41.json", EX41);
    let plus = run(&["trace", "--config", &c, "--out", &f.out("p"), "--orient", "+"]);
    let minus = run(&["trace", "--config", &c, "--out", &f.out("m"), "--orient", "-"]);
    assert_eq!(code(&plus), 0);
    assert_eq!(code(&minus), 0);
    let first = |d: &str| read_branch_csv(&Path::new(&f.out(d)).join("branch.csv")).unwrap()[1].point.eps;
    assert!(first("p") > 0.0 && first("m") < 0.0);
    assert_eq!(code(&run(&["trace", "--config", &c, "--out", &f.out("x"), "--orient", "sideways"])), 1);
}

#[test]
fn trace_settings_overrides() {
    let f = Fixture::new();
    let c = f.config("ex41.json", EX41);
    let out = run(&["trace", "--config", &c, "--out", &f.out("s"), "--settings", "h0=0.02", "--settings", "h_max=0.1"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["steps"].as_u64().unwrap() > 64);
    assert_eq!(code(&run(&["trace", "--config", &c, "--out", &f.out("s"), "--settings", "nope=1"])), 1);
    assert_eq!(code(&run(&["trace", "--config", &c, "--out", &f.out("s"), "--settings", "h0=-1"])), 1);
    let out = run(&["trace", "--config", &c, "--out", &f.out("s"), "--settings", "max_steps=5"]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["termination"], "MaxSteps");
}

#[test]
fn trace_examples() {
    let f = Fixture::new();
    let c = f.config(
        "h.json",
        r#"{"problem": {"builtin": {"name": "ex42", "modes": 8}}, "start": {"oracle": {"family": "ex42_left", "param": 1.0}}}"#,
    );
    let out = run(&["trace", "--config", &c, "--out", &f.out("h")]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["termination"], "Escaped");

    let c = f.config(
        "g.json",
        r#"{"problem": {"builtin": {"name": "ex43", "modes": 2}}, "start": {"trivial": "alpha=pi/2"}}"#,
    );
    let out = run(&["trace", "--config", &c, "--out", &f.out("g")]);
    assert_eq!(code(&out), 0);
    let s = json(&out);
    assert_eq!(s["termination"], "ClosedLoop");
    assert_eq!(s["crossing_lambdas"].as_array().unwrap().len(), 4);

    let c = f.config(
        "n.json",
        r#"{"problem": {"builtin": {"name": "ex43", "modes": 2}}, "start": {"trivial": "sqrt2"}}"#,
    );
    let out = run(&["trace", "--config", &c, "--out", &f.out("n")]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel"));
}

#[test]
fn trace_secondary_branches_flag() {
    let f = Fixture::new();
    let c = f.config(
        "s.json",
        r#"{"problem": {"builtin": {"name": "ex42", "modes": 2}}, "start": {"trivial": "one"}}"#,
    );
    let dir = f.out("sec");
    let out = run(&["trace", "--config", &c, "--out", &dir, "--secondary-branches"]);
    assert_eq!(code(&out), 0);
    let sec = json(&out)["secondary"].as_array().unwrap().clone();
    assert_eq!(sec.len(), 4);
    for e in &sec {
        assert_eq!(e["summary"]["termination"], "Escaped");
        assert!(Path::new(&dir).join(e["table"].as_str().unwrap()).exists());
    }
    let plain = run(&["trace", "--config", &c, "--out", &f.out("plain")]);
    assert!(json(&plain).get("secondary").is_none());
}

#[test]
fn scan_outputs() {
    let f = Fixture::new();
    let c = f.config("ex41.json", EX41);
    let dir = f.out("scan");
    let out = run(&["scan", "--config", &c, "--out", &dir]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["polylines"], 1);
    let text = std::fs::read_to_string(Path::new(&dir).join("contour.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,lambda"));
    for l in lines.filter(|l| !l.is_empty()) {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[0].hypot(v[1]) - 1.0).abs() < 2.0 * 4.0 / 128.0);
    }
    assert!(Path::new(&dir).join("zero_cells.csv").exists());

    let c = f.config(
        "ex42.json",
        r#"{"problem": {"builtin": {"name": "ex42", "modes": 4}}, "scan": {"eps": [-3, 3], "lambda": [-3, 3]}}"#,
    );
    assert_eq!(code(&run(&["scan", "--config", &c, "--out", &dir])), 1);
    let c = f.config(
        "small.json",
        r#"{"problem": {"builtin": {"name": "ex41"}}, "scan": {"eps": [-3, 3], "lambda": [-3, 3], "grid": [8, 8]}}"#,
    );
    assert_eq!(code(&run(&["scan", "--config", &c, "--out", &dir])), 1);
}

#[test]
fn compare_oracle_failures() {
    let f = Fixture::new();
    let c41 = f.config("ex41.json", EX41);
    let dir = f.out("t");
    assert_eq!(code(&run(&["trace", "--config", &c41, "--out", &dir])), 0);
    let table = format!("{dir}/branch.csv");

    // planted defect
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut cols: Vec<String> = lines[5].split(',').map(str::to_owned).collect();
    let eps: f64 = cols[2].parse().unwrap();
    cols[2] = format!("{}", eps + 1e-3);
    lines[5] = cols.join(",");
    let bad = format!("{dir}/bad.csv");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let out = run(&["compare-oracle", "--config", &c41, "--branch", &bad]);
    assert_eq!(code(&out), 4);
    assert_eq!(json(&out)["pass"], false);

    // a looser tolerance accepts it
    assert_eq!(code(&run(&["compare-oracle", "--config", &c41, "--branch", &bad, "--tol", "1e-2"])), 0);

    let c43 = f.config(
        "ex43.json",
        r#"{"problem": {"builtin": {"name": "ex43", "modes": 2}}, "start": {"trivial": "alpha=pi/2"}}"#,
    );
    let dir43 = f.out("t43");
    assert_eq!(code(&run(&["trace", "--config", &c43, "--out", &dir43])), 0);
    let t43 = format!("{dir43}/branch.csv");
    assert_eq!(code(&run(&["compare-oracle", "--config", &c43, "--branch", &t43])), 0);
    assert_eq!(code(&run(&["compare-oracle", "--config", &c43, "--branch", &t43, "--family", "ex41"])), 1);
    assert_eq!(code(&run(&["compare-oracle", "--config", &c41, "--branch", &t43])), 1);
    assert_eq!(code(&run(&["compare-oracle", "--config", &c41, "--branch", &table, "--family", "bogus"])), 1);
    assert_eq!(code(&run(&["compare-oracle", "--config", &c41, "--branch", "/nonexistent.csv"])), 1);
}

#[test]
fn usage_errors() {
    let f = Fixture::new();
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["bogus"])), 1);
    assert_eq!(code(&run(&["trace"])), 1);
    assert_eq!(code(&run(&["trace", "--config", "/nonexistent.json"])), 1);
    let c = f.config("u.json", r#"{"problem": {"builtin": {"name": "ex41"}}, "start": {"trivial": "e1"}, "colour": "red"}"#);
    assert_eq!(code(&run(&["trace", "--config", &c, "--out", &f.out("u")])), 1);
    let c = f.config("m.json", r#"{"problem": {"builtin": {"name": "ex41"}}}"#);
    assert_eq!(code(&run(&["trace", "--config", &c, "--out", &f.out("u")])), 1);
    assert_eq!(code(&run(&["check-simple", "--config", &c])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn list_examples_lists_everything() {
    let out = run(&["list-examples"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let names: Vec<&str> = doc.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ex41", "ex42", "ex43", "ex44"]);
    let ex43 = &doc[2];
    assert!(ex43["trivial_solutions"].as_array().unwrap().iter().any(|v| v == "sqrt2"));
}
