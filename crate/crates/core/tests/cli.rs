use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RANSOMWARE: &str = r#"{
  "model": { "family": "binomial_ransomware", "computers": 10, "damping": 0.8 },
  "insurer": { "kind": "avar", "level": 0.95 },
  "user": { "kind": "avar", "level": 0.5 },
  "costs": { "unit_cost": 2.0 },
  "grids": { "solver_points": 201, "axiom_trials": 200 }
}"#;

struct Scenario {
    dir: TempDir,
    config: PathBuf,
}

impl Scenario {
    fn new(text: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("scenario.json");
        fs::write(&config, text).unwrap();
        Self { dir, config }
    }

    fn out(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_riskcontract"))
            .args(args)
            .arg(&self.config)
            .arg("--out")
            .arg(self.out())
            .output()
            .unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out().join(name)).unwrap()).unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_report() {
    let s = Scenario::new(RANSOMWARE);
    let o = s.run(&["solve", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = s.json("solve_report.json");
    for key in [
        "x0", "U_bar", "x_star", "c_star", "q_star", "insurer_objective", "ir_gap", "c1_holds",
        "c2_holds", "security_enhanced", "warnings",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let c = report["c_star"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert!(report["q_star"].as_f64().unwrap() > 0.0);
    assert!(report["ir_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(report["run"]["seed"], 5);
    assert_eq!(report["run"]["tolerances"]["equality"], 1e-9);
}

#[test]
fn non_positive_cost_is_a_config_error() {
    let s = Scenario::new(&RANSOMWARE.replace("\"unit_cost\": 2.0", "\"unit_cost\": 0.0"));
    assert_eq!(s.run(&["solve"]).status.code(), Some(1));
    let s = Scenario::new(&RANSOMWARE.replace("\"unit_cost\": 2.0", "\"unit_cost\": -1"));
    assert_eq!(s.run(&["solve"]).status.code(), Some(1));
}

#[test]
fn malformed_config_reports_line_and_column() {
    let s = Scenario::new("{\n  \"model\": {\n    \"family\": \"binomial_ransomware\",,\n  }\n}");
    let o = s.run(&["solve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario.json:3:"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_config_errors() {
    let s = Scenario::new(&RANSOMWARE.replace("\"costs\"", "\"price\""));
    let o = s.run(&["solve"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn all_infeasible_instance_exits_two_with_reasons() {
    let text = RANSOMWARE
        .replace(r#"{ "kind": "avar", "level": 0.95 }"#, r#"{ "kind": "expectation" }"#)
        .replace(r#"{ "kind": "avar", "level": 0.5 }"#, r#"{ "kind": "expectation" }"#)
        .replace("\"unit_cost\": 2.0", "\"unit_cost\": 20.0");
    let s = Scenario::new(&text);
    let o = s.run(&["solve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("x in [0, 0]: risk not decreasing (1 point)"), "{err}");
    assert!(err.contains("x in [0.005, 1]: under-sensitive") && err.contains("200 points"), "{err}");
    assert!(!s.out().join("solve_report.json").exists());

    let o = s.run(&["solve", "--verbose"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).lines().filter(|l| l.contains("x = ")).count() >= 201);
}

#[test]
fn coverage_sweep_has_one_row_per_level() {
    let s = Scenario::new(RANSOMWARE);
    let o = s.run(&["sweep", "--kind", "coverage"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(s.out().join("coverage_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,x,c,feasible"));
    assert_eq!(lines.count(), 41);
    let sidecar = s.json("coverage_sweep.json");
    assert_eq!(sidecar["sweep"]["mode"]["mode"], "at-baseline");
    assert!(sidecar["segments"]["segments"].as_array().unwrap().len() >= 1);
    assert_eq!(sidecar["segments"]["within_segment_violations"], 0);
}

#[test]
fn fixed_action_coverage_mode() {
    let text = RANSOMWARE.replace(
        "\"axiom_trials\": 200",
        "\"axiom_trials\": 200, \"coverage_mode\": { \"mode\": \"fixed-x\", \"x\": 0.7 }, \"avar_levels\": [0.1, 0.2]",
    );
    let s = Scenario::new(&text);
    assert_eq!(s.run(&["sweep", "--kind", "coverage"]).status.code(), Some(0));
    let csv = fs::read_to_string(s.out().join("coverage_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0.7")));
}

#[test]
fn single_point_premium_sweep() {
    let text = RANSOMWARE.replace("\"axiom_trials\": 200", "\"axiom_trials\": 200, \"x_grid\": [0.8]");
    let s = Scenario::new(&text);
    let o = s.run(&["sweep", "--kind", "premium"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(s.out().join("premium_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("x,c,q,feasible\n0.8,"));
    // one row is too few for a segment analysis; the sidecar says so
    let sidecar = s.json("premium_sweep.json");
    assert!(sidecar["segments"].is_null());
    assert!(sidecar["segment_error"].as_str().unwrap().contains("at least 2"));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let s = Scenario::new(RANSOMWARE);
    let o = Command::new(env!("CARGO_BIN_EXE_riskcontract"))
        .args(["sweep", "--kind", "coverage"])
        .arg(&s.config)
        .arg("--out")
        .arg(s.out().join("does-not-exist"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"));
}

#[test]
fn config_output_dir_resolves_next_to_config() {
    let s = Scenario::new(&RANSOMWARE.replacen('{', "{\n  \"output\": { \"dir\": \"reports\" },", 1));
    fs::create_dir(s.out().join("reports")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_riskcontract"))
        .arg("solve")
        .arg(&s.config)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(s.out().join("reports/solve_report.json").exists());
}

#[test]
fn check_passes_on_case_study() {
    let s = Scenario::new(RANSOMWARE);
    let o = s.run(&["check", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = s.json("check_report.json");
    assert_eq!(report["passed"], true);
    assert_eq!(report["fosd"]["holds"], true);
    // the binomial pmf is not convex in the action; reported, not fatal
    assert_eq!(report["density_convexity"]["holds"], false);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);
    assert_eq!(report["axioms"][0]["seed"], 3);
}

#[test]
fn check_rejects_non_coherent_semideviation() {
    let text = RANSOMWARE.replace(
        r#"{ "kind": "avar", "level": 0.5 }"#,
        r#"{ "kind": "absolute_semideviation", "theta": 1.5 }"#,
    );
    let s = Scenario::new(&text);
    let o = s.run(&["check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("user"), "{}", stderr(&o));
}

#[test]
fn check_flags_reversed_family() {
    let csv = "x,0,5,10\n0,0.8,0.1,0.1\n1,0.2,0.3,0.5\n";
    let s = Scenario::new(
        r#"{
  "model": { "family": "tabulated", "csv": "reversed.csv" },
  "insurer": { "kind": "avar", "level": 0.9 },
  "user": { "kind": "expectation" },
  "costs": { "unit_cost": 1.0 },
  "grids": { "axiom_trials": 100 }
}"#,
    );
    fs::write(s.out().join("reversed.csv"), csv).unwrap();
    let o = s.run(&["check"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("dominance"));
    let report = s.json("check_report.json");
    assert_eq!(report["fosd"]["holds"], false);
    assert_eq!(report["passed"], false);
}

#[test]
fn sweeps_require_the_ransomware_model() {
    let s = Scenario::new(
        r#"{
  "model": { "family": "tabulated", "support": [0, 1], "actions": [0, 1], "rows": [[0.5, 0.5], [0.9, 0.1]] },
  "insurer": { "kind": "avar", "level": 0.9 },
  "user": { "kind": "avar", "level": 0.5 },
  "costs": { "unit_cost": 0.1 }
}"#,
    );
    assert_eq!(s.run(&["sweep", "--kind", "premium"]).status.code(), Some(1));
}
