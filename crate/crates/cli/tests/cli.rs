use serde_json::Value;
use std::process::{Command, Output};

const E12: &str = r#"{"n":2,"kind":"ellipsoid","widths":[1,2]}"#;
const E11: &str = r#"{"n":2,"kind":"ellipsoid","widths":[1,1]}"#;

fn ruelle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruelle")).args(args).env("RUELLE_THREADS", "2").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn quantity(report: &Value, name: &str) -> Option<f64> {
    report["quantities"].as_array().unwrap().iter().find(|q| q["name"] == name).and_then(|q| q["value"].as_f64())
}

#[test]
fn toric_ellipsoid_report() {
    let out = ruelle(&["toric", "--region", E12]);
    assert!(out.status.success());
    let r = json(&out);
    assert!((quantity(&r, "ru").unwrap() - 1.5).abs() < 1e-12);
    assert!((quantity(&r, "vol").unwrap() - 1.0).abs() < 1e-12);
    assert!((quantity(&r, "s").unwrap() - 6.0 * std::f64::consts::PI).abs() < 1e-10);
    assert_eq!(quantity(&r, "c"), Some(1.0));
    assert_eq!(r["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn region_from_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("region.json");
    std::fs::write(&spec, E12).unwrap();
    let out_path = dir.path().join("report.json");
    let out = ruelle(&["toric", "--region", spec.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["command"], "toric");
}

#[test]
fn reports_are_deterministic() {
    let args = ["estimate-flow", "--region", E12, "--T", "10", "--samples", "20", "--seed", "7"];
    let a = ruelle(&args);
    let b = ruelle(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = ruelle(&["counterexample", "--region", E11]);
    let d = ruelle(&["counterexample", "--region", E11]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["estimate-flow", "--region", E12, "--T", "10", "--samples", "20"];
    let a = Command::new(env!("CARGO_BIN_EXE_ruelle")).args(args).env("RUELLE_THREADS", "1").output().unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_ruelle")).args(args).env("RUELLE_THREADS", "3").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn zero_time_is_diagnostic_only() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("trace.csv");
    let out = ruelle(&["estimate-flow", "--region", E12, "--T", "0", "--dump", dump.to_str().unwrap()]);
    assert!(out.status.success());
    let r = json(&out);
    let est = r["quantities"].as_array().unwrap().iter().find(|q| q["name"] == "estimate").unwrap();
    assert!(est["value"].is_null());
    let trace = std::fs::read_to_string(&dump).unwrap();
    assert!(trace.starts_with("t,z0,z1,z2,z3,u\n"));
}

#[test]
fn malformed_input_exits_one() {
    assert_eq!(ruelle(&["toric", "--region", "{not json"]).status.code(), Some(1));
    assert_eq!(ruelle(&["toric", "--region", r#"{"n":2,"kind":"ellipsoid","widths":[2,1]}"#]).status.code(), Some(1));
    assert_eq!(ruelle(&["toric", "--region", "/nonexistent/region.json"]).status.code(), Some(1));
    assert_eq!(ruelle(&["toric"]).status.code(), Some(1));
    assert_eq!(ruelle(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(ruelle(&["toric", "--region", E12, "--tol", "-1"]).status.code(), Some(1));
    let sandwich = ["check", "sandwich", "--region", E11, "--outer", E11, "--L", "0.5"];
    assert_eq!(ruelle(&sandwich).status.code(), Some(1));
    assert_eq!(ruelle(&["check", "main-inequality", "--region", r#"{"n":2,"kind":"pfamily","widths":[1,1],"p":0.5}"#]).status.code(), Some(1));
}

#[test]
fn infeasible_counterexample_exits_two() {
    let out = ruelle(&["counterexample", "--region", E11, "--c-target", "1e300"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no feasible A"));
}

#[test]
fn failed_assertion_exits_three() {
    let p3 = r#"{"n":2,"kind":"pfamily","widths":[1,2],"p":3}"#;
    let out = ruelle(&["estimate-flow", "--region", p3, "--T", "0.3", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stdout.is_empty());
    let out = ruelle(&["estimate-flow", "--region", E12, "--T", "20", "--samples", "10"]);
    assert!(out.status.success());
}

#[test]
fn counterexample_artifact_round_trips() {
    let out = ruelle(&["counterexample", "--region", E11]);
    assert!(out.status.success());
    let r = json(&out);
    let spec: ruelle_core::CounterexampleSpec = serde_json::from_value(r["artifacts"].clone()).unwrap();
    assert!(spec.verification.passed());
    assert!(spec.verification.ru_result.value >= 50.0);
}

#[test]
fn csv_format() {
    let out = ruelle(&["toric", "--region", E12, "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("kind,name,value,error,provenance\n"));
    assert!(text.contains("quantity,ru,1.5,"));
}

#[test]
fn orbits_and_dyn_convexity() {
    let out = ruelle(&["orbits", "--region", E12, "--t-max", "4"]);
    assert!(out.status.success());
    let r = json(&out);
    let periods: Vec<f64> = r["artifacts"]["records"].as_array().unwrap().iter().map(|o| o["period"].as_f64().unwrap()).collect();
    assert_eq!(periods, [1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0]);
    let out = ruelle(&["check", "dyn-convexity", "--region", E12, "--t-max", "6"]);
    assert!(out.status.success());
}

#[test]
fn documented_command_examples() {
    let out = ruelle(&["counterexample", "--region", E11, "--c-target", "0"]);
    assert!(out.status.success());
    let r = json(&out);
    assert!(r["artifacts"]["a"].is_null());
    assert_eq!(r["artifacts"]["result"], r["config"]["region"]);

    let out = ruelle(&["counterexample", "--region", E11, "--c-target", "1e6", "--epsilon", "1e-12"]);
    assert_eq!(out.status.code(), Some(2));

    let p_half = r#"{"n":2,"kind":"pfamily","widths":[1,2],"p":0.5}"#;
    assert!(ruelle(&["check", "dyn-convexity", "--region", p_half]).status.success());

    let e22 = r#"{"n":2,"kind":"ellipsoid","widths":[2,2]}"#;
    let out = ruelle(&["check", "sandwich", "--region", E11, "--outer", e22, "--L", "2"]);
    assert!(out.status.success());
    let r = json(&out);
    assert!((quantity(&r, "s_inner").unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    assert!((quantity(&r, "s_outer").unwrap() - 8.0 * std::f64::consts::PI).abs() < 1e-9);
}
