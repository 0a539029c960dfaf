//! End-to-end runs of the command-line binary.

use std::process::{Command, Output};

use serde_json::Value;
use weak_transfer::{DiscreteSymbol, KernelSpec};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weak-transfer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn coset_prints_q_and_representatives() {
    let out = run(&["coset", "--matrix", "1,1;0,2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["q"], 2);
    assert_eq!(v["representatives"].as_array().unwrap().len(), 2);

    let out = run(&["coset", "--matrix", "2,0,0;0,2,0;0,0,2"]);
    assert_eq!(json(&out)["q"], 8);
}

#[test]
fn malformed_inputs_exit_nonzero() {
    assert!(!run(&["coset", "--matrix", "1,2;2,4"]).status.success());
    assert!(!run(&["coset", "--matrix", "1,x;0,2"]).status.success());
    let out = run(&["norms", "--kernel", "/definitely/missing.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed": 1, "unknown": true}"#).unwrap();
    assert!(!run(&["suite", "--config", cfg.to_str().unwrap()]).status.success());
    std::fs::write(&cfg, "{ not json").unwrap();
    assert!(!run(&["suite", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn suite_single_check_passes_and_forced_failure_exits_one() {
    let out = run(&["suite", "--check", "partition_of_unity"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"][0]["passed"], true);

    let out = run(&["suite", "--check", "couple_axiom", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["checks"][0]["passed"], false);
    assert!(v["checks"][0]["max_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn suite_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    std::fs::write(&cfg, r#"{"seed": 9, "modules": ["deleeuw-extension"], "tolerances": {"staircase": 0.0}}"#).unwrap();
    let path = cfg.to_str().unwrap();
    // the file's zero tolerance fails the staircase check
    assert_eq!(run(&["suite", "--config", path]).status.code(), Some(1));
    // a flag tolerance wins over the file
    let out = run(&["suite", "--config", path, "--tolerance", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["seed"], 9);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["fejer_truncation", "staircase"]);
}

#[test]
fn every_check_is_reachable_by_name() {
    let out = run(&["suite", "--list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 15);
    for line in text.lines() {
        let name = line.split('\t').next().unwrap();
        assert!(weak_transfer::suite::check_catalog().iter().any(|c| c.0 == name));
    }
}

#[test]
fn norms_report_is_byte_identical_and_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("delta.json");
    let kernel = dir.path().join("tri.json");
    DiscreteSymbol::delta(1).save(&phi).unwrap();
    KernelSpec::triangle(1).save(&kernel).unwrap();
    let args = [
        "norms",
        "--phi",
        phi.to_str().unwrap(),
        "--kernel",
        kernel.to_str().unwrap(),
        "--random",
        "3",
        "--seed",
        "4",
        "--format",
        "csv",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("delta,tri,2,"));
    assert_eq!(text.lines().count(), 1 + 4 + 1);
}

#[test]
fn transfer_check_exact_grid_passes_and_aliasing_grid_is_refused() {
    let out = run(&["transfer-check", "--trials", "5", "--seed", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["u_grid"], 38);
    assert!(v["max_error"].as_f64().unwrap() <= 1e-10);

    let out = run(&["transfer-check", "--trials", "2", "--u-grid", "24"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aliases"));
}

#[test]
fn lattice_verify_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lattice.json");
    let out = run(&[
        "lattice-verify",
        "--matrix",
        "1,1;0,2",
        "--grid",
        "24",
        "--trials",
        "4",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["histograms_equal"], true);
    assert_eq!(v["q"], 2);

    // degree-3 inputs dilated by B leave a 12-point band
    let out = run(&["lattice-verify", "--matrix", "1,1;0,2", "--grid", "12", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn deleeuw_report_tracks_staircase() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = dir.path().join("tri.json");
    let report = dir.path().join("out.json");
    KernelSpec::triangle(1).save(&kernel).unwrap();
    let out = run(&[
        "deleeuw",
        "--phi-family",
        kernel.to_str().unwrap(),
        "--eps",
        "0.5,0.25,0.125",
        "--p",
        "2",
        "--grid",
        "256",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let dev: Vec<f64> = v["sup_deviation"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (d, e) in dev.iter().zip([0.5, 0.25, 0.125]) {
        assert!(*d <= e);
    }
    assert_eq!(v["monitor"]["len"], 3);
}

#[test]
fn csv_format_flattens_scalars() {
    let out = run(&["coset", "--matrix", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("q,2\n"));
}
