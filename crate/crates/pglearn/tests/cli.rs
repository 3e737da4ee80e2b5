use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pglearn::io::write_dataset;
use pglearn_core::dataset::synthetic;
use pglearn_core::report::RunReport;
use serde_json::Value;

fn pglearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pglearn")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = pglearn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn blobs(dir: &Path) -> PathBuf {
    let spec = synthetic::BlobSpec { n: 80, classes: 3, dims: 3, center_scale: 2.5, spread: 1.0 };
    let ds = synthetic::gaussian_blobs(&spec, 3).unwrap();
    let p = dir.join("blobs.csv");
    write_dataset(&p, &ds).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eight_threads_rate_two_budget_sixteen_examines_24_configs() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let out = dir.path().join("run");
    let summary = ok_json(&[
        "run", "--dataset", s(&data), "--threads", "8", "--rate", "2", "--budget", "16", "--unit", "iters:1",
        "--seed", "4", "--out", s(&out),
    ]);
    assert_eq!(summary["configs"], 24);
    assert_eq!(summary["method"], "pg-learn");
    let report: RunReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.configs.len(), 24);
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert!(curve.starts_with("time,best_val_acc,test_acc"));
    assert!(out.join("split.json").exists() && out.join("runspec.json").exists());
}

#[test]
fn rerunning_a_saved_spec_reproduces_the_best_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let first = dir.path().join("first");
    let a = ok_json(&[
        "run", "--dataset", s(&data), "--threads", "4", "--budget", "4", "--unit", "iters:2", "--seed", "9",
        "--out", s(&first),
    ]);
    // same run description, new output directory
    let mut spec: Value = serde_json::from_str(&fs::read_to_string(first.join("runspec.json")).unwrap()).unwrap();
    let second = dir.path().join("second");
    spec["out"] = Value::String(s(&second).into());
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let b = ok_json(&["run", "--spec", s(&spec_path)]);
    assert_eq!(a["best"], b["best"]);
    assert_eq!(fs::read(first.join("split.json")).unwrap(), fs::read(second.join("split.json")).unwrap());
}

#[test]
fn baselines_run_with_the_same_step_budget() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    for method in ["grid", "random"] {
        let out = dir.path().join(method);
        let r = ok_json(&[
            "run", "--dataset", s(&data), "--method", method, "--threads", "2", "--budget", "3", "--unit",
            "iters:2", "--out", s(&out),
        ]);
        assert_eq!(r["method"], method);
        assert_eq!(r["work"], 12);
    }
}

#[test]
fn noise_injection_split_evaluate_and_report_fit_together() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let noisy = dir.path().join("noisy.csv");
    let meta = dir.path().join("noise.json");
    let n = ok_json(&["inject-noise", "--dataset", s(&data), "--fraction", "1", "--seed", "2", "--out", s(&noisy), "--meta", s(&meta)]);
    assert_eq!(n["noise_columns"], serde_json::json!([3, 4, 5]));

    let split = dir.path().join("split.json");
    let sp = ok_json(&["split", "--dataset", s(&noisy), "--labeled-fraction", "0.25", "--seed", "2", "--out", s(&split)]);
    assert_eq!(sp["labeled"].as_u64().unwrap() + sp["unlabeled"].as_u64().unwrap(), 80);
    assert!(sp["validation"].as_u64().unwrap() < sp["labeled"].as_u64().unwrap());

    let run = dir.path().join("run");
    ok_json(&[
        "run", "--dataset", s(&noisy), "--split", s(&split), "--noise", s(&meta), "--threads", "2", "--budget", "2",
        "--unit", "iters:2", "--out", s(&run),
    ]);
    let report = run.join("report.json");
    let ev = ok_json(&["evaluate", "--dataset", s(&noisy), "--split", s(&split), "--report", s(&report)]);
    assert_eq!(ev["test_points"], sp["unlabeled"]);
    assert!(ev["test_accuracy"].as_f64().unwrap() >= 0.0);

    let tables = dir.path().join("tables");
    let rep = ok_json(&["report", "--report", s(&report), "--noise", s(&meta), "--out", s(&tables)]);
    assert!(rep["mean_noise"].is_f64());
    let weights = fs::read_to_string(tables.join("weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 7);
    assert_eq!(weights.lines().filter(|l| l.contains(",noise,")).count(), 3);
    assert!(tables.join("curve.csv").exists() && tables.join("weights.json").exists());
}

#[test]
fn evaluate_on_an_edgeless_graph_counts_unreached_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let split = dir.path().join("split.json");
    ok_json(&["split", "--dataset", s(&data), "--seed", "1", "--out", s(&split)]);
    // bandwidths this narrow underflow every weight to zero
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"k": 3, "a": [1e9, 1e9, 1e9]}"#).unwrap();
    let ev = ok_json(&["evaluate", "--dataset", s(&data), "--split", s(&split), "--config", s(&config)]);
    assert_eq!(ev["unreached"], ev["test_points"]);
    assert_eq!(ev["edges"], 0);
}

#[test]
fn failures_exit_nonzero_with_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let missing = dir.path().join("missing.csv");
    let bad_cfg = dir.path().join("cfg.json");
    fs::write(&bad_cfg, r#"{"k": 3, "a": [1.0]}"#).unwrap();
    let split = dir.path().join("split.json");
    ok_json(&["split", "--dataset", s(&data), "--out", s(&split)]);
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["run", "--dataset", s(&missing), "--out", "x"], "io"),
        (vec!["run", "--dataset", s(&data), "--method", "annealing", "--out", "x"], "usage"),
        (vec!["run", "--dataset", s(&data), "--unit", "hours:3", "--out", "x"], "usage"),
        (vec!["evaluate", "--dataset", s(&data), "--split", s(&split), "--config", s(&bad_cfg)], "invalid_input"),
        (vec!["frobnicate"], "usage"),
    ];
    for (args, kind) in cases {
        let out = pglearn(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        let v: Value = serde_json::from_str(err.trim_end()).unwrap();
        assert_eq!(v["error"], kind, "{args:?}: {v}");
        assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn help_exits_cleanly() {
    let out = pglearn(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("inject-noise"));
}
