use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn loopflux(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopflux")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = loopflux(&["oracle", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(loopflux(&["oracle", "--bogus"]).status.code(), Some(2));
    assert_eq!(loopflux(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_configs_exit_2() {
    let bad = scratch("bad.cfg", "topology = torus\n");
    let out = loopflux(&["oracle", "--config", bad.to_str().unwrap(), "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("torus"));
    let out = loopflux(&["oracle", "--config", "/nonexistent/file", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn series_matches_oracle_on_the_dumbbell() {
    let cfg = scratch("dumbbell.cfg", "topology = dumbbell\nx = 0,0,0\ny = 1,0,0\n");
    let out = loopflux(&["series", "--config", cfg.to_str().unwrap(), "--beta", "1/2", "--max-edges", "16", "--tolerance", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert!(v["abs_err"].as_f64().unwrap() < 1e-8);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(&keys[..3], ["schema", "command", "passed"]);
}

#[test]
fn switch_verify_reports_block_counts() {
    let out = loopflux(&["switch-verify", "--mode", "undirected", "--max-edges", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["report"];
    assert_eq!(r["lambda"], r["gamma"]);
    assert!(!r["blocks"].as_array().unwrap().is_empty());
    for mode in ["directed", "adverse"] {
        let out = loopflux(&["switch-verify", "--mode", mode, "--max-edges", "8"]);
        assert_eq!(out.status.code(), Some(0), "{mode}");
    }
}

#[test]
fn cost_guard_is_named_and_exits_2() {
    let out = loopflux(&["pairing-verify", "--checks", "switch", "--max-edges", "40"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cost guard `max_edges`"));
    let out = loopflux(&["pairing-verify", "--checks", "decompose"]);
    assert_eq!(out.status.code(), Some(2), "stochastic checks need a seed");
}

#[test]
fn failed_bound_exits_1() {
    let mc = scratch(
        "hot.json",
        r#"{"estimator": "mn", "beta": 0.6, "n": 1,
            "estimate": {"mean": 0.9, "stderr": 0.001, "samples": 1000, "batches": 100, "seed": 0}}"#,
    );
    let out = loopflux(&["infrared-bound", "--beta", "0.6", "--n", "1", "--mc", mc.to_str().unwrap(), "--grid", "32"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn mc_estimate_feeds_the_bound() {
    let cfg = scratch("periodic.cfg", "radius = 2\nbc = periodic\n");
    let est = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("mn.json");
    let out = loopflux(&[
        "mc", "--config", cfg.to_str().unwrap(), "--beta", "0.6", "--sweeps", "2000", "--burn-in", "1000",
        "--seed", "4", "--estimator", "mn", "--out", est.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = loopflux(&["infrared-bound", "--beta", "0.6", "--n", "1", "--mc", est.to_str().unwrap(), "--grid", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let out = loopflux(&["infrared-bound", "--beta", "0.6", "--n", "2", "--mc", est.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn probe_emits_a_csv_histogram() {
    let out = loopflux(&["probe", "--beta", "0.3", "--steps", "20000", "--cap", "6", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("length,loops,fraction"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn report_is_byte_identical_across_runs_and_workers() {
    let args = ["report", "--all", "--seed", "7", "--max-edges", "4", "--sweeps", "1000"];
    let a = loopflux(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let mut one = vec!["--workers", "1"];
    one.extend(args);
    let b = loopflux(&one);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, loopflux(&args).stdout);
    let v = json(&a);
    for suite in ["series", "switch_undirected", "switch_adverse", "pairing", "infrared", "mc_twopoint", "probe"] {
        assert_eq!(v["suites"][suite]["passed"], true, "{suite}");
    }
    assert_eq!(loopflux(&["report", "--seed", "7"]).status.code(), Some(2));
}
