use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fpklab_cli::VerificationReport;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpklab")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn read_report(dir: &Path) -> VerificationReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn list_builtins_is_sorted_json() {
    let o = bin(&["list-builtins"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let fields: Vec<&str> = v["fields"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert!(fields.contains(&"ou") && fields.contains(&"polar-vortex-2d"));
    assert!(fields.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn verify_writes_json_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&["verify", "--config", &scenario("heat.json"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(dir.path());
    assert!(r.all_passed && r.runtimes.is_none());
    assert_eq!(r.conditions.len(), 3);
    assert!(dir.path().join("runtimes.json").exists());

    let o = bin(&["verify", "--config", &scenario("heat.json"), "--out", out, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(dir.path().join("checks.csv")).unwrap();
    assert_eq!(rd.records().count(), r.checks.len());
}

#[test]
fn structural_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "field": {"name": "no-such-field"}, "initial": {"kind": "delta", "point": [0.0]}, "horizon": 1.0}"#,
    );
    let o = bin(&["verify", "--config", &bad, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid configuration"));
    assert_eq!(bin(&["verify", "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_one_and_plot_series_is_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&["example32", "--out", out, "--format", "plot"]);
    assert_eq!(o.status.code(), Some(1));
    let mut rd = csv::Reader::from_path(dir.path().join("angular_partials.csv")).unwrap();
    let partials: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(partials.len(), 12);
    assert!(partials.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn seed_override_is_echoed_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ou.json",
        r#"{"schema_version": 1, "field": {"name": "ou"}, "initial": {"kind": "gaussian", "mean": [0.0], "var": 1.0},
            "grid": {"r_dom": 8.0, "cells": 400, "boundary": "reflecting"}, "horizon": 0.5, "conditions": [],
            "ensemble": {"n_paths": 5000, "dt": 5e-3, "seed": 1},
            "checks": [{"kind": "marginal", "times": [0.5], "tol": 0.05}, {"kind": "initial-law"}]}"#,
    );
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(format!("{sub}-{threads}"));
        let o = bin(&["verify", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "99", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("report.json")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(a, b);
    let r: VerificationReport = serde_json::from_slice(&a).unwrap();
    assert_eq!((r.seed, r.scenario.ensemble.unwrap().seed), (Some(99), 99));
}

#[test]
fn solved_flow_seeds_a_grid_file_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = bin(&["solve-fpk", "--config", &scenario("heat.json"), "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let flow_dir = first.join("flow");
    assert!(flow_dir.join("header.json").exists());

    let cfg = write(
        dir.path(),
        "restart.json",
        &format!(
            r#"{{"schema_version": 1, "field": {{"name": "heat"}}, "initial": {{"kind": "grid-file", "path": {:?}}},
                "horizon": 0.2, "conditions": ["new"],
                "ensemble": {{"n_paths": 2000, "dt": 1e-2, "seed": 4}},
                "checks": [{{"kind": "marginal", "times": [0.2], "tol": 0.05}}]}}"#,
            flow_dir.display().to_string()
        ),
    );
    let second = dir.path().join("second");
    let o = bin(&["simulate", "--config", &cfg, "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(second.join("ensemble.bin").exists());
    let r = read_report(&second);
    assert!(r.conditions.is_empty() && r.check("marginal-w1[t=0.2]").is_some());
}
