use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ENGINE: &[&str] = &[
    "--n", "2", "--m", "1", "--omega-a", "1", "--x", "0.5", "--beta-a", "0.5", "--y", "6",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycouple"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn with_engine<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(ENGINE).chain(tail).copied().collect()
}

#[test]
fn simulate_pert2_reports_moments_and_regime() {
    let v = json(&run(&with_engine(&["simulate"], &["--theta", "0.1"])));
    assert_eq!(v["method"], "pert2");
    assert!(v["moments"].is_object());
    assert_eq!(v["regime"]["regime"], "heat_engine");
}

#[test]
fn simulate_oracle_agrees_with_pert4_at_a_shared_coupling() {
    let oracle = json(&run(&with_engine(&["simulate"], &["--alpha", "0.01", "--order", "2", "--method", "oracle"])));
    let pert = json(&run(&with_engine(&["simulate"], &["--alpha", "0.01", "--order", "2", "--method", "pert4"])));
    let a = oracle["moments"]["mean_w"].as_f64().unwrap();
    let b = pert["moments"]["mean_w"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-3 * b.abs(), "oracle {a} vs pert4 {b}");
}

#[test]
fn tur_and_optimize_succeed() {
    let v = json(&run(&with_engine(&["tur"], &["--alpha", "0.2"])));
    assert!(v["rf_sigma"].as_f64().unwrap() >= 2.0);
    let v = json(&run(&with_engine(
        &["optimize", "--objective", "mean-work", "--family", "nm", "--alpha", "0.2"],
        &["--n-max", "3", "--m-max", "3"],
    )));
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn validate_reports_fitted_orders() {
    let v = json(&run(&[
        "validate", "--n", "1", "--m", "1", "--omega-a", "1", "--x", "0.5", "--beta-a", "0.5",
        "--y", "10", "--theta-max", "0.1", "--tail-tolerance", "1e-10",
    ]));
    let slope = v["fitted_order_pert2"].as_f64().unwrap();
    assert!((slope - 4.0).abs() < 0.5, "slope {slope}");
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        r#"{"engine": {"n": 2, "m": 1, "omega_a": 1, "x": 0.5, "beta_a": 0.5, "y": 6},
            "coupling": {"mode": "alpha", "value": 0.1},
            "axes": [{"parameter": "alpha", "min": 0.1, "max": 0.3, "points": 3}],
            "methods": ["pert2", "pert4"]}"#,
    )
    .unwrap();
    let v = json(&run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(v["rows"], 6);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("alpha,method,"));
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_errors_exit_2() {
    assert_exit(&run(&["simulate", "--bogus"]), 2);
    assert_exit(&run(&with_engine(&["simulate"], &["--theta", "0.1", "--dims-cap", "4", "--method", "oracle"])), 2);
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"engine": {"omega_q": 1}}"#).unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "unused.csv"]);
    assert_exit(&out, 2);
    assert!(!Path::new("unused.csv").exists());
}

#[test]
fn domain_errors_exit_3() {
    assert_exit(&run(&with_engine(&["simulate"], &["--theta=-0.1"])), 3);
}

#[test]
fn resource_errors_exit_4() {
    let out = run(&with_engine(
        &["simulate"],
        &["--alpha", "0.5", "--method", "oracle", "--dims-cap", "8"],
    ));
    assert_exit(&out, 4);
}

#[test]
fn io_errors_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--config", dir.path().join("missing.json").to_str().unwrap(), "--out", "x.csv"]);
    assert_exit(&out, 5);
}
