use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn permfix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permfix"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("PERMFIX_GUARD_N")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn verdict(report: &Value, check: &str) -> String {
    report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == check)
        .unwrap_or_else(|| panic!("no check {check}"))["verdict"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn exact_single_size_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["exact", "--n", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pmf = fs::read_to_string(dir.path().join("pmf.csv")).unwrap();
    assert_eq!(pmf.lines().filter(|l| l.starts_with("4,")).count(), 4);
    let r = report(dir.path());
    assert_eq!(verdict(&r, "bracket N=4"), "pass");
    let listed: Vec<&str> = r["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(listed.iter().any(|p| p.ends_with("summary.csv")));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn exact_log_rate_row_at_high_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["exact", "--n", "30", "--digits", "200"]);
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row = summary.lines().find(|l| l.starts_with("30,")).unwrap();
    let rate: f64 = row.split(',').nth(9).unwrap().parse().unwrap();
    assert!(rate < -0.5 && rate > -1.0);
}

#[test]
fn project_reports_intertwining_and_stated_kernel_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["project", "--n", "6"]);
    let r = report(dir.path());
    assert_eq!(verdict(&r, "intertwining N=6"), "pass");
    assert_eq!(verdict(&r, "projection_matches_doubled_unit_rates N=6"), "pass");
    assert_eq!(verdict(&r, "projection_matches_stated_kernel N=6"), "fail");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn moments_gram_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["moments", "--n", "7"]);
    assert!(out.status.success());
    assert_eq!(verdict(&report(dir.path()), "gram_oracle N=7"), "pass");
}

#[test]
fn guard_env_skips_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_permfix"))
        .args(["moments", "--n", "6", "--out"])
        .arg(dir.path())
        .env("PERMFIX_GUARD_N", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(verdict(&report(dir.path()), "gram_oracle N=6"), "skipped-guard");
}

#[test]
fn couple_rr_has_no_disagreement_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"N": 8, "n": 2000, "replicas": 200, "seed": 5, "selector": "r_r", "emit_traces": 2}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = permfix(d, &["couple", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
    assert_eq!(verdict(&report(&a), "zero_disagreement n=2000"), "pass");
    for f in ["checkpoints.csv", "summary.json", "traces.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(a.join("traces.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"N": 8, "n": 100, "selector": "sideways"}"#).unwrap();
    let out = permfix(dir.path(), &["couple", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("selector"));

    fs::write(&cfg, r#"{"N": 5, "digitz": 3}"#).unwrap();
    let out = permfix(dir.path(), &["moments", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_format_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["kernel", "--n", "5", "--format", "json"]);
    assert!(out.status.success());
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("reversibility.json")).unwrap()).unwrap();
    assert!(rows.as_array().unwrap().iter().all(|r| r["detailed_balance"] == "true"));
}

#[test]
fn bad_range_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = permfix(dir.path(), &["exact", "--n", "9..4"]);
    assert_eq!(out.status.code(), Some(2));
}
