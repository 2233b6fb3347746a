//! End-to-end checks of the `hba-sim` binary: output schemas, config
//! handling, determinism, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hba-sim"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_raw(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hba-sim-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

const SMALL_CONFIG: &str = "\
n_beams = 16
n_paths = 1
horizon = 40
n_runs = 5
algorithms = exhaustive, hba
seed = 7
";

#[test]
fn run_emits_csv_schema() {
    let dir = scratch_dir("run-csv");
    let cfg = dir.join("exp.ini");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = run_ok(&["run", "--config", cfg.to_str().unwrap()]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("algorithm,metric,index,value,p05,p95"));
    // one regret row per slot per algorithm, plus summary rows
    let regret_rows = out.lines().filter(|l| l.contains(",regret,")).count();
    assert_eq!(regret_rows, 2 * 40);
    assert!(out.lines().any(|l| l.starts_with("exhaustive,measurements,0,16")));
    assert!(out.lines().any(|l| l.starts_with("hba,accuracy,")));
}

#[test]
fn run_is_deterministic_and_respects_out_flag() {
    let dir = scratch_dir("run-det");
    let cfg = dir.join("exp.ini");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let first = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    let out_path = dir.join("results.csv");
    let stdout = run_ok(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty(), "--out should silence stdout");
    let second = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(first, second, "results must not depend on thread count");
}

#[test]
fn run_json_round_trips() {
    let dir = scratch_dir("run-json");
    let cfg = dir.join("exp.ini");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = run_ok(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
        "--runs",
        "3",
        "--algorithms",
        "exhaustive",
    ]);
    let summary = hba_sim::harness::MetricsSummary::from_json(&out).expect("valid summary JSON");
    assert_eq!(summary.seed, 7);
    assert_eq!(summary.n_runs, 3);
    assert_eq!(summary.algorithms.len(), 1);
    assert_eq!(summary.algorithms[0].algorithm, "exhaustive");
}

#[test]
fn sweep_prefixes_rows_with_grid_labels() {
    let dir = scratch_dir("sweep");
    let cfg = dir.join("exp.ini");
    std::fs::write(
        &cfg,
        "n_paths = 1\nhorizon = 30\nn_runs = 3\nalgorithms = exhaustive\n\n[sweep]\nn_beams = 8, 16\n",
    )
    .unwrap();
    let out = run_ok(&["sweep", "--config", cfg.to_str().unwrap()]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("point,algorithm,metric,index,value,p05,p95")
    );
    let labels: std::collections::BTreeSet<&str> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels.len(), 2, "one label per grid point: {labels:?}");
}

#[test]
fn latency_reports_sweep_and_budgeted_times() {
    let out = run_ok(&["latency", "--measurements", "25,100"]);
    // default 128-beam two-step sweep completes in one beacon interval
    let sweep_row = out
        .lines()
        .find(|l| l.starts_with("exhaustive,latency_ms,"))
        .expect("exhaustive latency row");
    let ms: f64 = sweep_row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((ms - 4.0448).abs() < 1e-9, "sweep latency {ms}");
    assert!(out.lines().any(|l| l.starts_with("learning_m25,latency_ms,")));
    assert!(out.lines().any(|l| l.starts_with("learning_m100,latency_ms,")));
}

#[test]
fn validate_passes_and_prints_one_line_per_property() {
    let out = run_ok(&["validate", "--cases", "3", "--seed", "11"]);
    let pass_lines = out.lines().filter(|l| l.starts_with("[PASS]")).count();
    assert!(pass_lines >= 4, "expected per-property PASS lines:\n{out}");
    assert!(!out.contains("[FAIL]"), "{out}");
}

#[test]
fn config_errors_exit_1() {
    let dir = scratch_dir("bad-key");
    let cfg = dir.join("exp.ini");
    std::fs::write(&cfg, "n_beems = 16\n").unwrap();
    let out = run_raw(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_beems"));

    let out = run_raw(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn io_errors_exit_3() {
    let out = run_raw(&["run", "--config", "/nonexistent/exp.ini"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run_raw(&[
        "latency",
        "--out",
        "/nonexistent-dir/results.csv",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_and_version_exit_0() {
    assert!(run_raw(&["--help"]).status.success());
    assert!(run_raw(&["--version"]).status.success());
}
