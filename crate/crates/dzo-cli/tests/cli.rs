//! Black-box tests of the `dzo` binary: the exit-code contract, file
//! outputs, and the shape of the printed summaries.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 validation-check
//! failure, 3 runtime/IO failure.

use std::path::Path;
use std::process::{Command, Output};

fn dzo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dzo")).args(args).output().expect("spawn dzo")
}

fn dzo_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dzo")).current_dir(dir).args(args).output().expect("spawn dzo")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"{
  "seed": 7, "T": 200, "n": 4, "d": 3,
  "graph": {"kind": "ring"},
  "beta": 2,
  "estimator": "kernel",
  "objective": {"kind": "quadratic", "alpha": 1.0, "lbar": 2.0},
  "theta": {"kind": "ball", "center": [0, 0, 0], "radius": 4.0},
  "noise": {"kind": "gaussian", "sigma": 0.3},
  "schedule": {"kind": "strongly_convex_pl", "alpha": 1.0}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("write config");
    path.to_str().expect("utf-8 path").to_owned()
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&dzo(&["--help"])), 0);
    assert_eq!(code(&dzo(&["run", "--help"])), 0);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&dzo(&["frobnicate"])), 1);
}

#[test]
fn missing_config_file_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("out");
    let r = dzo(&["run", "--config", "/no/such/config.json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("config"), "stderr: {}", stderr(&r));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bad = SMALL
        .replace("\"estimator\": \"kernel\"", "\"estimator\": \"plain_beta2\", \"bogus\": 1")
        .replace("\"beta\": 2", "\"beta\": 3");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let out = dir.path().join("out");
    let r = dzo(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    let err = stderr(&r);
    // Both problems reported in one pass, not just the first.
    assert!(err.contains("bogus"), "stderr: {err}");
    assert!(err.contains("plain_beta2"), "stderr: {err}");
}

#[test]
fn run_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(dir.path(), "run.json", SMALL);
    let out = dir.path().join("out");
    let r = dzo(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));

    let trace = std::fs::read_to_string(out.join("trace.csv")).expect("trace.csv");
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("t,eta,h,f_mean_err,f_avg_err,cum_regret,consensus_e"),
        "header is part of the contract"
    );
    assert!(lines.clone().count() >= 2, "expected recorded rows");
    let last = lines.last().expect("final row");
    assert!(last.starts_with("200,"), "final step recorded: {last}");

    let manifest = std::fs::read_to_string(out.join("manifest.json")).expect("manifest.json");
    assert!(manifest.contains("config_hash"), "manifest: {manifest}");
    assert!(manifest.contains("trace.csv"), "manifest: {manifest}");

    let summary = stdout(&r);
    assert!(summary.contains("config_hash="), "stdout: {summary}");
}

#[test]
fn horizon_of_one_emits_single_row() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(dir.path(), "t1.json", &SMALL.replace("\"T\": 200", "\"T\": 1"));
    let out = dir.path().join("out");
    let r = dzo(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    let trace = std::fs::read_to_string(out.join("trace.csv")).expect("trace.csv");
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("1,"));
}

#[test]
fn sweep_writes_per_seed_files_and_aggregate() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(dir.path(), "sweep.json", SMALL);
    let out = dir.path().join("out");
    let r = dzo(&["sweep", "--config", &cfg, "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));

    for seed in [7u64, 8, 9] {
        assert!(out.join(format!("seed_{seed}.csv")).is_file(), "missing seed_{seed}.csv");
    }
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).expect("aggregate.csv");
    let header = agg.lines().next().expect("header");
    assert!(header.starts_with("t,"), "header: {header}");
    assert!(header.contains("f_mean_err_mean,f_mean_err_stderr"), "header: {header}");

    // Aggregate shares the per-seed step grid.
    let seed_rows = std::fs::read_to_string(out.join("seed_7.csv")).expect("seed csv");
    let seed_t: Vec<&str> =
        seed_rows.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let agg_t: Vec<&str> = agg.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seed_t, agg_t);
}

#[test]
fn sweep_seed_count_can_come_from_the_config() {
    let dir = tempfile::tempdir().expect("tempdir");
    let with_seeds = SMALL.replace("\"seed\": 7,", "\"seed\": 7, \"seeds\": 3,");
    let cfg = write_config(dir.path(), "sweep.json", &with_seeds);
    let out = dir.path().join("out");
    let r = dzo(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    assert!(out.join("seed_9.csv").is_file());
}

#[test]
fn sweep_without_a_seed_count_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(dir.path(), "sweep.json", SMALL);
    let out = dir.path().join("out");
    let r = dzo(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("seeds"), "stderr: {}", stderr(&r));
}

#[test]
fn thread_count_does_not_change_sweep_bytes() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = write_config(dir.path(), "sweep.json", SMALL);
    let mut bytes = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("out_{threads}"));
        let r = Command::new(env!("CARGO_BIN_EXE_dzo"))
            .env("DZO_THREADS", threads)
            .args(["sweep", "--config", &cfg, "--seeds", "3", "--out", out.to_str().unwrap()])
            .output()
            .expect("spawn dzo");
        assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
        bytes.push(std::fs::read(out.join("aggregate.csv")).expect("aggregate bytes"));
    }
    assert_eq!(bytes[0], bytes[1], "aggregate bytes must not depend on DZO_THREADS");
}

#[test]
fn validate_prints_one_line_per_check_and_exits_zero() {
    let r = dzo(&["validate", "mixing", "--graph", "ring", "--n", "5"]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    let text = stdout(&r);
    let mut lines = text.lines();
    let first = lines.next().expect("check line");
    assert!(first.starts_with("PASS "), "line: {first}");
    let tally = text.lines().last().expect("tally line");
    assert!(tally.starts_with("checks:"), "tally: {tally}");
}

#[test]
fn validate_failure_exits_two() {
    // A 7-agent grid does not exist; the check reports it rather than
    // crashing, and the command maps any failed check to exit 2.
    let r = dzo(&["validate", "mixing", "--graph", "grid", "--n", "7"]);
    assert_eq!(code(&r), 2);
    assert!(stdout(&r).contains("FAIL"), "stdout: {}", stdout(&r));
}

#[test]
fn validate_rejects_p_for_non_random_graphs() {
    let r = dzo(&["validate", "mixing", "--graph", "ring", "--n", "5", "--p", "0.4"]);
    assert_eq!(code(&r), 1);
}

#[test]
fn ratefit_recovers_a_synthetic_power_law() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut csv = String::from("t,err\n");
    let mut t = 1u64;
    while t <= 4096 {
        let err = 3.0 / (t as f64).sqrt();
        csv.push_str(&format!("{t},{err}\n"));
        t *= 2;
    }
    let path = dir.path().join("series.csv");
    std::fs::write(&path, csv).expect("write csv");

    let r = dzo(&["ratefit", "--csv", path.to_str().unwrap(), "--column", "err"]);
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    let line = stdout(&r);
    let slope: f64 = line
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("slope="))
        .expect("slope token")
        .parse()
        .expect("numeric slope");
    assert!((slope + 0.5).abs() < 1e-9, "slope {slope} from: {line}");
}

#[test]
fn ratefit_missing_column_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("series.csv");
    std::fs::write(&path, "t,err\n1,1.0\n2,0.5\n").expect("write csv");
    let r = dzo(&["ratefit", "--csv", path.to_str().unwrap(), "--column", "nope"]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("nope"), "stderr: {}", stderr(&r));
}

#[test]
fn hard_check_passes_and_flags_the_exponent_gap() {
    let dir = tempfile::tempdir().expect("tempdir");
    let r = dzo_in(
        dir.path(),
        &["hard", "check", "--beta", "2", "--alpha", "1", "--T", "256", "--d", "2"],
    );
    assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    let text = stdout(&r);
    assert!(text.contains("exponent discrepancy"), "stdout: {text}");
    assert!(!text.contains("FAIL"), "stdout: {text}");
}

#[test]
fn hard_check_rejects_non_integer_beta() {
    let r = dzo(&["hard", "check", "--beta", "2.5", "--alpha", "1", "--T", "64", "--d", "1"]);
    assert_eq!(code(&r), 1);
}
