//! End-to-end checks of the `hydrolab` binary: exit-code contract, artifact
//! layout, byte-identical reproducibility, and the environment overrides.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hydrolab")
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(subcommand: &str, config: &Path, out: &Path, envs: &[(&str, &str)]) -> (Option<i32>, String) {
    let mut cmd = Command::new(bin());
    cmd.arg(subcommand).arg("--config").arg(config).arg("--out").arg(out);
    cmd.env_remove("HYDROLAB_OUT");
    cmd.env_remove("HYDROLAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let output = cmd.output().expect("spawn hydrolab");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    (output.status.code(), text)
}

#[test]
fn noether_run_produces_artifacts_and_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, text) = run("verify-noether", &configs_dir().join("noether.json"), tmp.path(), &[]);
    assert_eq!(code, Some(0), "{text}");
    assert!(tmp.path().join("noether.csv").is_file());
    assert!(tmp.path().join("report.txt").is_file());
    assert!(tmp.path().join("config_resolved.json").is_file());
    // the echo must itself be a valid, identical-meaning config
    let echo = std::fs::read_to_string(tmp.path().join("config_resolved.json")).unwrap();
    hydrolab::config::RunConfig::from_json_str(&echo).unwrap();
}

#[test]
fn identical_config_and_seed_give_byte_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("twin_eta_r.json");
    let (code_a, text_a) = run("twin-stability", &cfg, a.path(), &[("HYDROLAB_THREADS", "3")]);
    let (code_b, text_b) = run("twin-stability", &cfg, b.path(), &[("HYDROLAB_THREADS", "1")]);
    assert_eq!(code_a, Some(0), "{text_a}");
    assert_eq!(code_b, Some(0), "{text_b}");
    let csv_a = std::fs::read(a.path().join("twin_stability.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("twin_stability.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "CSV bytes differ across runs/thread counts");
}

#[test]
fn tolerance_failure_exits_one() {
    // unreachable tolerance: residuals are ~1e-13, demand 1e-20
    let text = std::fs::read_to_string(configs_dir().join("noether.json")).unwrap();
    let text = text.replace("\"tolerance\": 1e-8", "\"tolerance\": 1e-20");
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("impossible.json");
    std::fs::write(&cfg_path, text).unwrap();
    let (code, out) = run("verify-noether", &cfg_path, &tmp.path().join("out"), &[]);
    assert_eq!(code, Some(1), "{out}");
    assert!(out.contains("RESULT: tolerance failure"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    // malformed JSON
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let (code, _) = run("simulate", &bad, &tmp.path().join("out"), &[]);
    assert_eq!(code, Some(2));
    // structurally valid but wrong subcommand for the experiment block
    let (code, out) = run(
        "verify-noether",
        &configs_dir().join("twin_phi.json"),
        &tmp.path().join("out2"),
        &[],
    );
    assert_eq!(code, Some(2), "{out}");
    // missing file
    let (code, _) = run("simulate", &tmp.path().join("nope.json"), &tmp.path().join("out3"), &[]);
    assert_eq!(code, Some(2));
}

#[test]
fn env_var_overrides_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env_out");
    let ignored = tmp.path().join("cli_out");
    let (code, text) = run(
        "check-convexity",
        &configs_dir().join("convexity.json"),
        &ignored,
        &[("HYDROLAB_OUT", env_dir.to_str().unwrap())],
    );
    assert_eq!(code, Some(0), "{text}");
    assert!(env_dir.join("convexity.csv").is_file());
    assert!(!ignored.exists());
}

#[test]
fn simulate_snapshots_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, text) = run("simulate", &configs_dir().join("simulate_ek.json"), tmp.path(), &[]);
    assert_eq!(code, Some(0), "{text}");
    let (grid, fields) =
        hydrolab::torus_field::snapshot::read_snapshot(tmp.path(), "state_000000", true).unwrap();
    assert_eq!(grid.points_per_axis(), 128);
    assert_eq!(fields[0].0, "rho");
    assert_eq!(fields.len(), 2);
}
