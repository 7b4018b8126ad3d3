use std::path::Path;
use std::process::{Command, Output};

use cising::config::ExperimentConfig;
use cising::output::{read_rows, RunManifest};

const FREE_CORRELATION: &str = r#"
schema_version = 1
experiment = "correlation"
seed = 11

[kernel]
type = "modes"
modes = [{ weight = 1.0, freq = 1.0 }]

[ising]
alpha = 0.0
horizon = 3.0
sweeps = 8000
burn_in = 200
times = [0.5, 1.0]
"#;

fn cising(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cising"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_CORRELATION);
    let out = cising(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = read_rows(&dir.path().join("output/correlation.csv")).unwrap();
    let row = rows.iter().find(|r| r.t == Some(1.0)).expect("t = 1 row");
    let want = (-2.0f64).exp();
    assert!((row.mean - want).abs() < 3.0 * row.stderr.unwrap(), "{row:?}");
    assert_eq!(row.seed, Some(11));

    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("output/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.experiment, "correlation");
    let first = String::from_utf8(out.stdout).unwrap();

    let again = cising(&["run", &cfg], dir.path());
    assert!(again.status.success());
    assert_eq!(first, String::from_utf8(again.stdout).unwrap());
}

#[test]
fn conflicting_couplings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = FREE_CORRELATION.replace("alpha = 0.0", "alpha = 0.0\nlambda = 1.0");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = cising(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha") && err.contains("lambda"), "{err}");
    assert!(!dir.path().join("output").exists());
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "noseed.toml", &FREE_CORRELATION.replace("seed = 11\n", ""));
    let out = cising(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cising(&["check", "nightly"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_criterion_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = cising(&["check", "fast", "--only", "3"], dir.path());
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn kernels_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = cising(&["kernels", "list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for family in ["modes", "powerlaw", "poly"] {
        assert!(text.contains(family));
    }
    let out = cising(&["version"], dir.path());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("cising "));
}

#[test]
fn config_survives_round_trip() {
    let cfg = ExperimentConfig::from_toml_str(FREE_CORRELATION).unwrap();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
}
