use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use wiener::generator::Generator;
use wiener::sequence::WeightedSequence;
use wiener::spline::{ModelSettings, SplineModel};

const HAT: &str = r#"{"kind":"bspline","order":2}"#;
const HAT3: &str = r#"{"kind":"bspline","order":2,"alpha":3}"#;

const SMALL_SUITE: &str = r#"{
  "c1_sequences": 40, "c2_sequences": 10, "c3_sequences": 5, "c4_symbols": 3,
  "c7_trials": 10, "c8_cells": 8, "c8_seeds": 1, "c8_margin": 1, "c8_trials": 10,
  "c9_trials": 20
}"#;

fn wiener(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiener"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("WIENER_GRID_SIZE")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr holds one JSON object")
}

fn report<'a>(bounds: &'a Value, name: &str) -> &'a Value {
    bounds["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no report {name}"))
}

#[test]
fn deconvolve_delta() {
    let dir = TempDir::new().unwrap();
    let seq = write(dir.path(), "delta.json", r#"{"dim":1,"offset":[0],"shape":[1],"re":[1],"im":[0]}"#);
    let out = wiener(dir.path(), &["deconvolve", &seq]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b: WeightedSequence = serde_json::from_str(&fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(b, WeightedSequence::delta(1));
    let bounds = read_json(dir.path().join("bounds.json"));
    assert_eq!(bounds["seed"], 0);
    assert_eq!(report(&bounds, "A_certified")["value"], 1.0);
    assert_eq!(report(&bounds, "M12_b")["value"], 0.0);
    assert_eq!(report(&bounds, "l1_b")["value"], 1.0);
    let csv = fs::read_to_string(dir.path().join("b_abs.csv")).unwrap();
    assert_eq!(csv, "k,abs\n0,1\n");
}

#[test]
fn difference_filter_is_not_invertible() {
    let dir = TempDir::new().unwrap();
    let seq = write(dir.path(), "diff.json", r#"{"dim":1,"offset":[0],"shape":[2],"re":[1,-1],"im":[0,0]}"#);
    let out = wiener(dir.path(), &["--json-errors", "deconvolve", &seq]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "NotInvertible");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn hat_autocorrelation_matches_spline_pipeline() {
    let model = SplineModel::build(Generator::bspline(2).unwrap(), &ModelSettings::default()).unwrap();
    let dir = TempDir::new().unwrap();
    let seq = write(
        dir.path(),
        "hat.json",
        &serde_json::to_string(model.autocorrelation()).unwrap(),
    );
    let out = wiener(dir.path(), &["deconvolve", &seq, "--symbol"]);
    assert!(out.status.success());
    let b: WeightedSequence = serde_json::from_str(&fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    let diff = b.sub(&model.dual().unwrap().b).unwrap();
    assert!(diff.linf_norm() < 1e-14, "{}", diff.linf_norm());
    let symbol = fs::read_to_string(dir.path().join("symbol.csv")).unwrap();
    assert!(symbol.starts_with("w,re,im,abs\n"));
    assert_eq!(symbol.lines().count(), 1 + 1024);
}

#[test]
fn two_dimensional_recursive_bounds() {
    let dir = TempDir::new().unwrap();
    let seq = write(
        dir.path(),
        "a2.json",
        r#"{"dim":2,"offset":[-1,0],"shape":[3,2],"re":[0.1,0.0,1.0,0.2,0.0,-0.1],"im":[0,0,0,0,0,0.05]}"#,
    );
    let out = wiener(dir.path(), &["deconvolve", &seq, "--alpha", "2,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bounds = read_json(dir.path().join("bounds.json"));
    let lines = bounds["recursive"].as_array().unwrap();
    assert_eq!(lines.len(), 6);
    for l in lines {
        assert!(l["observed_lower"].as_f64().unwrap() <= l["bound"].as_f64().unwrap());
    }
}

#[test]
fn grid_size_from_environment() {
    let dir = TempDir::new().unwrap();
    let seq = write(dir.path(), "hat.json", r#"{"dim":1,"offset":[-1],"shape":[3],"re":[0.25,1,0.25],"im":[0,0,0]}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_wiener"))
        .arg("--out-dir")
        .arg(dir.path())
        .args(["deconvolve", &seq, "--fixed-grid"])
        .env("WIENER_GRID_SIZE", "256")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read_json(dir.path().join("bounds.json"))["grid_size"], 256);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "exp.json", r#"{"kind":"exp","rate":1.0}"#);
    let mut runs = Vec::new();
    for name in ["r1", "r2"] {
        let out_dir = dir.path().join(name);
        let out = wiener(&out_dir, &["--seed", "7", "riesz-check", "--generator", &spec, "--trials", "5"]);
        assert!(out.status.success());
        runs.push(fs::read(out_dir.join("riesz.json")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(read_json(dir.path().join("r1/riesz.json"))["seed"], 7);
}

#[test]
fn bounds_table() {
    let dir = TempDir::new().unwrap();
    let out = wiener(
        dir.path(),
        &["bounds", "--generator", HAT3, "--delta", "2e-7", "--n-x", "3000000"],
    );
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("delta_star")));
    let bounds = read_json(dir.path().join("bounds.json"));
    let star = report(&bounds, "delta_star")["value"].as_f64().unwrap();
    assert!((star - 2.3346540361070603e-7).abs() < 1e-15);
    assert!(report(&bounds, "rho")["value"].as_f64().unwrap() < 0.9);
    assert_eq!(report(&bounds, "C_p")["inputs"]["n_x"], 3_000_000.0);

    let out = wiener(dir.path(), &["--json-errors", "bounds", "--c", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = wiener(dir.path(), &["--json-errors", "bounds", "--c", "1", "--alpha", "1.2", "--a", "1"]);
    assert_eq!(error_json(&out)["error"], "HypothesisFailed");
}

#[test]
fn dual_window_examples() {
    let dir = TempDir::new().unwrap();
    let out = wiener(dir.path(), &["dual-window", "--generator", r#"{"kind":"bspline","order":1}"#]);
    assert!(out.status.success());
    let box_psi: WeightedSequence =
        serde_json::from_str(&fs::read_to_string(dir.path().join("psi_coefficients.json")).unwrap()).unwrap();
    assert!(box_psi.sub(&WeightedSequence::delta(1)).unwrap().linf_norm() < 1e-15);

    let out = wiener(dir.path(), &["dual-window", "--generator", HAT]);
    assert!(out.status.success());
    let report = read_json(dir.path().join("dual_window.json"));
    assert!(report["biorthogonality_defect"].as_f64().unwrap() <= 1e-8);
    let numeric = report["psi_w"]["numeric"].as_f64().unwrap();
    assert!(numeric <= report["psi_w"]["certified"].as_f64().unwrap());
    let psi = fs::read_to_string(dir.path().join("psi.csv")).unwrap();
    assert!(psi.starts_with("x,psi\n"));

    let out = wiener(dir.path(), &["dual-window", "--generator", r#"{"kind":"exp","rate":1.0}"#]);
    assert!(out.status.success());
    assert!(read_json(dir.path().join("dual_window.json"))["a_gram"].as_f64().unwrap() > 0.0);
}

#[test]
fn sample_recon_integers() {
    let dir = TempDir::new().unwrap();
    let points: String = (0..=20).map(|k| format!("{k}\n")).collect();
    let csv = write(dir.path(), "pts.csv", &format!("x\n{points}"));
    let out = wiener(dir.path(), &["sample-recon", "--generator", HAT, "--points", &csv]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["points"], 21);
    assert!(report["max_coefficient_error"].as_f64().unwrap() < 1e-10);
    let history = fs::read_to_string(dir.path().join("error_history.csv")).unwrap();
    assert!(history.starts_with("iteration,error\n0,"));
}

#[test]
fn sample_recon_jitter_within_delta_star() {
    let dir = TempDir::new().unwrap();
    let out = wiener(
        dir.path(),
        &["--seed", "5", "sample-recon", "--generator", HAT3, "--cells", "4", "--jitter", "0.2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["seed"], 5);
    assert_eq!(report["certified"], true);
    assert_eq!(report["violations"], 0);
    assert!(report["max_coefficient_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn sample_recon_errors() {
    let dir = TempDir::new().unwrap();
    let empty = write(dir.path(), "empty.csv", "x\n");
    let out = wiener(dir.path(), &["--json-errors", "sample-recon", "--generator", HAT, "--points", &empty]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "NotDense");

    let missing = dir.path().join("missing.csv");
    let out = wiener(
        dir.path(),
        &["--json-errors", "sample-recon", "--generator", HAT, "--points", missing.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "Io");

    let out = wiener(dir.path(), &["--json-errors", "sample-recon", "--generator", "{\"kind\":", "--cells", "2", "--jitter", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_rejects_negative_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"c3_tol": -1e-8}"#);
    let out = wiener(dir.path(), &["--json-errors", "verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "InvalidInput");

    let cfg = write(dir.path(), "typo.json", r#"{"c3_tolerance": 1e-8}"#);
    let out = wiener(dir.path(), &["--json-errors", "verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_verdicts_do_not_depend_on_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL_SUITE);
    let mut verdicts = Vec::new();
    for seed in ["1", "2"] {
        let out = wiener(dir.path(), &["--seed", seed, "verify", "--config", &cfg, "--once"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let report = read_json(dir.path().join("verify.json"));
        assert_eq!(report["seed"].as_u64().unwrap().to_string(), seed);
        let v: Vec<(u64, bool)> = report["criteria"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["id"].as_u64().unwrap(), c["passed"].as_bool().unwrap()))
            .collect();
        assert_eq!(v.len(), 9);
        verdicts.push(v);
    }
    assert_eq!(verdicts[0], verdicts[1]);
}
