use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn specmdp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmdp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SPECMDP_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn scalar_rate_of_ma1() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["rate", "--f", "ma1:0.5", "--kappa4", "0", "--lag", "0", "--z", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0 / 8.25).abs() < 1e-12);
    assert_eq!(v["branch"], "closed_form");
    assert_eq!(v["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn functional_rate_branches() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["rate", "--f", "1", "--eta", "const:2", "--kappa4", "-1.2", "--degree", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    assert!((v["variational"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    let o = specmdp(dir.path(), &["rate", "--f", "cos:1,1", "--eta", "1", "--kappa4", "0"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["value"], "inf");
    assert_eq!(v["branch"], "not_absolutely_continuous");
}

#[test]
fn toeplitz_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["toeplitz", "trace", "--f", "2cos", "--h", "2cos", "--n", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1.5");
    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "toeplitz");
    let entry = &m["outputs"][0];
    let bytes = fs::read(dir.path().join(entry["file"].as_str().unwrap())).unwrap();
    assert_eq!(entry["sha256"].as_str().unwrap(), specmdp::io::sha256_hex(&bytes));
}

#[test]
fn toeplitz_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["toeplitz", "convergence", "--f", "2cos", "--h", "2cos", "--ns", "4,8,16"]);
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(table.lines().nth(1).unwrap(), "4,1.5,2.0,0.5");
    assert_eq!(table.lines().nth(3).unwrap(), "16,1.875,2.0,0.125");
    let o = specmdp(dir.path(), &["toeplitz", "matrix", "--h", "2cos", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let m = fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    assert_eq!(m, "c0,c1,c2\n0.0,1.0,0.0\n1.0,0.0,1.0\n0.0,1.0,0.0\n");
    let o = specmdp(dir.path(), &["toeplitz", "bound", "--h", "2cos", "--q", "inf", "--n", "50"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["bound"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(v["holds"], true);
}

#[test]
fn unknown_subcommand_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = specmdp(&out, &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = specmdp(&out, &["rate", "--f", "sin", "--z", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = specmdp(&out, &["variance", "--n", "64", "--replicates", "10", "--b-exponent", "0.7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = specmdp(&blocker.join("sub"), &["toeplitz", "norm", "--h", "1", "--n", "3"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!o.stderr.is_empty());
}

#[test]
fn experiments_are_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("cfg.json");
    fs::write(
        &config,
        r#"{"coeffs": "ma1:0.5", "law": "uniform", "n_ladder": [128], "replicates": 2000, "lags": 1, "master_seed": 3}"#,
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    assert_eq!(specmdp(&a, &["variance", "--config", cfg, "--workers", "1"]).status.code(), Some(0));
    assert_eq!(specmdp(&b, &["variance", "--config", cfg, "--workers", "3"]).status.code(), Some(0));
    for name in ["manifest.json", "report.csv", "report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = root.path().join("c");
    let o = Command::new(env!("CARGO_BIN_EXE_specmdp"))
        .args(["--out", c.to_str().unwrap(), "variance", "--config", cfg])
        .env("SPECMDP_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(a.join("report.csv")).unwrap(), fs::read(c.join("report.csv")).unwrap());
    assert_eq!(manifest(&c)["config"]["master_seed"], 99);
}

#[test]
fn experiment_subcommands_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["clt", "--h", "cos", "--n", "256", "--replicates", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["target"], 1.0);
    let o = specmdp(dir.path(), &["mgf", "--n", "8", "--replicates", "2000", "--law", "rademacher", "--lambdas", "0.01,0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let o = specmdp(dir.path(), &["tail", "--n", "64", "--replicates", "10", "--threshold", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = specmdp(dir.path(), &["variance", "--n", "256", "--replicates", "2000", "--functional", "identity", "--coeffs", "ma1:0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "sigma_f_estimate");
    assert_eq!(report["rows"][0]["target"], 2.25);
}

#[test]
fn path_spectrum_and_periodogram_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(specmdp(dir.path(), &["simulate", "--coeffs", "ma1:0.5", "--n", "10", "--lag-extension", "2", "--seed", "4"]).status.code(), Some(0));
    let path = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(path.lines().count(), 13);
    assert_eq!(specmdp(dir.path(), &["spectrum", "--coeffs", "ma1:0.5", "--grid", "8"]).status.code(), Some(0));
    let spectrum: Value = serde_json::from_slice(&fs::read(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(spectrum["fourier"], serde_json::json!([0.5, 1.25, 0.5]));
    assert_eq!(fs::read_to_string(dir.path().join("spectrum.csv")).unwrap().lines().count(), 9);
    assert_eq!(specmdp(dir.path(), &["periodogram", "--n", "100"]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("periodogram.csv")).unwrap().lines().count(), 129);
}

#[test]
fn verify_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmdp(dir.path(), &["verify", "--only", "1,9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
    let o = specmdp(dir.path(), &["verify", "--only", "42"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_covers_the_config() {
    let schema: Value = serde_json::from_str(include_str!("../schema/experiment.schema.json")).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let example = specmdp::ExperimentConfig::new("iid", "gaussian", vec![8], 1);
    let v = serde_json::to_value(&example).unwrap();
    for key in v.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "{key} missing from schema");
    }
    let text = include_str!("../examples/variance_ma1.json");
    specmdp::ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
}
