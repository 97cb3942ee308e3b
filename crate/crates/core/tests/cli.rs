use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn numra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_numra")).env("NUMRA_THREADS", "1").args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn validate_schema(report: &Value) {
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(repo_file("schemas/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn certify_to(dir: &TempDir, bank: &Path, name: &str, extra: &[&str]) -> (i32, Value) {
    let out = dir.path().join(name);
    let mut args = vec!["certify", "--bank", bank.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = numra(&args);
    let report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    (code(&o), report)
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect()).collect();
    (header, rows)
}

#[test]
fn validate_accepts_spectral_pair() {
    let o = numra(&["validate", "--N", "2", "--r", "1"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["valid"], true);
    assert_eq!(v["dilation"], 4);
}

#[test]
fn validate_reports_violations() {
    for (n, r, err) in [("2", "2", "RNotOdd"), ("3", "3", "NotCoprime")] {
        let o = numra(&["validate", "--N", n, "--r", r]);
        assert_eq!(code(&o), 2);
        assert_eq!(stdout_json(&o)["error"], err);
    }
}

#[test]
fn shannon_certifies_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let (c, report) = certify_to(&dir, &repo_file("banks/shannon_n2.json"), "a.json", &[]);
    assert_eq!(c, 0);
    assert_eq!(report["complete"], true);
    assert_eq!(report["pass"], true, "{report:#}");
    validate_schema(&report);

    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let o = numra(&["certify", "--rerun", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let again: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(report["parameters"], again["parameters"]);
    let devs = |r: &Value| -> Vec<(String, u64)> {
        r["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["condition"].as_str().unwrap().to_string(), e["max_deviation"].as_f64().unwrap().to_bits()))
            .collect()
    };
    assert_eq!(devs(&report), devs(&again));
}

#[test]
fn haar_certifies() {
    let dir = TempDir::new().unwrap();
    let (c, report) = certify_to(&dir, &repo_file("banks/haar.json"), "h.json", &[]);
    assert_eq!(c, 0);
    assert_eq!(report["pass"], true, "{report:#}");
    for e in report["entries"].as_array().unwrap() {
        assert_eq!(e["pass"], e["max_deviation"].as_f64().unwrap() <= e["tolerance"].as_f64().unwrap());
    }
    validate_schema(&report);
}

#[test]
fn duplicate_mask_fails_certification_with_exit_zero() {
    let dir = TempDir::new().unwrap();
    let mut bank: Value = serde_json::from_str(&std::fs::read_to_string(repo_file("banks/haar.json")).unwrap()).unwrap();
    let m0 = bank["synthesis"][0].clone();
    bank["synthesis"][1] = m0;
    let path = dir.path().join("dup.json");
    std::fs::write(&path, bank.to_string()).unwrap();
    let (c, report) = certify_to(&dir, &path, "dup_report.json", &["--identity-signals", "1", "--expansion-signals", "1", "--frame-signals", "1"]);
    assert_eq!(c, 0);
    assert_eq!(report["pass"], false);
    let pr = report["entries"].as_array().unwrap().iter().find(|e| e["condition"] == "perfect_reconstruction").unwrap();
    assert_eq!(pr["pass"], false);
    validate_schema(&report);
}

#[test]
fn export_haar_scaling_matches_sinc() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("phi.csv");
    let o = numra(&["export", "scaling", "--bank", repo_file("banks/haar.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, "xi,re,im");
    let at = |xi: f64| rows.iter().find(|r| r[0] == xi).map(|r| r[1].hypot(r[2])).unwrap();
    assert!((at(0.5) - 2.0 / PI).abs() <= 1e-6);
    assert!((at(0.0) - 1.0).abs() <= 1e-12);
    assert!(at(1.0) <= 1e-6);
}

#[test]
fn export_shannon_periodization_is_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("per.csv");
    let o = numra(&["export", "periodization", "--bank", repo_file("banks/shannon_n2.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (_, rows) = read_csv(&out);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[1] == 1.0 && r[2] == 0.0));
}

#[test]
fn export_coefficients_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let bank = repo_file("banks/shannon_n2.json");
    let mut outputs = Vec::new();
    for name in ["c1.csv", "c2.csv"] {
        let out = dir.path().join(name);
        let o = numra(&["export", "coefficients", "--bank", bank.to_str().unwrap(), "--jlo", "-1", "--jhi", "1", "--lwindow", "4", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (header, rows) = read_csv(&dir.path().join("c1.csv"));
    assert_eq!(header, "l,j,k,n,re,im");
    // 3 channels × 3 levels × 2 cosets × 9 translations
    assert_eq!(rows.len(), 3 * 3 * 2 * 9);
}

#[test]
fn operational_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("x.csv");
    let o = numra(&["export", "scaling", "--bank", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);

    let missing = dir.path().join("missing.json");
    let o = numra(&["certify", "--bank", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["error"], "Io");

    let o = numra(&["export", "scaling", "--bank", repo_file("banks/haar.json").to_str().unwrap(), "--step", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}
