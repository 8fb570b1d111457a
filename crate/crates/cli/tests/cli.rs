use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn specprop(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specprop"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SPECPROP_OUT")
        .output()
        .expect("binary runs")
}

fn summary(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad stdout ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn check_triple_accepts_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["two_point.json", "path4.json", "spin4.json"] {
        let f = fixture(name);
        let o = specprop(dir.path(), &["check-triple", "--in", f.to_str().unwrap(), "--samples", "50"]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(summary(&o)["pass"], Value::Bool(true));
    }
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("check-triple.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn distance_between_points_of_the_two_point_space() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("two_point.json");
    let o = specprop(dir.path(), &["distance", "--in", f.to_str().unwrap(), "--states", "pure:0", "pure:1"]);
    assert!(o.status.success());
    let d = summary(&o)["distance"].as_f64().unwrap();
    assert!((d - 1.0).abs() < 1e-6, "{d}");
}

#[test]
fn perturb_sweep_bound_column_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("path4.json");
    let o = specprop(dir.path(), &["perturb-sweep", "--in", f.to_str().unwrap(), "--tmax", "0.05", "--steps", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("perturb_sweep.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["step", "t_norm", "diameter", "bound", "construction_bound", "extent_estimate"]);
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let t: f64 = rec[1].parse().unwrap();
        let r: f64 = rec[2].parse().unwrap();
        let bound: f64 = rec[3].parse().unwrap();
        assert!((bound - 2.0 * r * t / (1.0 - 2.0 * r * t)).abs() <= 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn ragged_matrix_exits_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version": 1, "kind": "triple", "algebra": {"diagonal": 2}, "dirac": [[0, 1], [1]]}"#,
    )
    .unwrap();
    let o = specprop(dir.path(), &["check-triple", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/dirac/1"));
}

#[test]
fn output_dir_comes_from_env_when_flag_absent() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("two_point.json");
    let o = Command::new(env!("CARGO_BIN_EXE_specprop"))
        .args(["diameter", "--in", f.to_str().unwrap()])
        .env("SPECPROP_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("diameter.manifest.json").exists());
}

#[test]
fn torus_sweep_writes_refinement_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = specprop(dir.path(), &["torus-sweep", "--seminorms-only", "--refine", "12,24,48"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&o);
    assert!(s["worst_refinement_ratio"].as_f64().unwrap() >= 2.0, "{s}");
    assert!(dir.path().join("torus_sweep.csv").exists());
    let mut rd = csv::Reader::from_path(dir.path().join("refinement.csv")).unwrap();
    let n = rd.records().count();
    assert!(n > 0 && n % 3 == 0, "{n} rows");
}
