use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kdvb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvb"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("KDVB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

#[test]
fn roots_without_dispersion_is_unit() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&kdvb(dir.path(), &["roots", "--tau", "0", "--alpha", "0.5", "--hprime", "1"]));
    assert!((v["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["csv_schema"], 1);
}

#[test]
fn roots_with_dispersion() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&kdvb(dir.path(), &["roots"]));
    assert!((v["lambda"].as_f64().unwrap() - 0.524888598656405).abs() < 1e-10);
    assert_eq!(v["contour_counts"]["right_half"], 1);
    assert_eq!(v["contour_counts"]["left_half"], 2);
    assert!(dir.path().join("roots.json").exists());
}

#[test]
fn out_of_range_alpha_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kdvb(dir.path(), &["roots", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_grid_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kdvb(dir.path(), &["dalpha", "--hs", ""]).status.code(), Some(2));
    assert_eq!(kdvb(dir.path(), &["nullspace", "--hs", ","]).status.code(), Some(2));
}

#[test]
fn dalpha_of_constant_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    json(&kdvb(dir.path(), &["dalpha", "--function", "constant", "--hs", "0.05"]));
    let text = std::fs::read_to_string(dir.path().join("dalpha.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi,f,dalpha_f,exact"));
    for line in lines {
        let g: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(g, 0.0);
    }
}

#[test]
fn dalpha_exponential_converges() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&kdvb(dir.path(), &["dalpha", "--hs", "0.04,0.02"]));
    assert_eq!(v["order_ok"], true);
    let conv = std::fs::read_to_string(dir.path().join("dalpha_convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 3);
}

#[test]
fn quadform_is_repeatable_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["quadform", "--seed", "11", "--samples", "4"];
    let va = json(&kdvb(a.path(), &args));
    let vb = json(&kdvb(b.path(), &args));
    assert_eq!(va["seed"], 11);
    assert_eq!(va["all_nonnegative"], true);
    let ca = std::fs::read(a.path().join("quadform.csv")).unwrap();
    let cb = std::fs::read(b.path().join("quadform.csv")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(va["max_difference"], vb["max_difference"]);
}

#[test]
fn wave_rejects_lax_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = kdvb(dir.path(), &["wave", "--phi-minus", "0", "--phi-plus", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wave_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&kdvb(dir.path(), &["wave", "--h", "0.05", "--length", "30"]));
    assert!(v["residual_norm"].as_f64().unwrap() < 1e-8);
    assert!(v["relative_gap"].as_f64().unwrap() < 0.02);
    let text = std::fs::read_to_string(dir.path().join("wave.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("xi,phi"));
    assert_eq!(text.lines().count(), 1202);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "tau": 0.0, "alpha": 0.25, "hprime": 2.0 }"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let v = json(&kdvb(dir.path(), &["--config", cfg, "roots"]));
    assert!((v["lambda"].as_f64().unwrap() - 2f64.powf(1.0 / 0.25)).abs() < 1e-9);
    let v = json(&kdvb(dir.path(), &["--config", cfg, "roots", "--hprime", "1"]));
    assert!((v["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{ "alpah": 0.5 }"#).unwrap();
    let out = kdvb(dir.path(), &["--config", cfg.to_str().unwrap(), "roots"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kdvb"))
        .arg("roots")
        .env("KDVB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("roots.json").exists());
}
