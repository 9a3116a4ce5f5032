//! End-to-end runs of the `sads-lab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path, env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sads-lab"));
    cmd.args(args).arg("--out_dir").arg(out).env_remove("SADS_OUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("SADS_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn geometry_unit_mass_has_unit_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["geometry", "--M", "1", "--l", "1", "--m", "2"], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("geometry.csv")).unwrap();
    let r: f64 = column(&text, "r_sads")[0].parse().unwrap();
    assert!((r - 1.0).abs() < 1e-12);
    assert!(dir.path().join("tortoise.csv").exists());
}

#[test]
fn missing_key_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("run");
    let out = lab(&["geometry", "--M", "1", "--l", "1"], &target, None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("code=2"), "{err}");
    assert!(!target.exists());
}

#[test]
fn unknown_subcommand_and_key_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["bogus"], dir.path(), None).status.code(), Some(2));
    let out = lab(&["geometry", "--M", "1", "--l", "1", "--m", "2", "--colour", "3"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["potentials", "--M", "0.05", "--l", "1", "--m", "2", "--h", "0.1", "--n", "300"];
    assert!(lab(&args, a.path(), None).status.success());
    assert!(lab(&args, b.path(), None).status.success());
    for name in ["potentials.csv", "cutoff.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn environment_overrides_output_directory() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let out = lab(&["geometry", "--M", "1", "--l", "1", "--m", "2"], flag.path(), Some(env.path()));
    assert!(out.status.success());
    assert!(env.path().join("geometry.csv").exists());
    assert!(!flag.path().join("geometry.csv").exists());
}

#[test]
fn report_without_prior_outputs_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["report", "--M", "0.05", "--l", "1", "--m", "2"], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_then_report_gives_positive_rate() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = ["sweep", "--M", "0.05", "--l", "1", "--m", "2", "--h_list", "0.2,0.15,0.1", "--n", "1500"];
    let out = lab(&sweep, dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = fs::read_to_string(dir.path().join("sweep_fit.csv")).unwrap();
    let d: f64 = column(&fit, "d")[0].parse().unwrap();
    assert!(d > 0.0);
    let out = lab(&["report", "--M", "0.05", "--l", "1", "--m", "2"], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rd: f64 = report["summary"]["D"].as_str().map(|s| s.parse().unwrap()).or(report["summary"]["D"].as_f64()).unwrap();
    assert_eq!(rd, d);
}
