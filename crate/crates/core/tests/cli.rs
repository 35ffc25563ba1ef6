//! Exit codes, output files and reproducibility of the command-line tool.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_defectgeo"));
    c.env_remove("DEFECTGEO_THREADS");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn write(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("s.scenario");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], path: &Path) -> Output {
    bin().args(&args[..1]).arg(path).args(&args[1..]).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", "--deterministic"], &write(&dir, "# nothing\n"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "defectgeo-report/1");
    assert_eq!(v["command"], "check");
    assert!(v["timing_seconds"].is_null());
}

#[test]
fn singular_coframe_is_a_scenario_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check"], &write(&dir, "[coframe]\ne1 = (\"0\", \"0\", \"0\")\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("singular triad"), "{}", stderr(&o));
}

#[test]
fn expression_errors_carry_line_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["defects"], &write(&dir, "[defects]\nrho = \"x +* y\"\n"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 2") && e.contains("byte 3"), "{e}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check"], &write(&dir, "[material]\nyoung = 3\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("young"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_a_scenario_error() {
    let o = run(&["check"], Path::new("/nonexistent/x.scenario"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_balance_exits_one() {
    // a static scalar defect with no motion cannot balance
    let o = run(&["kinematics", "--deterministic"], &scenario("kappa2_energy.scenario"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("check failed:"), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed = v["checks"].as_array().unwrap().iter().any(|c| c["asserted"] == true && c["pass"] == false);
    assert!(failed);
}

#[test]
fn json_flag_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["energy", "--json", out.to_str().unwrap()], &scenario("kappa2_energy.scenario"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["command"], "energy");
    let summary = String::from_utf8(o.stdout).unwrap();
    assert_eq!(summary.lines().count(), v["checks"].as_array().unwrap().len());
    assert!(summary.lines().all(|l| l.starts_with("pass") || l.starts_with("info")));
}

#[test]
fn csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let o = run(
        &["defects", "--grid", "3", "--csv", csv.to_str().unwrap()],
        &scenario("kappa2_energy.scenario"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,z,b1,b2,b3,O1,O2,O3,m1,m2,m3,rho,B1,B2,B3");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 27);
    for r in &rows {
        assert_eq!(r.len(), 16);
        assert!((r[12] - r[0]).abs() < 1e-12, "rho = x");
    }
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let path = scenario("rotated_frame.scenario");
    let a = run(&["check", "--deterministic"], &path);
    let b = bin()
        .env("DEFECTGEO_THREADS", "3")
        .args(["check"])
        .arg(&path)
        .arg("--deterministic")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flag_overrides_reach_the_report() {
    let o = run(
        &["check", "--grid", "3", "--tolerance", "1e-5", "--deterministic"],
        &scenario("dilation.scenario"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["settings"]["grid_n"], 3);
    assert_eq!(v["settings"]["tolerance"], 1e-5);
}
