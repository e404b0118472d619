//! End-to-end checks of the command-line surface: flags, exit codes,
//! output files, and byte-level determinism of the tables.

use std::path::Path;
use std::process::{Command, Output};

use delaunay_cmc::delaunay;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delaunay-cmc"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing output {name}: {e}"))
}

#[test]
fn delaunay_writes_tables_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["delaunay", "--tau", "0.16", "--periods", "5"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let traj1 = read(dir.path(), "trajectory.csv");
    let events1 = read(dir.path(), "events.csv");
    assert!(traj1.starts_with("psi,phi,zeta,tau\n"));
    assert!(events1.starts_with("index,psi_i\n"));
    assert_eq!(events1.lines().count(), 6, "5 periods hold 5 minima");
    let manifest = read(dir.path(), "delaunay_manifest.json");
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(parsed["command"], "delaunay");
    assert_eq!(parsed["outputs"].as_array().unwrap().len(), 2);
    assert!(parsed["config_digest"].as_str().unwrap().len() == 64);

    // repeated invocation: byte-identical CSVs
    let dir2 = tempfile::tempdir().unwrap();
    let out2 = run_in(
        dir2.path(),
        &["delaunay", "--tau", "0.16", "--periods", "5"],
    );
    assert!(out2.status.success());
    assert_eq!(traj1, read(dir2.path(), "trajectory.csv"));
    assert_eq!(events1, read(dir2.path(), "events.csv"));
}

#[test]
fn delaunay_rejects_out_of_domain_tau() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["delaunay", "--tau", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("(0, 1/4]"), "stderr: {stderr}");
}

#[test]
fn verify_grid_passes_and_threshold_floor_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["verify", "--taus", "0.10,0.16,0.24"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(dir.path(), "identities.csv");
    // 5 identities x 3 grid points + header
    assert_eq!(csv.lines().count(), 16);

    let dir2 = tempfile::tempdir().unwrap();
    let out = run_in(
        dir2.path(),
        &["verify", "--taus", "0.16", "--threshold", "1e-15"],
    );
    assert_eq!(out.status.code(), Some(1));
}

fn write_problem(dir: &Path, a_preset: &str) -> std::path::PathBuf {
    let psi1 = delaunay::period(0.16).unwrap().value;
    let l_gamma = 0.2 * psi1;
    let problem = serde_json::json!({
        "l_gamma": l_gamma,
        "tau0": 0.16,
        "N": 1,
        "profiles": {"a": a_preset, "b": "zero", "xi": "zero", "mu": "zero"},
        "newton": {"tol": 1e-12, "max_iter": 25}
    });
    let path = dir.join("problem.json");
    std::fs::write(&path, serde_json::to_string_pretty(&problem).unwrap()).unwrap();
    path
}

#[test]
fn shoot_zero_forcing_reports_zero_omega() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "zero");
    let out = run_in(
        dir.path(),
        &["shoot", "--problem", problem.to_str().unwrap()],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "shoot_result.json")).unwrap();
    assert_eq!(result["omega"].as_f64().unwrap(), 0.0);
    assert!(result["residual_tau"].as_f64().unwrap().abs() <= 1e-12);
    assert!(dir.path().join("shoot_trajectory.csv").exists());
}

#[test]
fn scan_sin_profile_finds_two_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "sin:0.05,1");
    let out = run_in(
        dir.path(),
        &[
            "scan",
            "--problem",
            problem.to_str().unwrap(),
            "--points",
            "16",
            "--jobs",
            "2",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let zeros: serde_json::Value = serde_json::from_str(&read(dir.path(), "zeros.json")).unwrap();
    assert!(zeros["zeros"].as_array().unwrap().len() >= 2);
    assert_eq!(zeros["classification"], "generic");
    let csv = read(dir.path(), "scan.csv");
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("delta,omega,phi0,residual_tau,residual_zeta,energy_integral\n"));
}

#[test]
fn missing_problem_file_exits_io() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["shoot", "--problem", "/nonexistent/problem.json"],
    );
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn oversized_forcing_exits_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "constant:80.0");
    let out = run_in(
        dir.path(),
        &["shoot", "--problem", problem.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("annulus"), "stderr: {stderr}");
}

#[test]
fn mesh_exports_obj_with_curvature_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "mesh",
            "--tau",
            "0.25",
            "--periods",
            "1",
            "--epsilon",
            "0.5",
            "--theta-res",
            "8",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let obj = read(dir.path(), "surface.obj");
    let v_count = obj.lines().filter(|l| l.starts_with("v ")).count();
    let f_count = obj.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(v_count % 8, 0);
    assert_eq!(f_count, 2 * (v_count - 8));
    let h_csv = read(dir.path(), "surface.h.csv");
    for line in h_csv.lines().skip(1) {
        let h: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(
            (h - 4.0).abs() < 1e-9,
            "cylinder at eps = 0.5 must have H = 4"
        );
    }
}

#[test]
fn monodromy_tabulates_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["monodromy", "--taus", "0.16,0.24"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(dir.path(), "kappa.csv");
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("tau,kappa,structure_defect\n"));
}
