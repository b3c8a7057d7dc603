//! End-to-end tests of the command-line interface: exit codes, file
//! schemas, and deterministic re-reporting.

use std::path::Path;
use std::process::Command;

fn fracgrow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracgrow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn simulate_then_report_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{"space": {"n_modes": 8}, "time": {"T": 0.02, "h": 0.001}}"#,
    );
    let out = tmp.path().join("out");

    let status = fracgrow()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t, field, mode_index, coefficient");
    // 21 states x 4 fields x 8 modes rows
    assert_eq!(csv.lines().count(), 1 + 21 * 4 * 8);

    let report_before = std::fs::read(out.join("estimate_report.json")).unwrap();
    let status = fracgrow()
        .args(["report", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report_after = std::fs::read(out.join("estimate_report.json")).unwrap();
    assert_eq!(report_before, report_after);

    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert!(parsed["config_hash"].as_str().unwrap().len() == 64);
    let files = parsed["emitted_files"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "trajectory.csv"));
}

#[test]
fn config_error_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"potential": {"kind": "logarithmic", "c1": 0.5}}"#,
    );
    let output = fracgrow()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("c1 > 1"), "{stderr}");
}

#[test]
fn joint_sweep_with_neumann_a_exits_4_naming_a7() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
            "space": {"n_modes": 8},
            "time": {"T": 0.01, "h": 0.001},
            "operators": {"A": {"boundary": "neumann"}},
            "sweep": {"regime": "joint", "values": [0.5, 0.25]}
        }"#,
    );
    let output = fracgrow()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("(A7)"), "{stderr}");
}

#[test]
fn beta_sweep_with_large_alpha_exits_4_naming_a6() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
            "space": {"n_modes": 8},
            "time": {"T": 0.01, "h": 0.001},
            "sweep": {"regime": "beta_to_zero", "fixed": 0.6, "values": [0.5, 0.25]}
        }"#,
    );
    let output = fracgrow()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("(A6)"), "{stderr}");
}

#[test]
fn sweep_writes_table_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
            "space": {"n_modes": 8},
            "time": {"T": 0.02, "h": 0.001},
            "operators": {"A": {"boundary": "dirichlet"}},
            "sweep": {"regime": "alpha_to_zero", "fixed": 0.5, "values": [0.5, 0.25, 0.125]}
        }"#,
    );
    let out = tmp.path().join("out");
    let status = fracgrow()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("FRACGROW_THREADS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let table = std::fs::read_to_string(out.join("sweep_table.csv")).unwrap();
    assert!(table.starts_with("value, d_phi, d_mu, d_s, rate, failed"));
    assert_eq!(table.lines().count(), 4);

    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["regime"], "alpha_to_zero");
    assert_eq!(verdict["monotone"], true);
}

#[test]
fn stability_subcommand_writes_term_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
            "space": {"n_modes": 8},
            "time": {"T": 0.02, "h": 0.001},
            "stability": {
                "delta": 0.25,
                "pair1": {"alpha": 0.25, "beta": 0.5},
                "pair2": {"alpha": 0.25, "beta": 0.25}
            }
        }"#,
    );
    let out = tmp.path().join("out");
    let status = fracgrow()
        .args(["stability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("stability_table.csv")).unwrap();
    assert!(table.starts_with("t, lhs, w_term, beta_term, margin"));
    assert_eq!(table.lines().count(), 1 + 21);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("stability_report.json")).unwrap())
            .unwrap();
    assert!(report["min_margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn verify_passes_on_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", "{}");
    let output = fracgrow()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PASS operator_calculus::"));
    assert!(stdout.contains("PASS yosida::"));
    assert!(stdout.contains("PASS conservation::mean_drift"));
    assert!(stdout.contains("PASS linear_oracle::per_mode_2x2"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn simulate_dumps_partial_trajectory_on_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
            "space": {"n_modes": 4},
            "time": {"T": 0.01, "h": 0.001},
            "newton": {"tol": 1e-300, "max_iter": 1}
        }"#,
    );
    let out = tmp.path().join("out");
    let output = fracgrow()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    // the partial trajectory (initial state only) is still written
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 4);
}
