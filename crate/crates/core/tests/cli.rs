use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mflqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflqg"))
        .args(args)
        .output()
        .expect("spawn")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_single_error_line(out: &Output, category: &str) {
    assert_eq!(out.status.code(), Some(2), "{}", stderr(out));
    let err = stderr(out);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(
        lines[0].starts_with(&format!("error[{category}]: ")),
        "{err}"
    );
}

#[test]
fn solve_preset_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = mflqg(&[
        "solve", "--preset", "example1", "--x", "0", "--x", "2", "--out", out,
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = read_json(&dir.path().join("solve_summary.json"));
    let values = summary["values"].as_array().unwrap();
    assert!((values[0]["value"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-6);
    assert!((values[1]["value"].as_f64().unwrap() - (2.0 + 2f64.ln())).abs() < 1e-6);
    let phi = std::fs::read_to_string(dir.path().join("solve_phi.csv")).unwrap();
    assert_eq!(phi.lines().next(), Some("t,phi1,phi2,phi3"));
    assert_eq!(phi.lines().count(), 1002);
    let manifest = read_json(&dir.path().join("solve_manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["steps"], 1000);
    for name in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(name.as_str().unwrap()).exists());
    }
}

#[test]
fn solve_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert!(mflqg(&[
            "solve",
            "--preset",
            "example2",
            "--out",
            d.path().to_str().unwrap()
        ])
        .status
        .success());
    }
    for name in ["solve_phi.csv", "solve_gains.csv", "solve_summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn solve_config_matrix_problem() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("m.toml");
    std::fs::write(
        &cfg,
        "[matrix_problem]\nA = [[0, 0], [0, 0]]\nB = [[1, 0], [0, 1]]\nsigma = [[1, 0], [0, 1]]\n\
         Q = [[1, 0], [0, 1]]\nD1 = [[1, 0], [0, 0]]\nD2 = [[0, 0], [0, 1]]\nT = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = mflqg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = read_json(&out.join("solve_summary.json"));
    assert_eq!(summary["dim"], 2);
    assert!((summary["phi1_0"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((summary["phi2_0"][1][1].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((summary["phi3_0"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn simulate_partial_and_report() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let run = mflqg(&[
        "simulate",
        "--preset",
        "example3",
        "--paths",
        "20000",
        "--dt",
        "0.01",
        "--seed",
        "3",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = read_json(&sim.join("simulate_summary.json"));
    assert_eq!(summary["pass"], true);
    let exact = 0.5 + 0.5 * 2f64.ln() + 0.5;
    assert!((summary["value"].as_f64().unwrap() - exact).abs() < 1e-9);
    let trace = std::fs::read_to_string(sim.join("simulate_trajectory.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,P,m1_hat,m2_hat,m2"));

    let rep = dir.path().join("rep");
    let run = mflqg(&[
        "report",
        sim.join("simulate_manifest.json").to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let csv = std::fs::read_to_string(rep.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("run,command,source,seed,value,oracle,mc,mc_std_error")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[1..4], ["simulate", "preset:example3", "3"]);
}

#[test]
fn simulate_rejects_zero_paths() {
    let dir = TempDir::new().unwrap();
    let run = mflqg(&[
        "simulate",
        "--preset",
        "example1",
        "--paths",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_single_error_line(&run, "argument");
}

#[test]
fn invalid_config_names_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[problem]\nA = 0\nB = \"one\"\n").unwrap();
    let run = mflqg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_single_error_line(&run, "parse");
    assert!(stderr(&run).contains("line 3"), "{}", stderr(&run));
}

#[test]
fn negative_control_weight_is_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("q.toml");
    std::fs::write(
        &cfg,
        "[problem]\nA = 0\nB = 1\nsigma = 1\nQ = -1\nD1 = 1\nD2 = 0\nT = 1\n",
    )
    .unwrap();
    let run = mflqg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_single_error_line(&run, "validation");
    assert!(stderr(&run).contains("Q_t > 0"));
}

#[test]
fn finite_escape_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("e.toml");
    std::fs::write(
        &cfg,
        "[problem]\nA = 0\nB = 1\nsigma = 1\nQ = 1\nD1 = -2\nD2 = 0\nT = 1\n",
    )
    .unwrap();
    let run = mflqg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_single_error_line(&run, "escape-time");
}

#[test]
fn report_failures() {
    assert_single_error_line(&mflqg(&["report"]), "argument");
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    assert_single_error_line(&mflqg(&["report", missing.to_str().unwrap()]), "io");
}

#[test]
fn usage_errors_are_single_line() {
    assert_single_error_line(&mflqg(&["solve"]), "usage");
    assert_single_error_line(
        &mflqg(&["solve", "--preset", "example1", "--config", "x.toml"]),
        "usage",
    );
    assert_single_error_line(&mflqg(&["solve", "--preset", "example7"]), "argument");
}

#[test]
fn verify_example1_passes() {
    let dir = TempDir::new().unwrap();
    let run = mflqg(&[
        "verify",
        "--preset",
        "example1",
        "--paths",
        "20000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&run.stdout),
        stderr(&run)
    );
    let report = read_json(&dir.path().join("verify_report.json"));
    assert_eq!(report["passed"], true);
    let residuals = std::fs::read_to_string(dir.path().join("verify_residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 101);
}

#[test]
fn verify_example4_passes() {
    let dir = TempDir::new().unwrap();
    let run = mflqg(&[
        "verify",
        "--preset",
        "example4",
        "--paths",
        "20000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&run.stdout),
        stderr(&run)
    );
}
