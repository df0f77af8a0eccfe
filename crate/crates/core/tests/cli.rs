use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stataction"))
        .args(args)
        .current_dir(dir)
        .env("STATACTION_LOG", "error")
        .output()
        .unwrap()
}

fn mass_spring_config(dir: &Path, name: &str, tf: f64, x: f64, p: f64) {
    let text = format!(
        r#"{{"mass_spring": {{"mass": 5.0, "stiffness": 1.0, "v": -2.0, "T": {tf:?}}}, "x": [{x:?}], "p": [{p:?}], "n_seeds": 4}}"#
    );
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flow_from_equilibrium_has_constant_columns() {
    let tmp = tempfile::tempdir().unwrap();
    mass_spring_config(tmp.path(), "eq.json", 2.0, 0.0, 0.0);
    let out = run(tmp.path(), &["flow", "--config", "eq.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(tmp.path().join("o/trajectory.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["s", "x0", "p0", "H"]
    );
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[1], "0.0000000000000000e0");
        assert_eq!(&rec[2], "0.0000000000000000e0");
    }
}

#[test]
fn flow_reproduces_the_sinusoid() {
    let tmp = tempfile::tempdir().unwrap();
    mass_spring_config(tmp.path(), "ms.json", 4.0, 1.0, 0.5);
    run(tmp.path(), &["flow", "--config", "ms.json", "--out", "o"]);
    let w = (0.2f64).sqrt();
    let mut rdr = csv::Reader::from_path(tmp.path().join("o/trajectory.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let s: f64 = rec[0].parse().unwrap();
        let x: f64 = rec[1].parse().unwrap();
        let exact = (w * s).cos() - 0.5 / (5.0 * w) * (w * s).sin();
        assert!((x - exact).abs() < 1e-10);
    }
    assert!(json(&tmp.path().join("o/drift.json"))["energy_drift"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn backward_flow_ends_at_terminal_data() {
    let tmp = tempfile::tempdir().unwrap();
    let text =
        r#"{"mass_spring": {"mass": 5.0, "stiffness": 1.0, "v": -2.0, "T": 2.0}, "x": [0.7], "direction": "backward"}"#;
    fs::write(tmp.path().join("b.json"), text).unwrap();
    assert_eq!(
        run(tmp.path(), &["flow", "--config", "b.json", "--out", "o"])
            .status
            .code(),
        Some(0)
    );
    let mut rdr = csv::Reader::from_path(tmp.path().join("o/trajectory.csv")).unwrap();
    assert!(rdr.headers().unwrap().iter().any(|h| h == "z"));
    let last = rdr.records().last().unwrap().unwrap();
    assert_eq!(last[1].parse::<f64>().unwrap(), 0.7);
    // p_T = ∇ψ = −mv
    assert_eq!(last[2].parse::<f64>().unwrap(), 10.0);
}

#[test]
fn solve_matches_closed_form_and_verify_flags_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let theta = 0.7 * PI;
    let w = (0.2f64).sqrt();
    mass_spring_config(tmp.path(), "ms.json", theta / w, 1.0, 0.0);
    assert_eq!(
        run(tmp.path(), &["solve", "--config", "ms.json", "--out", "o"])
            .status
            .code(),
        Some(0)
    );
    let result = json(&tmp.path().join("o/result.json"));
    let p = result["p_star"][0].as_f64().unwrap();
    let expect = -(5.0f64).sqrt() * theta.tan() + 10.0 / theta.cos();
    assert!((p - expect).abs() < 1e-6 * (1.0 + expect.abs()));
    for key in [
        "value",
        "residual_gradp",
        "residual_fixedpoint",
        "classification",
        "jacobian_sigma_min",
        "iterations",
    ] {
        assert!(result.get(key).is_some(), "{key}");
    }
    assert_eq!(
        run(tmp.path(), &["verify", "--config", "ms.json", "--out", "o"])
            .status
            .code(),
        Some(0)
    );

    let mut tampered = result.clone();
    tampered["p_star"][0] = Value::from(p + 0.1);
    fs::write(
        tmp.path().join("o/result.json"),
        serde_json::to_string(&tampered).unwrap(),
    )
    .unwrap();
    assert_eq!(
        run(tmp.path(), &["verify", "--config", "ms.json", "--out", "o"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        json(&tmp.path().join("o/verify.json"))["stationarity"]["pass"],
        Value::Bool(false)
    );
}

#[test]
fn json_format_writes_row_objects() {
    let tmp = tempfile::tempdir().unwrap();
    mass_spring_config(tmp.path(), "ms.json", 1.0, 1.0, 0.5);
    assert_eq!(
        run(
            tmp.path(),
            &["gradcheck", "--config", "ms.json", "--out", "o", "--format", "json"]
        )
        .status
        .code(),
        Some(0)
    );
    let rows = json(&tmp.path().join("o/gradcheck.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["adjoint_fd_rel"].as_f64().unwrap() < 1e-6);
}

#[test]
fn check_reports_horizon_bound() {
    let tmp = tempfile::tempdir().unwrap();
    mass_spring_config(tmp.path(), "ms.json", 1.0, 1.0, 0.0);
    let out = run(tmp.path(), &["check", "--config", "ms.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((rep["horizon_bound"].as_f64().unwrap() - 2.5f64.sqrt()).abs() < 1e-12);

    let free = r#"{"problem": {"dim": 1, "potential": {"kind": "zero"}, "inertia": {"scalar": 1.0},
        "terminal": {"kind": "linear", "params": {"coeffs": [1.0]}}, "T": 50.0}}"#;
    fs::write(tmp.path().join("free.json"), free).unwrap();
    let out = run(tmp.path(), &["check", "--config", "free.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["horizon_bound"], "unbounded");
}

#[test]
fn problem_file_reference_and_bad_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = r#"{"dim": 1, "potential": {"kind": "double_well", "params": {"a": 0.25, "b": 1.0}},
        "inertia": {"scalar": 1.0}, "terminal": {"kind": "zero"}, "T": 1.0}"#;
    fs::create_dir(tmp.path().join("cfg")).unwrap();
    fs::write(tmp.path().join("cfg/dw.json"), problem).unwrap();
    fs::write(tmp.path().join("cfg/run.json"), r#"{"problem": "dw.json", "x": [0.5]}"#).unwrap();
    assert_eq!(
        run(tmp.path(), &["tpbvp", "--config", "cfg/run.json", "--out", "o"])
            .status
            .code(),
        Some(0)
    );

    fs::write(tmp.path().join("neg.json"), r#"{"problem": "cfg/dw.json", "tol": -1}"#).unwrap();
    fs::write(
        tmp.path().join("dim.json"),
        r#"{"problem": "cfg/dw.json", "x": [1, 2]}"#,
    )
    .unwrap();
    fs::write(tmp.path().join("gone.json"), r#"{"problem": "nowhere.json"}"#).unwrap();
    for cfg in ["neg.json", "dim.json", "gone.json", "missing.json"] {
        assert_eq!(
            run(tmp.path(), &["solve", "--config", cfg, "--out", "o"]).status.code(),
            Some(64),
            "{cfg}"
        );
    }
}
