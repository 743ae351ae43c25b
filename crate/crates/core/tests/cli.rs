use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn base() -> Value {
    json!({
        "levy": {"atoms": [{"x": 1.0, "lambda": 1.0}]},
        "grid": {"T": 1.0, "N": 50, "scenarios": 4, "seed": 1},
        "drivers": {
            "f": {"family": "affine", "params": {"a": 0.0, "b": 0.0, "c": 0.0}, "L": 0.0},
            "g": {"family": "affine", "params": {"a": 0.0, "b": 0.0, "c": 0.0}, "L": 0.0, "alpha": 0.1}
        },
        "barrier": {"family": "linear", "params": {"a": 1.0, "b": -1.0}},
        "penalty": {"geometric": {"start": 1, "factor": 2, "count": 11}}
    })
}

fn run(dir: &Path, cfg: &Value, args: &[&str]) -> (Output, PathBuf) {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_rbdsde"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn one_atom_basis_is_the_normalized_jump() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["levy"]["atoms"] = json!([{"x": 2.0, "lambda": 0.5}]);
    let (o, out) = run(dir.path(), &cfg, &["basis"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = read_json(out.join("basis.json"));
    assert_eq!(b["dim"], 1);
    // 1 / sqrt(λ x²)
    assert!((b["alpha"][0][0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, b);
}

#[test]
fn symmetric_atoms_have_a_diagonal_gram() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["levy"]["atoms"] = json!([{"x": 1.0, "lambda": 1.0}, {"x": -1.0, "lambda": 1.0}]);
    cfg["grid"]["N"] = json!(100);
    let (o, out) = run(dir.path(), &cfg, &["basis"]);
    assert!(o.status.success());
    let b = read_json(out.join("basis.json"));
    assert_eq!(b["dim"], 2);
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((b["gram"][i][j].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn bad_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["drivers"]["g"]["alpha"] = json!(0.7);
    let (o, _) = run(dir.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("drivers.g.alpha"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_rbdsde"))
        .args(["solve", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constant_barrier_needs_no_reflection() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["barrier"] = json!({"family": "constant", "params": {"c": 0.7}});
    let (o, out) = run(dir.path(), &cfg, &["solve"]);
    assert!(o.status.success());
    let s = read_json(out.join("solve.json"));
    assert!((s["y0_mean"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    assert_eq!(s["k_terminal_mean"].as_f64().unwrap(), 0.0);
}

#[test]
fn decreasing_barrier_converges_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), &base(), &["solve", "--n", "1024"]);
    assert!(o.status.success());
    let s = read_json(out.join("solve.json"));
    assert_eq!(s["n"], 1024);
    assert!((s["y0_mean"].as_f64().unwrap() - 1.0).abs() <= 2e-2);
    let k = s["k_terminal_mean"].as_f64().unwrap();
    assert!((k - 1.0).abs() <= 2e-2, "{k}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["drivers"]["g"] = json!({"family": "affine", "params": {"a": 0.3, "b": 0.0, "c": 0.0}, "L": 0.0, "alpha": 0.1});
    let read_all = |out: &Path| {
        ["converge.csv", "converge.json", "simulate.csv"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let (a, out) = run(dir.path(), &cfg, &["converge"]);
    assert!(a.status.success());
    run(dir.path(), &cfg, &["simulate"]);
    let first = read_all(&out);
    run(dir.path(), &cfg, &["converge"]);
    run(dir.path(), &cfg, &["simulate"]);
    assert_eq!(first, read_all(&out));

    // a different seed moves the Brownian scenarios
    let path = dir.path().join("config.json");
    let other = dir.path().join("other");
    let o = Command::new(env!("CARGO_BIN_EXE_rbdsde"))
        .args(["converge", "--seed", "99", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&other)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(first[0], std::fs::read(other.join("converge.csv")).unwrap());
}

#[test]
fn converge_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), &base(), &["converge"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("converge.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,cauchy_diff,violation,skorokhod,norm_Y,norm_Z,norm_K,oracle_err");
    assert_eq!(lines.count(), 11);
}

#[test]
fn only_requested_formats_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["output"] = json!({"formats": ["json"]});
    let (o, out) = run(dir.path(), &cfg, &["solve"]);
    assert!(o.status.success());
    assert!(out.join("solve.json").exists());
    assert!(!out.join("solve.csv").exists());
}

#[test]
fn oracle_rejects_coupled_drivers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["drivers"]["f"] = json!({"family": "z_norm", "params": {"c": 0.3, "clip": 1.0}, "L": 0.3});
    let (o, _) = run(dir.path(), &cfg, &["oracle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_a_reflected_instance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["barrier"]["right_jumps"] = json!([{"t": 0.5, "delta_plus": -0.6}]);
    cfg["penalty"] = json!({"schedule": [1, 4, 16, 64, 256]});
    let (o, out) = run(dir.path(), &cfg, &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(out.join("verify.json"));
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"oracle_skorokhod") && names.contains(&"energy_identity"));
    assert!(!names.contains(&"picard_contraction"));
}
