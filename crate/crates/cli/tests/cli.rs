use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_SWEEP: &str = r#"
[domain]
shape = "ellipse"
a = 1.5
b = 1.0

[solver]
panel_size = 2

[schedule]
eps = [0.5, 0.35]
"#;

fn spikelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikelab")).args(args).output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn radial_defaults_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(&["radial", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("radial_report.json"));
    assert_eq!(report["mu"].as_f64().unwrap(), 1.0);
    assert!(report["plateau_ok"].as_bool().unwrap());
    let csv = fs::read_to_string(dir.path().join("radial_profile.csv")).unwrap();
    assert!(csv.starts_with("r,w,dw,q\n"));
    assert!(dir.path().join("effective_config.toml").exists());
}

#[test]
fn supercritical_power_names_failed_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p6.toml");
    fs::write(&cfg, "[nonlinearity]\np = 6.0\n").unwrap();
    let out = spikelab(&["--config", cfg.to_str().unwrap(), "radial", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "hypotheses");
    assert_eq!(err["failed"], serde_json::json!(["H2"]));
}

#[test]
fn missing_config_prints_usage() {
    let out = spikelab(&["--config", "/nonexistent/spikelab.toml", "radial"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["usage"].as_str().unwrap().contains("Usage"));
}

#[test]
fn zero_eps_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[schedule]\neps = [0.5, 0.0]\n").unwrap();
    let out = spikelab(&["--config", cfg.to_str().unwrap(), "sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("schedule.eps[1]"));

    let out = spikelab(&["solve", "--eps", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_criterion_lists_valid_names() {
    let out = spikelab(&["verify", "--criteria", "decay_law,bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "unknown_criterion");
    let valid = err["valid"].as_array().unwrap();
    assert_eq!(valid.len(), 10);
    assert!(valid.iter().any(|v| v == "quasilinear_coarse"));
}

#[test]
fn verify_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikelab(&["verify", "--criteria", "decay_law,gradient_consistency", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.lines().all(|l| l.contains("PASS")));
    let saved = read_json(&dir.path().join("verify.json"));
    assert_eq!(saved.as_array().unwrap().len(), 2);
}

#[test]
fn mesh_and_curvature_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ellipse.toml");
    fs::write(&cfg, SMALL_SWEEP).unwrap();
    let c = cfg.to_str().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(spikelab(&["--config", c, "mesh", "--h", "0.2", "--out", o]).status.code(), Some(0));
    let stats = read_json(&dir.path().join("mesh_stats.json"));
    let n = stats["vertices"].as_u64().unwrap() as usize;
    let verts = fs::read_to_string(dir.path().join("mesh_vertices.csv")).unwrap();
    assert_eq!(verts.lines().count(), n + 1);

    assert_eq!(spikelab(&["--config", c, "curvature", "--out", o]).status.code(), Some(0));
    let cm = read_json(&dir.path().join("curvature.json"));
    assert!((cm["h_max"].as_f64().unwrap() - 1.5).abs() < 1e-9, "{cm}");
}

#[test]
fn sweep_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ellipse.toml");
    fs::write(&cfg, SMALL_SWEEP).unwrap();
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, workers: &str| {
        spikelab(&["--config", c, "--workers", workers, "sweep", "--out", out.to_str().unwrap()]).status.code()
    };
    assert_eq!(run(&a, "1"), Some(0));
    assert_eq!(run(&b, "2"), Some(0));
    let summary = read_json(&a.join("sweep_summary.json"));
    assert_eq!(summary["sweep"]["cases"].as_array().unwrap().len(), 2);
    for name in [
        "sweep_summary.json",
        "energy_table.csv",
        "decay_table.csv",
        "curvature_table.csv",
        "fields/case_0.csv",
        "fields/case_1.csv",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}
