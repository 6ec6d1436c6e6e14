use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impulsive"))
}

fn run_config(dir: &Path, body: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, body).unwrap();
    bin()
        .arg("run")
        .arg(&cfg)
        .args(extra)
        .env("IMPULSIVE_OUT", dir.join("out"))
        .output()
        .unwrap()
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("out").join(name).join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn examples_list_names_every_system() {
    let out = bin().args(["examples", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in impulsive::catalog::EXAMPLE_NAMES {
        assert!(text.contains(name), "{name} missing from listing");
    }
}

#[test]
fn emitted_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["examples", "emit", "annulus"]).output().unwrap();
    assert!(out.status.success());
    let cfg = String::from_utf8(out.stdout).unwrap();
    let run = run_config(dir.path(), &cfg, &["--threads", "2", "--emit-plot-data"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let base = dir.path().join("out").join("annulus");
    for f in ["trajectory.csv", "jumps.csv", "plot_trajectory.dat", "manifest.json"] {
        assert!(base.join(f).exists(), "{f} not written");
    }
    let m = manifest(dir.path(), "annulus");
    assert_eq!(m["exit_status"], 0);
    assert_eq!(m["operation"], "simulate");
}

#[test]
fn unknown_example_to_emit_fails() {
    let out = bin().args(["examples", "emit", "pendulum"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "{ not json",
        r#"{"example": "annulus", "operation": {"kind": "simulate", "horizon": 1.0}, "colour": 3}"#,
        r#"{"example": "nowhere", "operation": {"kind": "validate"}}"#,
        r#"{"example": "annulus", "operation": {"kind": "teleport"}}"#,
        r#"{"example": "annulus", "operation": {"kind": "close", "point": [1.0, 2.0], "eps": 0.1, "h": 0.1, "delta": 0.05}}"#,
    ] {
        let out = run_config(dir.path(), body, &[]);
        assert_eq!(out.status.code(), Some(1), "{body}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn analysis_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"example": "annulus", "output": "stuck",
        "operation": {"kind": "close", "point": [1.3], "target": [1.16], "eps": 0.0, "h": 0.05, "delta": 0.01, "max_halvings": 0}}"#;
    let out = run_config(dir.path(), body, &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("out/stuck/failure.json").exists());
    assert_eq!(manifest(dir.path(), "stuck")["exit_status"], 2);
}

#[test]
fn failing_validation_is_still_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"example": "lorenz_skew", "params": {"interchanged": 1.0}, "output": "swapped",
        "operation": {"kind": "validate"}}"#;
    let out = run_config(dir.path(), body, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/swapped/validation.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"], false);
}

#[test]
fn out_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"example": "lorenz_skew", "output": "v", "operation": {"kind": "validate"}}"#).unwrap();
    let other = dir.path().join("elsewhere");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&other)
        .env("IMPULSIVE_OUT", dir.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(other.join("v/manifest.json").exists());
    assert!(!dir.path().join("env").exists());
}

#[test]
fn manifest_hashes_match_files() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"example": "radial_disk", "output": "chain", "operation": {"kind": "chain", "h": 0.1, "delta": 0.05}}"#;
    let out = run_config(dir.path(), body, &["--emit-plot-data"]);
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(dir.path(), "chain");
    let base = dir.path().join("out/chain");
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 4);
    for o in outputs {
        let bytes = fs::read(base.join(o["file"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(o["sha256"].as_str().unwrap(), hex);
    }
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let sc = impulsive::scenario::parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        sc.build().unwrap();
        n += 1;
    }
    assert!(n >= 6);
}
