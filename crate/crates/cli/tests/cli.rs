use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

fn levikernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levikernel")).args(args).output().expect("binary runs")
}

fn run_suite(suite: &str, out: &Path, extra: &[&str]) -> Output {
    let config = config_path();
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--suite", suite, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    levikernel(&args)
}

fn without_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time");
            map.values_mut().for_each(without_wall_time);
        }
        Value::Array(items) => items.iter_mut().for_each(without_wall_time),
        _ => {}
    }
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn unknown_suite_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite("scale,heat", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in ["scale", "model", "symkernel", "parametrix", "simulate", "all"] {
        assert!(stderr.contains(name), "{stderr}");
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn malformed_config_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"schema": "levikernel.config/1", "profiles": [], "colour": 3}"#).unwrap();
    let out = levikernel(&["run", "--config", config.to_str().unwrap(), "--suite", "scale", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn invalid_worker_count_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_path();
    let out = Command::new(env!("CARGO_BIN_EXE_levikernel"))
        .args(["run", "--config", config.to_str().unwrap(), "--suite", "model", "--out", dir.path().to_str().unwrap()])
        .env("LEVIKERNEL_WORKERS", "none")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scale_suite_passes_and_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite("scale", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema"], "levikernel.report/1");
    let checks = r["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true && c["suite"] == "scale"));
    for c in checks {
        for t in c["tables"].as_array().unwrap() {
            assert!(dir.path().join(t.as_str().unwrap()).exists(), "missing {t}");
        }
    }
}

#[test]
fn reruns_are_identical_apart_from_wall_time() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let env_runs = [("1", a.path()), ("2", b.path())];
    for (workers, dir) in env_runs {
        let config = config_path();
        let out = Command::new(env!("CARGO_BIN_EXE_levikernel"))
            .args(["run", "--config", config.to_str().unwrap(), "--suite", "model", "--out", dir.to_str().unwrap(), "--seed", "7"])
            .env("LEVIKERNEL_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (mut ra, mut rb) = (report(a.path()), report(b.path()));
    assert_eq!(ra["config"]["seed"], 7);
    without_wall_time(&mut ra);
    without_wall_time(&mut rb);
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

#[test]
fn checks_lists_the_manifest() {
    let out = levikernel(&["checks", "--suite", "parametrix"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("parametrix.constant_reduction"));
    assert!(stdout.contains("beta1"));
}
