use std::process::{Command, Output};

fn jumpcurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpcurv")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bound_on_preset() {
    let out = jumpcurv(&["bound", "--preset", "two-state"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["command"], "bound");
    assert_eq!(v["meta"]["seed"], 0);
}

#[test]
fn exit_codes() {
    let unknown = jumpcurv(&["bound", "--preset", "no-such-preset"]);
    assert_eq!(unknown.status.code(), Some(2));
    let violated = jumpcurv(&["verify", "--preset", "two-state", "--claimed-bound", "10", "--replicas", "50"]);
    assert_eq!(violated.status.code(), Some(4));
    let usage = jumpcurv(&["bound"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[model]\npreset = \"two-state\"\n\n[run]\nhorizn = 2.0\n").unwrap();
    let out = jumpcurv(&["bound", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));
}

#[test]
fn config_round_trips_through_binary() {
    let dir = tempfile::tempdir().unwrap();
    let first = jumpcurv(&["config", "--preset", "mm1-sqrt2", "--k", "30"]);
    assert_eq!(first.status.code(), Some(0));
    let path = dir.path().join("resolved.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = jumpcurv(&["config", "--model", path.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    let b1 = json(&jumpcurv(&["bound", "--preset", "mm1-sqrt2", "--k", "30"]));
    let b2 = json(&jumpcurv(&["bound", "--model", path.to_str().unwrap()]));
    assert_eq!(b1["result"], b2["result"]);
}

#[test]
fn bad_worker_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_jumpcurv"))
        .args(["bound", "--preset", "two-state"])
        .env("JUMPCURV_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn text_format_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = jumpcurv(&["--format", "text", "simulate", "--preset", "two-state", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l.starts_with("command = simulate")));
    let series = std::fs::read_to_string(&csv).unwrap();
    assert!(series.starts_with("t,x0\n"));
}
