use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparselift"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sparselift")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn rel_error_column(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "rel_error").unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().to_owned()).collect()
}

#[test]
fn cdma_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["cdma", "--seed", "7", "--trials", "2", "--snr-db", "20,40", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ca, cb) = (rel_error_column(&a), rel_error_column(&b));
    assert_eq!(ca.len(), 4);
    assert_eq!(ca, cb);
    assert!(dir.path().join("a.json").exists());
}

#[test]
fn solve_recovers_generated_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let inst_s = inst.to_str().unwrap();
    let o = run(&["generate", "--matrix", "fourier", "-L", "128", "-N", "256", "-k", "3", "-n", "3", "--seed", "11", "--out", inst_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let before = std::fs::read(&inst).unwrap();

    let out = dir.path().join("x.json");
    let o = run(&["solve", "--input", inst_s, "--solver", "bp", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("rel_error = ")).unwrap();
    let rel: f64 = line["rel_error = ".len()..].parse().unwrap();
    assert!(rel <= 0.01, "rel_error {rel}");

    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["x_hat"].as_array().unwrap().len(), 3);
    assert!(v["recovery"]["rel_error"].as_f64().unwrap() <= 0.01);
    // Inputs are never modified.
    assert_eq!(std::fs::read(&inst).unwrap(), before);
}

#[test]
fn certify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let inst_s = inst.to_str().unwrap();
    assert!(run(&["generate", "-L", "32", "-N", "16", "-k", "1", "-n", "1", "--out", inst_s]).status.success());
    let rep = dir.path().join("rep.json");
    let o = run(&["certify", "--input", inst_s, "--golfing-block", "8", "--out", rep.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(v["least_squares"]["q_on_support_err"].as_f64().unwrap() <= 1e-10);
    assert!(v["golfing"].is_object());
}

#[test]
fn missing_required_flag_is_usage_error() {
    let o = run(&["solve", "--solver", "bp"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--input"), "{err}");
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(run(&["cdma", "--bogus"]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let o = run(&["solve", "--input", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"trials": 3, "base_seed": 5, "snr_db": [30.0], "measurements": 32, "signal_len": 32, "k_values": [1], "n_values": [1]}"#,
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["cdma", "--config-file", cfg.to_str().unwrap(), "--trials", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["trials"], 1);
    assert_eq!(side["config"]["base_seed"], 5);
    assert_eq!(side["config"]["measurements"], 32);
    assert_eq!(rel_error_column(&out).len(), 1);
}

#[test]
fn config_file_for_other_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"kind": "doa"}"#).unwrap();
    let o = run(&["cdma", "--config-file", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_flags() {
    let o = run(&["phase-transition", "--help"]);
    let text = stdout(&o);
    for flag in ["--seed", "--trials", "--matrix", "--solver", "--lambda", "--out", "--full", "--config-file", "--jobs"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}
