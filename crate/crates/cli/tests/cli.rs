use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vortex(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_vortex"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--log-level")
        .arg("warn")
        .args(args)
        .output()
        .unwrap()
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn disk_landscape_has_no_minima() {
    let t = TempDir::new().unwrap();
    let o = vortex(t.path(), r#"{"domain":{"kind":"unit_disk"},"landscape":{"grid_n":64}}"#, &["landscape"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(t.path(), "minima.json");
    assert_eq!(m["data"], Value::Array(vec![]));
    assert_eq!(m["meta"]["version"], env!("CARGO_PKG_VERSION"));
    let csv = std::fs::read_to_string(t.path().join("out/landscape.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# vortex"));
    assert_eq!(lines.next().unwrap(), "t_p,t_q,W");
}

#[test]
fn square_rectangle_landscape_finds_midpoint() {
    let t = TempDir::new().unwrap();
    let o = vortex(t.path(), r#"{"domain":{"kind":"rectangle","L":1,"H":1},"landscape":{"grid_n":64}}"#, &["landscape"]);
    assert!(o.status.success());
    let m = read_json(t.path(), "minima.json");
    let mins = m["data"].as_array().unwrap();
    assert!(mins.iter().any(|c| {
        (c["t_p"].as_f64().unwrap() - 0.5).abs() < 1e-6 && (c["t_q"].as_f64().unwrap() - 0.5).abs() < 1e-6
    }));
}

#[test]
fn bad_configs_exit_2() {
    let t = TempDir::new().unwrap();
    for cfg in [
        r#"{"domain": {"kind": "unit_disk""#,
        r#"{"domain":{"kind":"unit_disk"},"grid":3}"#,
        r#"{"domain":{"kind":"rectangle","L":1,"H":1,"x":0}}"#,
        r#"{"nonlinearity":{"name":"sine","a":-1}}"#,
        r#"{}"#,
    ] {
        let o = vortex(t.path(), cfg, &["landscape"]);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn capability_error_names_domain_kind() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"domain":{"kind":"rectangle","L":1,"H":1},"solve":{"n_modes":64}}"#;
    let o = vortex(t.path(), cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rectangle"));
}

#[test]
fn fast_verify_suites_pass() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"verify":{"suites":["t0_root","cf_sine","disk_w","layer_sine","rectangle_min","polygon_count"]}}"#;
    let o = vortex(t.path(), cfg, &["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS t0_root"));
    let reports = read_json(t.path(), "verify.json");
    assert!(reports["data"].as_array().unwrap().iter().all(|r| r["passed"] == true));
}

#[test]
fn failed_verification_exits_4() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"verify":{"suites":["gamma_fit"],"n_modes":512,"slope_tol":1e-9}}"#;
    let o = vortex(t.path(), cfg, &["verify"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gamma_fit"));
}

#[test]
fn nonconvergence_exits_3_with_history() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"domain":{"kind":"regular_polygon_disk","N":4,"r":0.995},"solve":{"n_modes":128,"eps":0.1,"max_iter":1,"tol":1e-15}}"#;
    let o = vortex(t.path(), cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(3));
    let h = read_json(t.path(), "residual_history.json");
    assert!(!h["data"]["residual_history"].as_array().unwrap().is_empty());
}

#[test]
fn solve_writes_trace_and_record() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"domain":{"kind":"regular_polygon_disk","N":4,"r":0.995},"solve":{"n_modes":256,"eps":0.1}}"#;
    let o = vortex(t.path(), cfg, &["solve"]);
    assert!(o.status.success());
    let rec = read_json(t.path(), "solution.json");
    assert_eq!(rec["data"]["record"]["stable"], true);
    assert_eq!(rec["data"]["record"]["vortices"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(t.path().join("out/trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 256);
}

#[test]
fn disk_branch_records_are_unstable() {
    let t = TempDir::new().unwrap();
    let cfg = r#"{"domain":{"kind":"unit_disk"},"branch":{"n_modes":256,"eps_start":0.2,"eps_end":0.05,"steps":2,"seed":{"type":"layers","theta_p":0.0,"theta_q":3.141592653589793,"window":0.5}}}"#;
    let o = vortex(t.path(), cfg, &["branch"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = read_json(t.path(), "branch.json");
    let recs = b["data"]["records"].as_array().unwrap();
    assert!(recs.len() >= 3);
    assert!(recs.iter().all(|r| r["stable"] == false));
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = r#"{"domain":{"kind":"regular_polygon_disk","N":5,"r":0.9},"landscape":{"grid_n":64},"nonlinearity":{"name":"cubic"}}"#;
    for cmd in ["landscape", "layer", "cf"] {
        assert!(vortex(a.path(), cfg, &[cmd]).status.success());
        assert!(vortex(b.path(), cfg, &[cmd]).status.success());
    }
    for f in ["landscape.csv", "minima.json", "layer.csv", "layer.json", "cf.json"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}
