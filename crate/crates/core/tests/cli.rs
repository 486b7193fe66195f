use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn acyl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acyl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "name": "small_flat",
  "manifold": {
    "topology": "two_end_cylinder",
    "cross_section": {"kind": "circle", "radius": 1.0, "mesh_points": 16},
    "warp": {"kind": "constant", "c": 1.0},
    "truncation_r": 8.0,
    "grid_h": 0.1
  }STAGES
}"#;

fn small(stages: &str) -> String {
    SMALL.replace("STAGES", stages)
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small(",\n  \"stagez\": []"));
    let out = acyl(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 11") && err.contains("stagez"), "{err}");
}

#[test]
fn empty_stage_list_gives_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small(",\n  \"stages\": []"));
    let out = acyl(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdicts"], serde_json::json!([]));
    assert_eq!(v["config"]["manifold"]["core_radius"].as_f64(), Some(2.0));
    assert_eq!(v["config"]["tolerances"]["split_factor"].as_f64(), Some(50.0));
}

#[test]
fn zero_tolerance_fails_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"schema_version": 1, "tolerances": {"ode_relative": 0}}"#);
    let out = acyl(&["suite", "--config", &cfg, "--filter", "harmonic"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("failed check: flat_cylinder/harmonic.ode_oracle"), "{err}");
}

#[test]
fn filter_runs_only_spectral_checks() {
    let out = acyl(&["suite", "--filter", "indicial"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let scenarios = v["scenarios"].as_array().unwrap();
    assert!(!scenarios.is_empty());
    for s in scenarios {
        for c in s["verdicts"].as_array().unwrap() {
            assert!(c["check"].as_str().unwrap().starts_with("indicial."), "{c}");
            assert!(c.get("expected_source").is_some());
        }
    }
    let out = acyl(&["suite", "--filter", "no_such_stage"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn harmonic_flags_on_the_cigar() {
    let out = acyl(&["harmonic", "--model", "cigar", "--C", "0", "--D", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks: Vec<&str> = v["verdicts"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap()).collect();
    assert!(checks.contains(&"harmonic.constant_spread"));
    assert!(!checks.contains(&"harmonic.one_end_rejected"));

    let out = acyl(&["harmonic", "--model", "cigar"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rejected = v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "harmonic.one_end_rejected")
        .unwrap();
    assert_eq!(rejected["status"], "expected_fail");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unbalanced_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small(""));
    let out = acyl(&["harmonic", "--config", &cfg, "--C", "1,1", "--D", "0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["stage_errors"]["harmonic"].as_str().unwrap().contains("Ker"));

    let out = acyl(&["harmonic", "--config", &cfg, "--C", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small(""));
    let out_dir = dir.path().join("out");
    let out = acyl(&["bochner", "--config", &cfg, "--format", "both", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = std::fs::read_to_string(out_dir.join("bochner_sweep.csv")).unwrap();
    assert!(sweep.starts_with("R,interior,ricci,boundary_1,boundary_2,residual\n"));
    assert_eq!(sweep.lines().count(), 4);
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("verdicts.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS  bochner.identity_R5"));

    let out = acyl(&["spectrum", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}
