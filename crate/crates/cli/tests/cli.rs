use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qdim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdim"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("qdim runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dim_of_cantor_prints_log2_over_log3() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdim(dir.path(), &["dim", "--model", "cantor"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let value: f64 = stdout(&o).trim().parse().unwrap();
    assert!((value - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
    assert!(stdout(&o).starts_with("0.630929"));

    let report = read_json(&dir.path().join("out/dim.json"));
    assert_eq!(report["command"], "dim");
    // the echoed configuration carries the model itself
    assert_eq!(report["config"]["model"]["kind"], "finite");
    assert_eq!(report["result"]["value"].as_f64().unwrap(), value);
    let csv = fs::read_to_string(dir.path().join("out/t_sequence.csv")).unwrap();
    assert!(csv.starts_with("n,t_n\n"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qdim(dir.path(), &["dim", "--model", "geom-a05-b033", "--out", "first"]).status.success());
    let report = read_json(&dir.path().join("first/dim.json"));
    let mut config = report["config"].clone();
    config["out"] = Value::String("second".into());
    fs::write(dir.path().join("echo.json"), config.to_string()).unwrap();
    assert!(qdim(dir.path(), &["dim", "--config", "echo.json"]).status.success());
    let again = read_json(&dir.path().join("second/dim.json"));
    assert_eq!(report["result"], again["result"]);
    assert_eq!(
        fs::read(dir.path().join("first/t_sequence.csv")).unwrap(),
        fs::read(dir.path().join("second/t_sequence.csv")).unwrap()
    );
}

const ESTIMATE_CONFIG: &str = r#"{
  "model": "cantor",
  "seed": 11,
  "tol": 1e-4,
  "estimate": {
    "ns": [8, 16, 32, 64],
    "strategy": { "kind": "antichain_fit", "anchor": "center" },
    "eval": { "kind": "mc", "samples": 4000, "ci_level": 0.95 }
  }
}"#;

#[test]
fn estimate_is_byte_identical_across_runs_and_worker_counts() {
    let mut outputs = Vec::new();
    for workers in ["1", "1", "4"] {
        // same config, same relative output directory, separate working directories
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.json"), ESTIMATE_CONFIG).unwrap();
        let o = qdim(dir.path(), &["estimate", "--config", "config.json", "--workers", workers]);
        assert!(o.status.success(), "{}", stdout(&o));
        let csv = fs::read(dir.path().join("out/curve.csv")).unwrap();
        let json = fs::read(dir.path().join("out/estimate.json")).unwrap();
        outputs.push((csv, json, stdout(&o)));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("mc(n=4000"));
}

#[test]
fn counter_schedule_is_flagged_not_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), r#"{"stability": {"lattice_ms": []}}"#).unwrap();
    let o = qdim(
        dir.path(),
        &["stability", "--config", "config.json", "--model", "geom-a05-b033", "--schedule", "equal-head"],
    );
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("hypothesis violated"));
    let report = read_json(&dir.path().join("out/stability.json"));
    assert_eq!(report["result"]["hypothesis_violated"], true);
    let csv = fs::read_to_string(dir.path().join("out/stability.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().any(|r| r.ends_with(",violated")));
    assert!(!dir.path().join("out/lattice.csv").exists());
}

#[test]
fn weight_schedule_passes_the_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), r#"{"model": "geom-a05-b033", "stability": {"lattice_ms": []}}"#)
        .unwrap();
    let o = qdim(dir.path(), &["stability", "--config", "config.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let report = read_json(&dir.path().join("out/stability.json"));
    assert_eq!(report["result"]["hypothesis_violated"], false);
    assert_eq!(report["result"]["monotone"], true);
}

#[test]
fn bad_config_gives_error_json() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"tol": "small"}"#).unwrap();
    let o = qdim(dir.path(), &["dim", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "ConfigError");
    assert!(err["error"]["message"].as_str().unwrap().contains("tol"));

    let o = qdim(dir.path(), &["dim", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qdim(dir.path(), &["dim", "--model", "no-such-model"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qdim(dir.path(), &["estimate", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn module_errors_keep_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    // the weight schedule perturbs a geometric family; cantor is not one
    let o = qdim(dir.path(), &["stability", "--model", "cantor"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "BadParameter");
    assert!(err["error"]["message"].as_str().unwrap().starts_with("building the schedule"));
}

#[test]
fn model_files_are_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("exp")).unwrap();
    let model = r#"{"dim": 1, "ambient": [[0, 1]], "kind": "finite",
        "maps": [{"ratio": 0.25, "orientation": 1, "translation": [0]},
                 {"ratio": 0.25, "orientation": 1, "translation": [0.75]}],
        "probs": [0.5, 0.5]}"#;
    fs::write(dir.path().join("exp/quarter.json"), model).unwrap();
    fs::write(dir.path().join("exp/config.json"), r#"{"model": "quarter.json"}"#).unwrap();
    let o = qdim(dir.path(), &["dim", "--config", "exp/config.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let value: f64 = stdout(&o).trim().parse().unwrap();
    assert!((value - 0.5).abs() < 1e-12);
}

#[test]
fn antichain_masses_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdim(dir.path(), &["antichain", "--model", "cantor", "--n", "40", "--tol", "1e-5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let r = &read_json(&dir.path().join("out/antichain.json"))["result"];
    assert!(r["card"].as_u64().unwrap() <= 40);
    assert_eq!(r["mass_total"].as_f64().unwrap(), 1.0);
    let csv = fs::read_to_string(dir.path().join("out/codebook.csv")).unwrap();
    assert_eq!(csv.lines().count() as u64, 1 + r["card"].as_u64().unwrap());
}

#[test]
fn continuity_table_for_the_geometric_family() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("config.json"),
        r#"{"model": "geom-a05-b033", "tol": 1e-6, "metrics": {"truncations": [5, 10], "ns": [1, 4]}}"#,
    )
    .unwrap();
    let o = qdim(dir.path(), &["metrics", "--config", "config.json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("out/continuity.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    // holds is the second to last column
    assert!(rows.iter().all(|r| r.split(',').rev().nth(1) == Some("true")), "{csv}");
}
