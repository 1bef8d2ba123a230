use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn magspy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magspy")).current_dir(dir).args(args).output().expect("spawn magspy")
}

fn small_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "classes": 4,
        "traces_per_class": 10,
        "forest": { "n_estimators": 25 },
        "continuous": { "streams": 2, "stream_s": 60 },
        "snr": { "gains": [0.0, 1.0, 2.0] }
    });
    let path = dir.join("small.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    assert!(dir.join("report.txt").exists());
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn simulate_train_classify_detect() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);

    let out = magspy(d, &["simulate", "--config", &cfg, "--out", "sim"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&d.join("sim"))["n_recordings"], 40);

    let out = magspy(d, &["train", "--config", &cfg, "--data", "sim/recordings.jsonl", "--pattern-label", "class-00", "--out", "tr"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("tr/model.json").exists() && d.join("tr/pattern.json").exists());

    let out = magspy(d, &["eval", "--model", "tr/model.json", "--data", "sim/recordings.jsonl", "--out", "ev"]);
    assert!(out.status.success());
    let r = report(&d.join("ev"));
    assert!(r["eval"]["accuracy"].as_f64().unwrap() > 0.9);
    let lines = std::fs::read_to_string(d.join("ev/predictions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 40);

    let out = magspy(d, &["simulate", "--config", &cfg, "--streams", "2", "--out", "st"]);
    assert!(out.status.success());
    let out = magspy(
        d,
        &["detect", "--config", &cfg, "--data", "st/streams.jsonl", "--pattern", "tr/pattern.json", "--model", "tr/model.json", "--min-height", "5", "--out", "de"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&d.join("de"));
    assert_eq!(r["thresholds"]["min_height"], 5.0);
    for line in std::fs::read_to_string(d.join("de/detections.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["time_s"].is_f64() && v["score"].is_f64() && v.get("label").is_some());
    }
}

#[test]
fn motion_threshold_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);
    assert!(magspy(d, &["simulate", "--config", &cfg, "--out", "sim"]).status.success());
    assert!(magspy(d, &["train", "--config", &cfg, "--data", "sim/recordings.jsonl", "--out", "tr"]).status.success());
    // stationary renders have an exactly zero rotation rate, so only a negative threshold rejects
    let out = magspy(
        d,
        &["classify", "--model", "tr/model.json", "--data", "sim/recordings.jsonl", "--motion-mean-threshold", "0", "--out", "a"],
    );
    assert!(out.status.success());
    assert_eq!(report(&d.join("a"))["n_rejected"], 0);
    let out = magspy(
        d,
        &["classify", "--model", "tr/model.json", "--data", "sim/recordings.jsonl", "--motion-max-threshold", "-1", "--out", "b"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scenario_reports_are_deterministic_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);
    for (out, threads) in [("one", "1"), ("four", "4")] {
        let o = magspy(d, &["eval", "--scenario", "closed-world", "--config", &cfg, "--seed", "7", "--threads", threads, "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(d.join("one/report.json")).unwrap();
    let b = std::fs::read(d.join("four/report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(report(&d.join("one"))["config"]["seed"], 7);
}

#[test]
fn snr_and_sweep_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);
    assert!(magspy(d, &["snr", "--config", &cfg, "--out", "snr"]).status.success());
    let r = report(&d.join("snr"));
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 3);
    assert!(magspy(d, &["sweep", "--config", &cfg, "--rates", "100,10", "--out", "sw"]).status.success());
    let r = report(&d.join("sw"));
    assert_eq!(r["result"]["rows"][1]["rate_hz"], 10.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(magspy(d, &["eval", "--scenario", "nope"]).status.code(), Some(1));
    assert_eq!(magspy(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(magspy(d, &["sweep", "--rates", "100,-1"]).status.code(), Some(1));
    std::fs::write(d.join("bad.jsonl"), "{\"device_id\":\"x\"}\n").unwrap();
    assert_eq!(magspy(d, &["train", "--data", "bad.jsonl"]).status.code(), Some(1));
    assert_eq!(magspy(d, &["train", "--data", "missing.jsonl"]).status.code(), Some(2));
    assert!(magspy(d, &["--help"]).status.success());
}
