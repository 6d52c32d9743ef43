use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commsense")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(cli(&["run", "--seed", "x"], dir.path()).status.code(), Some(1));
    assert_eq!(cli(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(cli(&["run", "--config", "missing.json"], dir.path()).status.code(), Some(2));
    fs::write(
        dir.path().join("empty.json"),
        r#"{"scenario": {"categories": [0], "snapshots_per_category": 5}, "output_dir": "o"}"#,
    )
    .unwrap();
    let out = cli(&["run", "--config", "empty.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detector stage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn simulate_extract_fit_detect_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("scen.json"), r#"{"snapshots_per_category": 40}"#).unwrap();
    let out = cli(&["simulate", "--config", "scen.json", "--out", "d.csid", "--iq-dir", "iq", "--json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 320);
    assert_eq!(summary["iq_files"].as_array().unwrap().len(), 8);

    let iq: Vec<String> =
        summary["iq_files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut args = vec!["extract", "--out", "x.csid"];
    args.extend(iq.iter().map(String::as_str));
    assert!(cli(&args, d).status.success());

    assert!(cli(&["fit", "--dataset", "d.csid", "--out", "m.json"], d).status.success());
    let out = cli(&["detect", "--model", "m.json", "--dataset", "d.csid", "--json", "--out", "dec.csv"], d);
    assert!(out.status.success());
    let det: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(det["rows"], 320);
    assert_eq!(fs::read_to_string(d.join("dec.csv")).unwrap().lines().count(), 321);

    let out = cli(&["estimate", "--dataset", "d.csid", "--train", "15", "--test", "25", "--json"], d);
    assert!(out.status.success());
    let est: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(est["accuracy"].as_f64().unwrap() > 0.5);
    assert_eq!(cli(&["estimate", "--dataset", "d.csid"], d).status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("e.json"),
        r#"{"scenario": {"snapshots_per_category": 50}, "splits": [{"train": 20, "test": 30}]}"#,
    )
    .unwrap();
    for out in ["a", "b"] {
        assert!(cli(&["run", "--config", "e.json", "--out", out], d).status.success());
    }
    for entry in fs::read_dir(d.join("a")).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "report.json" {
            continue; // echoes the differing output directory
        }
        assert_eq!(fs::read(d.join("a").join(&name)).unwrap(), fs::read(d.join("b").join(&name)).unwrap(), "{name:?}");
    }
}
