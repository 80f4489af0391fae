use std::path::Path;
use std::process::{Command, Output};

use dextt_core::config::EcosystemConfig;

fn dextt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dextt")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn worked_example_snapshot_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EcosystemConfig::worked_example_json());
    let out = dir.path().join("out");
    let o = dextt(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snapshot = std::fs::read_to_string(out.join("run/run-0.snapshot.json")).unwrap();
    assert_eq!(snapshot, include_str!("../../core/tests/golden/worked_example.json"));
    let ledger = std::fs::read_to_string(out.join("run/run-0.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 2);
    assert!(ledger.lines().nth(1).unwrap().ends_with(",3;3;3,false"), "{ledger}");
}

#[test]
fn zero_duration_writes_an_empty_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"duration": 0}"#);
    let out = dir.path().join("out");
    let o = dextt(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seeds", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ledger = std::fs::read_to_string(out.join("run/run-4.csv")).unwrap();
    assert_eq!(ledger, "alpha,sender,recipient,amount,t0,t1,winner,contests,corrupted\n");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"duration": 200, "experiment": {"validity_values": [15, 40]}}"#);
    let mut outputs = Vec::new();
    for (i, extra) in [[].as_slice(), ["--sequential"].as_slice()].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let mut args = vec!["--campaign", "sweep-validity", "--config", &cfg, "--seeds", "1-3", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert!(dextt(&args).status.success());
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out.join("sweep-validity"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0].len(), 5);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn malformed_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"chain_count\": 3,\n  \"bogus\": 1\n}\n");
    let o = dextt(&["--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
}

#[test]
fn invalid_config_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"chain_count": 0}"#);
    let o = dextt(&["--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn incentive_needs_two_observers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": {"cost_n_values": [1]}}"#);
    let o = dextt(&["--campaign", "incentive", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn incentive_prints_the_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let o = dextt(&["--campaign", "incentive", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for want in ["2.83", "14.15", "94.32"] {
        assert!(text.contains(want), "{text}");
    }
}

#[test]
fn veto_demo_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = dextt(&["--campaign", "veto-demo", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("veto-demo/veto-demo-0.json").exists());
}
