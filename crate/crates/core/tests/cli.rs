mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultrepair")).args(args).output().unwrap()
}

fn small_config(out: &Path) -> Value {
    json!({
        "dataset": {"synthetic_discrete": {
            "states": ["Rest", "LeftFist", "RightFist"],
            "forbidden": [["LeftFist", "RightFist"], ["RightFist", "LeftFist"]],
            "weights": [0.5, 0.3, 0.2],
            "mean_dwell": 15.0,
            "means": [[0, 0, 0, 0], [2, 0, 1, 0], [2, 2, 1, 1.5]],
            "noise": 0.7,
            "length": 3000,
            "seed": 3
        }},
        "train_thinning": {"state": "RightFist", "keep": 0.2},
        "decoder": {"kind": "softmax", "epochs": 100},
        "oracles": {
            "enabled": ["IllegalTransition", "TemporalInconsistencyDiscrete"],
            "forbidden_transitions": [["LeftFist", "RightFist"], ["RightFist", "LeftFist"]]
        },
        "slices": [{"kind": "task"}],
        "acquisition": {"strategies": ["fault_based", "natural", "corrected_only"], "n": 100},
        "trials": 3,
        "seed": 11,
        "output_dir": out
    })
}

fn write(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config(dir.path()));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bin(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mb: Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["sha256"], mb["sha256"]);
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    let rows = fs::read_to_string(a.join("dataset.csv")).unwrap().lines().count() - 1;
    assert_eq!(ma["length"], json!(rows));
    assert_eq!(ma["seed"], json!(3));

    let o = bin(&["generate", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    let mc: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_ne!(mc["sha256"], mb["sha256"]);
}

#[test]
fn invalid_scenario_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(dir.path());
    v["dataset"]["synthetic_discrete"]["weights"] = json!([1.0, 0.0]);
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &v);
    let o = bin(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn config_errors_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(dir.path());
    v["oracles"]["forbidden_transitions"] = json!([["LeftFist", "Sideways"]]);
    v["acquisition"]["n"] = json!(0);
    v["heuristics"] = json!({"wake_state": "Nowhere"});
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &v);
    let o = bin(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Sideways"), "{err}");
    assert!(err.contains("n must be > 0"), "{err}");
    assert!(err.contains("Nowhere"), "{err}");
    assert!(!dir.path().join("experiment.json").exists());
}

#[test]
fn natural_with_zero_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_config(dir.path());
    v["acquisition"] = json!({"strategies": ["natural"], "n": 0});
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &v);
    assert_eq!(bin(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bin(&["run"]).status.code(), Some(1));
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config(&dir.path().join("ignored")));
    let out = dir.path().join("run");
    let o = bin(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strategies",
        "fault_based,natural",
        "--parallel-trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("experiment.json")).unwrap()).unwrap();
    assert_eq!(report["outcomes"].as_array().unwrap().len(), 3);
    let names: Vec<&str> = report["aggregates"].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(names, ["baseline", "fault_based", "natural"]);
    let pairs: Vec<(String, String)> = report["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["a"].as_str().unwrap().to_string(), c["b"].as_str().unwrap().to_string()))
        .collect();
    assert!(pairs.contains(&("fault_based".into(), "baseline".into())));
    assert!(pairs.contains(&("fault_based".into(), "natural".into())));
    assert!(out.join("localization.json").exists());
    for seed in 11..14 {
        let t = out.join("trials").join(seed.to_string());
        for f in ["events.jsonl", "corrections.jsonl", "slices.csv"] {
            assert!(t.join(f).exists(), "{f} missing for trial {seed}");
        }
    }
    assert!(!dir.path().join("ignored").exists());

    // sidecars feed the standalone localizer
    let t = out.join("trials/11");
    let lo = dir.path().join("loc");
    let o = bin(&[
        "localize",
        "--events",
        t.join("events.jsonl").to_str().unwrap(),
        "--slices",
        t.join("slices.csv").to_str().unwrap(),
        "--fault-types",
        "IllegalTransition,TemporalInconsistencyDiscrete",
        "--task-family",
        "task",
        "--out",
        lo.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let standalone: Value = serde_json::from_str(&fs::read_to_string(lo.join("localization.json")).unwrap()).unwrap();
    let embedded = &report["outcomes"][0]["localization"];
    let keyed = |e: &Value| -> std::collections::BTreeMap<String, Value> {
        let rows = e["table"]["rows"].as_array().unwrap();
        rows.iter().map(|r| r.as_str().unwrap().to_string()).zip(e["table"]["counts"].as_array().unwrap().iter().cloned()).collect()
    };
    let (a, b) = (standalone["entries"].as_array().unwrap(), embedded["entries"].as_array().unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(keyed(x), keyed(y));
        assert_eq!(x["test"], y["test"]);
    }
}

#[test]
fn localize_empty_events_is_untestable() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("events.jsonl");
    let sl = dir.path().join("slices.csv");
    fs::write(&ev, "").unwrap();
    fs::write(&sl, "index,family,label\n0,task,A\n1,task,B\n2,task,A\n").unwrap();
    let o = bin(&["localize", "--events", ev.to_str().unwrap(), "--slices", sl.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("localization.json")).unwrap()).unwrap();
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 7);
    for e in entries {
        assert_eq!(e["test"]["status"], "untestable");
        for row in e["table"]["counts"].as_array().unwrap() {
            assert_eq!(row[0], 0);
        }
    }
}

#[test]
fn localize_hand_fixture() {
    // 30 executions per task; faults on 10 of A and 20 of B
    let dir = tempfile::tempdir().unwrap();
    let mut events = String::new();
    let mut slices = String::from("index,family,label\n");
    for i in 0..60 {
        let task = if i < 30 { "A" } else { "B" };
        slices.push_str(&format!("{i},task,{task}\n"));
        if i < 10 || (30..50).contains(&i) {
            events.push_str(&format!(
                "{{\"type\":\"IllegalTransition\",\"start\":{i},\"end\":{i},\"oracle_id\":\"illegal_transition\",\"detail\":\"\"}}\n"
            ));
        }
    }
    let (ev, sl) = (dir.path().join("e.jsonl"), dir.path().join("s.csv"));
    fs::write(&ev, events).unwrap();
    fs::write(&sl, slices).unwrap();
    let o = bin(&[
        "localize", "--events", ev.to_str().unwrap(), "--slices", sl.to_str().unwrap(),
        "--fault-types", "IllegalTransition", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("localization.json")).unwrap()).unwrap();
    let stat = r["entries"][0]["test"]["statistic"].as_f64().unwrap();
    assert!((stat - 20.0 / 3.0).abs() < 1e-9);
}

#[test]
fn malformed_event_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("events.jsonl");
    let sl = dir.path().join("slices.csv");
    fs::write(&ev, "{\"type\":\"IllegalTransition\",\"start\":0,\"end\":0,\"oracle_id\":\"x\",\"detail\":\"\"}\nnot json\n").unwrap();
    fs::write(&sl, "index,family,label\n0,task,A\n").unwrap();
    let o = bin(&["localize", "--events", ev.to_str().unwrap(), "--slices", sl.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("events.jsonl:2"));
}

#[test]
fn shipped_configs_validate() {
    for entry in fs::read_dir(common::repo_root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let cfg = faultrepair::config::RunConfig::from_path(&path).unwrap();
        cfg.resolve().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
