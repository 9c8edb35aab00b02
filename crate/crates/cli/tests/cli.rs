use std::process::{Command, Output};

fn dtgspl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtgspl")).args(args).output().unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert!(v["error"]["message"].is_string());
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn lattice_dump_lists_136_proposals() {
    let out = dtgspl(&["lattice", "dump", "--n", "16"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 136);
    assert_eq!(v["proposals"].as_array().unwrap().len(), 136);
}

#[test]
fn report_on_empty_dir_names_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dtgspl(&["report", "--run", dir.path().to_str().unwrap()]);
    assert_eq!(error_kind(&out), "missing_artifacts");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("epochs.jsonl") && msg.contains("metrics.json"));
}

#[test]
fn failures_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(error_kind(&dtgspl(&["train", "--data", "/no/such/file.jsonl", "--out", d])), "io");
    assert_eq!(error_kind(&dtgspl(&["frobnicate"])), "usage");

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    assert_eq!(error_kind(&dtgspl(&["gen", "--config", cfg.to_str().unwrap(), "--out", d])), "toml");

    std::fs::write(&cfg, "[ablation]\nno_matching = true\nno_reconstruction = true\n").unwrap();
    assert_eq!(error_kind(&dtgspl(&["gen", "--config", cfg.to_str().unwrap(), "--out", d])), "config");
}

#[test]
fn eval_scores_external_records() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dir.path().join("records.jsonl");
    std::fs::write(
        &recs,
        "{\"id\":\"a\",\"predictions\":[[0.0,0.2],[0.9,1.0]],\"annotations\":[[0.0,0.2],[0.5,0.7]]}\n",
    )
    .unwrap();
    let out = dtgspl(&["eval", "--records", recs.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("metrics_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "metric,n,g,alpha,beta,value,samples");
    assert!(lines.next().unwrap().starts_with("recall_multi,5,5,0.5,,50,1"));
}
