//! End-to-end runs of the `convsat` binary on a small synthetic corpus.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use convsat::data::write_jsonl;

fn convsat(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_convsat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "convsat {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = d.join("raw.jsonl");
    write_jsonl(&raw, &common::corpus(12, 2, 5, 21)).unwrap();

    let data = d.join("data.jsonl");
    convsat(&["ingest", "--format", "jsonl", "--input", p(&raw), "--out", p(&data)]);

    let features = d.join("features.csv");
    convsat(&["features", "--data", p(&data), "--out", p(&features)]);
    let csv = fs::read_to_string(&features).unwrap();
    let turns: usize = csv.lines().count() - 1;
    assert!(turns >= 24, "{turns} feature rows");

    let labeled = d.join("labeled.jsonl");
    let provenance = d.join("provenance.csv");
    convsat(&["weaklabel", "--data", p(&data), "--out", p(&labeled), "--provenance", p(&provenance)]);
    assert_eq!(fs::read_to_string(&provenance).unwrap().lines().count() - 1, turns);

    let run = d.join("run.json");
    fs::write(
        &run,
        r#"{"model": {"word_emb_dim": 8, "char_emb_dim": 4, "word_hidden": 6, "char_hidden": 3,
            "turn_hidden": 8, "head": "sigmoid1", "lr": 0.01},
            "train": {"epochs": 2, "batch_size": 4}}"#,
    )
    .unwrap();
    let model = d.join("model");
    convsat(&[
        "train", "--task", "sat-online", "--config", p(&run), "--train", p(&labeled), "--val", p(&labeled), "--out",
        p(&model),
    ]);
    for file in ["params.bin", "config.json", "vocab.json", "run_config.json", "train_log.json"] {
        assert!(model.join(file).exists(), "{file} missing");
    }

    let metrics = d.join("metrics.json");
    convsat(&["eval", "--model", p(&model), "--data", p(&labeled), "--task", "sat-online", "--out", p(&metrics)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert!(report["macro_f1"].is_number());

    let folds = convsat(&["eval", "--model", p(&model), "--data", p(&labeled), "--task", "sat-online", "--folds", "3"]);
    assert!(folds.contains("macro"), "{folds}");
    let heuristic = convsat(&["eval", "--heuristic", "--data", p(&labeled), "--task", "sat-online"]);
    assert!(!heuristic.is_empty());

    let batch = convsat(&["predict", "--model", p(&model), "--data", p(&labeled)]);
    let online = convsat(&["predict", "--model", p(&model), "--data", p(&labeled), "--online"]);
    assert_eq!(batch, online);
    let mut lines = batch.lines();
    assert_eq!(lines.next(), Some("conversation_id\tturn\tlabel\tprobability"));
    assert_eq!(lines.count(), turns);

    let importance = d.join("importance.csv");
    convsat(&["importance", "--model", p(&model), "--data", p(&labeled), "--repeats", "1", "--out", p(&importance)]);
    assert_eq!(fs::read_to_string(&importance).unwrap().lines().count(), 52);
}

#[test]
fn bad_input_fails_with_a_message() {
    let out = Command::new(env!("CARGO_BIN_EXE_convsat"))
        .args(["eval", "--model", "/nonexistent", "--data", "/nonexistent.jsonl", "--task", "breakdown"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
