use std::path::Path;
use std::process::{Command, Output};

fn posespace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posespace"))
        .args(args)
        .env("POSESPACE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = posespace(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = posespace(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn bad_flags_are_named() {
    let out = posespace(&["train", "--data", "x.jsonl", "--out", "y.json", "--epochs", "many"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--epochs"), "{}", stderr(&out));

    let out = posespace(&["synth-data", "--out", "x.jsonl", "--classes", "wave"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("wave"), "{}", stderr(&out));
}

#[test]
fn missing_inputs_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nowhere.jsonl");
    let out = posespace(&["train", "--data", &missing, "--out", &p(dir.path(), "m.json")]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.jsonl"), "{}", stderr(&out));

    let out = posespace(&["embed-music", "--catalog", &missing, "--out", &p(dir.path(), "s.json")]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.jsonl"), "{}", stderr(&out));
}

#[test]
fn invalid_debounce_settings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth-data",
        "--clips",
        "1",
        "--out",
        &p(d, "c.jsonl"),
        "--catalog",
        &p(d, "cat.csv"),
        "--tracks",
        "30",
        "--stream",
        &p(d, "s.jsonl"),
    ]);
    ok(&["train", "--data", &p(d, "c.jsonl"), "--epochs", "1", "--split", "0.5", "--out", &p(d, "m.json")]);
    ok(&["embed-music", "--catalog", &p(d, "cat.csv"), "--out", &p(d, "space.json")]);
    let out = posespace(&[
        "replay",
        "--ckpt",
        &p(d, "m.json"),
        "--space",
        &p(d, "space.json"),
        "--stream",
        &p(d, "s.jsonl"),
        "--events",
        &p(d, "e.jsonl"),
        "--tau",
        "1.5",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn synth_train_eval_embed_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth-data",
        "--clips",
        "12",
        "--seed",
        "2",
        "--out",
        &p(d, "clips.jsonl"),
        "--catalog",
        &p(d, "cat.csv"),
        "--tracks",
        "200",
        "--embedding",
        &p(d, "emb.csv"),
        "--stream",
        &p(d, "stream.jsonl"),
    ]);
    let stdout = ok(&[
        "train",
        "--data",
        &p(d, "clips.jsonl"),
        "--epochs",
        "10",
        "--seed",
        "2",
        "--out",
        &p(d, "model.json"),
        "--history",
        &p(d, "history.jsonl"),
    ]);
    assert!(stdout.contains("trained 10 epochs"), "{stdout}");
    let history = std::fs::read_to_string(d.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 10);
    let ckpt = std::fs::read_to_string(d.join("model.json")).unwrap();
    assert!(ckpt.contains("posespace-ckpt-v1"));

    ok(&["eval", "--ckpt", &p(d, "model.json"), "--data", &p(d, "clips.jsonl"), "--report", &p(d, "report.json")]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let precision = report["precision"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&precision));
    assert!(precision > 50.0, "precision {precision}");
    assert_eq!(report["confusion"].as_array().unwrap().len(), 6);

    ok(&["embed-music", "--catalog", &p(d, "cat.csv"), "--out", &p(d, "pca.json")]);
    ok(&["embed-music", "--catalog", &p(d, "cat.csv"), "--import", &p(d, "emb.csv"), "--out", &p(d, "space.json")]);

    let replay = |events: &str| {
        ok(&[
            "replay",
            "--ckpt",
            &p(d, "model.json"),
            "--space",
            &p(d, "space.json"),
            "--stream",
            &p(d, "stream.jsonl"),
            "--events",
            &p(d, events),
        ]);
        std::fs::read(d.join(events)).unwrap()
    };
    let first = replay("a.jsonl");
    let second = replay("b.jsonl");
    assert_eq!(first, second);
    for line in String::from_utf8(first).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["type"].is_string() && v["t"].is_number(), "{line}");
    }
}
