use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "synth": {"num_users": 120, "num_topics": 6},
  "model": {"item_dim": 8, "heads": 2, "d_model": 8, "metadata_present": true,
            "clusterer": {"method": "ward", "k": 3}},
  "train": {"max_epochs": 3, "patience": 2, "batch_size": 32, "adam": {"lr": 0.01}}
}"#;

fn mip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = mip(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn pipeline_is_idempotent_under_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("cfg.json"), CONFIG).unwrap();
    for run in ["a", "b"] {
        let data = format!("data_{run}");
        let model = format!("model_{run}");
        let eval = format!("eval_{run}");
        ok(d, &["--config", "cfg.json", "--seed", "3", "synth", "--out", &data]);
        ok(d, &["--config", "cfg.json", "--seed", "3", "--stable", "train", "--split", &data, "--out", &model]);
        let ckpt = format!("{model}/model.ckpt");
        ok(d, &["--stable", "eval", "--checkpoint", &ckpt, "--split", &data, "--out", &eval, "--ks", "10,50"]);
    }
    for f in ["data_{}/train.jsonl", "data_{}/manifest.json", "model_{}/train_report.json", "eval_{}/eval_report.json"] {
        assert_eq!(read(d.join(f.replace("{}", "a"))), read(d.join(f.replace("{}", "b"))), "{f}");
    }
    assert_eq!(
        fs::read(d.join("model_a/model.ckpt")).unwrap(),
        fs::read(d.join("model_b/model.ckpt")).unwrap()
    );
    let report: serde_json::Value = serde_json::from_str(&read(d.join("eval_a/eval_report.json"))).unwrap();
    assert_eq!(report["at_k"].as_array().unwrap().len(), 2);
    let run: serde_json::Value = serde_json::from_str(&read(d.join("model_a/run.json"))).unwrap();
    assert_eq!(run["config_hash"].as_str().unwrap().len(), 64);
    assert!(d.join("model_a/config.json").exists());

    ok(d, &["recluster-sweep", "--checkpoint", "model_a/model.ckpt", "--split", "data_a", "--out", "sweep", "--methods", "ward,dbscan", "--ks", "2,4"]);
    let md = read(d.join("sweep/recluster_sweep.md"));
    assert_eq!(md.lines().count(), 2 + 4);
    ok(d, &["--stable", "latency", "--checkpoint", "model_a/model.ckpt", "--split", "data_a", "--out", "lat", "--samples", "3"]);
    let lat: serde_json::Value = serde_json::from_str(&read(d.join("lat/latency.json"))).unwrap();
    assert_eq!(lat.as_array().unwrap().len(), 4);
}

#[test]
fn prepare_from_raw_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut csv = String::from("user,item,timestamp\n");
    for u in 0..30 {
        for i in 0..100 {
            csv += &format!("u{u},i{},{}\n", (u + i % 25) % 40, i * 3600);
        }
    }
    fs::write(d.join("raw.csv"), csv).unwrap();
    fs::write(d.join("cfg.json"), r#"{"prepare": {"negatives": 10, "fractions": {"train": 0.6, "valid": 0.2, "test": 0.2}}}"#).unwrap();
    ok(d, &["--config", "cfg.json", "prepare", "--input", "raw.csv", "--out", "split"]);
    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("split/manifest.json"))).unwrap();
    assert_eq!(manifest["train"].as_u64().unwrap() + manifest["valid"].as_u64().unwrap() + manifest["test"].as_u64().unwrap(), 30);
}

fn error_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).lines().next().unwrap_or_default().to_string()
}

#[test]
fn failures_exit_nonzero_with_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = mip(d, &["eval", "--checkpoint", "missing.ckpt", "--split", "nowhere"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(error_line(&out).starts_with("error kind=io: "));

    fs::write(d.join("bad.json"), r#"{"train": {"max_epoch": 3}}"#).unwrap();
    let out = mip(d, &["--config", "bad.json", "synth"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_line(&out).starts_with("error kind=config: "));

    fs::write(d.join("cfg.json"), CONFIG).unwrap();
    ok(d, &["--config", "cfg.json", "synth", "--out", "data"]);
    let manifest = read(d.join("data/manifest.json")).replace("\"version\": 1", "\"version\": 7");
    fs::write(d.join("data/manifest.json"), manifest).unwrap();
    let out = mip(d, &["--config", "cfg.json", "train", "--split", "data", "--out", "m"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(error_line(&out).starts_with("error kind=version: "));

    let out = mip(d, &["train", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=usage: "));
}
