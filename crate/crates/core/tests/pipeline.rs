use std::collections::HashSet;
use std::path::Path;

use mip_core::checkpoint::{load_checkpoint, save_checkpoint};
use mip_core::clustering::{ClusterMethod, ClustererConfig};
use mip_core::data::{
    ingest_str, prepare_split, read_split, synth_generate, write_split, IngestOptions, PrepareOptions, SplitFractions,
    SynthConfig,
};
use mip_core::metrics::{evaluate, EvalOptions};
use mip_core::model::{MipModel, ModelConfig};
use mip_core::training::{train, TrainConfig};
use mip_core::Error;

fn raw_csv(users: usize) -> String {
    let mut out = String::from("user,item,timestamp\n");
    for u in 0..users {
        for i in 0..100 {
            out += &format!("u{u},i{},{}\n", (u + i % 25) % 40, i * 86_400);
        }
    }
    out
}

#[test]
fn raw_file_to_split_on_disk() {
    let rows = ingest_str(&raw_csv(30), Path::new("raw.csv"), &IngestOptions::default()).unwrap();
    let opts = PrepareOptions {
        negatives: 10,
        fractions: SplitFractions {
            train: 0.6,
            valid: 0.2,
            test: 0.2,
        },
        ..PrepareOptions::default()
    };
    let split = prepare_split(&rows, &opts, None).unwrap();
    split.validate().unwrap();
    let users = |s: &[mip_core::data::SequenceExample]| s.iter().map(|e| e.user.clone()).collect::<HashSet<_>>();
    assert!(users(&split.train).is_disjoint(&users(&split.test)));
    assert_eq!(split.train.len() + split.valid.len() + split.test.len(), 30);
    for ex in split.train.iter().chain(&split.test) {
        assert_eq!(ex.items.len(), 50);
        assert_eq!(ex.positives.len(), 50);
        assert_eq!(ex.negatives.len(), 10);
        let seen: HashSet<u32> = ex.items.iter().chain(&ex.positives).copied().collect();
        assert!(ex.negatives.iter().all(|n| !seen.contains(n)));
        assert!(ex.timestamps.windows(2).all(|w| w[0] <= w[1]));
    }

    let dir = tempfile::tempdir().unwrap();
    let manifest = write_split(dir.path(), &split, 0, "abc").unwrap();
    let (back, read_manifest) = read_split(dir.path()).unwrap();
    assert_eq!(read_manifest, manifest);
    assert_eq!(back.train, split.train);
    assert_eq!(back.vocab.ids(), split.vocab.ids());
}

#[test]
fn trained_checkpoint_evaluates_identically_after_reload() {
    let synth = SynthConfig {
        num_users: 120,
        num_topics: 6,
        ..SynthConfig::default()
    };
    let split = synth_generate(&synth).unwrap().split;
    let cfg = ModelConfig {
        item_dim: 8,
        heads: 2,
        d_model: 8,
        metadata_present: true,
        clusterer: ClustererConfig::with_method(ClusterMethod::Ward, 3),
        ..ModelConfig::default()
    };
    let mut model = MipModel::new(cfg, split.vocab.len(), split.features.as_ref(), 1).unwrap();
    let tc = TrainConfig {
        max_epochs: 2,
        patience: 1,
        batch_size: 32,
        ..TrainConfig::default()
    };
    train(&mut model, &split, &tc).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &model).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let opts = EvalOptions {
        clusterer: model.config().clusterer,
        ..EvalOptions::default()
    };
    let a = evaluate(&model.view(), &split.test, &opts).unwrap();
    let b = evaluate(&back.view(), &split.test, &opts).unwrap();
    assert_eq!(a, b);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[8..12].copy_from_slice(&9u32.to_le_bytes());
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Version { found: 9, .. })));
}

#[test]
fn training_rejects_mismatched_vocabulary() {
    let split = synth_generate(&SynthConfig {
        num_users: 40,
        ..SynthConfig::default()
    })
    .unwrap()
    .split;
    let cfg = ModelConfig {
        item_dim: 8,
        metadata_present: false,
        ..ModelConfig::default()
    };
    let mut model = MipModel::new(cfg, split.vocab.len() + 1, None, 0).unwrap();
    assert!(matches!(
        train(&mut model, &split, &TrainConfig::default()),
        Err(Error::Validation(_))
    ));
}
