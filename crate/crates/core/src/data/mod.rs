//! Interaction data: ingestion, 10-core filtering, fixed-length sequence
//! construction with sampled negatives, user-level splits, a synthetic
//! multi-interest generator, and the on-disk split directory.

mod ingest;
mod io;
mod sequences;
mod synth;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use ingest::{ingest, ingest_str, IngestOptions, TimeUnit};
pub use io::{read_features, read_split, write_split, Manifest, SPLIT_FORMAT_VERSION};
pub use sequences::{
    build_gap_split, build_sequences, group_by_user, is_observed_negative, mix_negatives, prepare_split,
    sample_negatives, split_users, ten_core_filter, PrepareOptions, SplitFractions,
};
pub use synth::{synth_events, synth_generate, synth_user_topics, Skew, SynthConfig, SynthDataset, UserProfile};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One engagement, timestamp in days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub timestamp: f64,
    /// Optional engagement type (e.g. `click`, `hide`, `impression`).
    pub label: Option<String>,
}

/// Model input for one user window: chronologically sorted inputs with
/// timestamps (days, starting at 0), followed-on positives, and sampled
/// negatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceExample {
    pub user: String,
    pub items: Vec<u32>,
    pub timestamps: Vec<f64>,
    pub positives: Vec<u32>,
    pub negatives: Vec<u32>,
}

/// Item-id ↔ dense index map; indices follow insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut v = Self::new();
        for id in ids {
            if v.index.contains_key(&id) {
                return Err(Error::Validation(format!("duplicate item id `{id}` in vocabulary")));
            }
            v.insert(id);
        }
        Ok(v)
    }

    /// Index of `id`, adding it if new.
    pub fn insert(&mut self, id: String) -> u32 {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        i
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: u32) -> &str {
        &self.ids[index as usize]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Train/validation/test sequences over a shared vocabulary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SequenceExample>,
    pub valid: Vec<SequenceExample>,
    pub test: Vec<SequenceExample>,
    pub vocab: Vocabulary,
    /// Dense item features (`|vocab| × d`) when items carry metadata.
    pub features: Option<Matrix>,
    /// Ground-truth interest of each item (synthetic data only).
    pub item_interests: Option<Vec<usize>>,
}

impl DatasetSplit {
    /// Checks user disjointness and that every id is in-vocabulary.
    pub fn validate(&self) -> Result<()> {
        let n = self.vocab.len() as u32;
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for (name, set) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for ex in set {
                if let Some(prev) = owner.insert(&ex.user, name) {
                    if prev != name {
                        return Err(Error::Validation(format!("user `{}` appears in {prev} and {name}", ex.user)));
                    }
                }
                if ex.items.len() != ex.timestamps.len() {
                    return Err(Error::Validation(format!("user `{}`: items/timestamps length mismatch", ex.user)));
                }
                let all = ex.items.iter().chain(&ex.positives).chain(&ex.negatives);
                if let Some(bad) = all.into_iter().find(|&&i| i >= n) {
                    return Err(Error::Validation(format!("user `{}`: item index {bad} out of vocabulary", ex.user)));
                }
            }
        }
        if let Some(f) = &self.features {
            if f.rows() != self.vocab.len() {
                return Err(Error::Validation(format!(
                    "feature table has {} rows for {} items",
                    f.rows(),
                    self.vocab.len()
                )));
            }
        }
        Ok(())
    }
}
