//! One JSON document configuring a whole run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{IngestOptions, PrepareOptions, SynthConfig};
use crate::error::{Error, Result};
use crate::experiments::SweepConfig;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    /// Raw `user,item,timestamp[,label]` file for `prepare`.
    pub input: Option<PathBuf>,
    /// Dense-feature sidecar for metadata mode.
    pub features: Option<PathBuf>,
    /// Prepared split directory.
    pub split: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub latency_samples: usize,
    pub latency_warmup: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![20, 50],
            latency_samples: 50,
            latency_warmup: 5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataPaths,
    pub ingest: IngestOptions,
    pub prepare: PrepareOptions,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    /// Parses and validates; unknown keys are errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if self.eval.ks.contains(&0) || self.sweep.ks.contains(&0) {
            return Err(Error::Config("cutoffs and cluster counts must be positive".into()));
        }
        if self.prepare.input_len > self.model.max_len {
            return Err(Error::Config(format!(
                "prepare.input_len {} exceeds model.max_len {}",
                self.prepare.input_len, self.model.max_len
            )));
        }
        Ok(())
    }

    /// Sets every seed in the document from one value.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.prepare.seed = seed;
        self.synth.seed = seed;
        self.model.clusterer.seed = seed;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json("{}").is_ok());
        assert!(matches!(RunConfig::from_json(r#"{"modle": {}}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"model": {"heads": 0}}"#), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_and_hash() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(4);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        cfg.set_seed(5);
        assert_ne!(back.hash(), cfg.hash());
    }
}
