//! Experiment drivers: inference re-clustering sweeps and training
//! ablations over cluster weights, losses and input encodings.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterMethod, ClustererConfig};
use crate::data::DatasetSplit;
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions, EvalReport};
use crate::model::{MipModel, ModelConfig};
use crate::preference::{LossConfig, WeightMode};
use crate::training::{train, Stage, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub methods: Vec<ClusterMethod>,
    pub ks: Vec<usize>,
    /// Recall/nDCG/precision cutoffs reported alongside AUC.
    pub eval_ks: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                ClusterMethod::Ward,
                ClusterMethod::Kmeans,
                ClusterMethod::Spectral,
                ClusterMethod::Birch,
                ClusterMethod::Dbscan,
            ],
            ks: vec![5, 8, 10],
            eval_ks: vec![50],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: ClusterMethod,
    pub k: usize,
    /// Evaluated with the model's own weight mode.
    pub weighted: EvalReport,
    /// Evaluated with every cluster weight set to 1.
    pub unweighted: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dataset: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Rows are method × inference clusters; columns are weighted and
    /// unweighted AUC for the dataset.
    pub fn markdown(&self) -> String {
        let mut out = format!(
            "| Clustering | Inference clusters | {0} weighted AUC | {0} unweighted AUC |\n|---|---|---|---|\n",
            self.dataset
        );
        for r in &self.rows {
            let k = if r.method.uses_k() { r.k.to_string() } else { format!("{} (unused)", r.k) };
            out += &format!(
                "| {} | {} | {:.4} | {:.4} |\n",
                r.method.display_name(),
                k,
                r.weighted.auc,
                r.unweighted.auc
            );
        }
        out
    }
}

/// Evaluates a trained model under every (method, k) inference clusterer,
/// keeping the remaining clusterer knobs of `base`.
pub fn recluster_sweep(
    model: &MipModel,
    examples: &[crate::data::SequenceExample],
    base: &ClustererConfig,
    cfg: &SweepConfig,
    dataset: &str,
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &k in &cfg.ks {
            let clusterer = ClustererConfig { method, k, ..*base };
            let opts = |weight_mode| EvalOptions {
                clusterer,
                weight_mode,
                ks: cfg.eval_ks.clone(),
            };
            let weighted = evaluate(&model.view(), examples, &opts(model.config().weight_mode))?;
            let unweighted = evaluate(&model.view(), examples, &opts(WeightMode::Equal))?;
            info!("sweep {method} k={k}: auc {:.4} / {:.4}", weighted.auc, unweighted.auc);
            rows.push(SweepRow {
                method,
                k,
                weighted,
                unweighted,
            });
        }
    }
    Ok(SweepTable {
        dataset: dataset.to_string(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Weights,
    Loss,
    Encodings,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(AblationAxis::Weights),
            "loss" => Ok(AblationAxis::Loss),
            "encodings" => Ok(AblationAxis::Encodings),
            other => Err(Error::Config(format!("unknown ablation axis `{other}` (weights, loss, encodings)"))),
        }
    }
}

/// One arm: a label plus the configuration it trains with.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationArm {
    pub label: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub loss: String,
    pub weight_mode: WeightMode,
    /// Width of the interaction embedding `e_j`.
    pub embedding_dim: usize,
    pub diverged: bool,
    /// Message when training failed.
    pub error: Option<String>,
    pub best_val_auc: Option<f64>,
    pub epochs: usize,
    pub final_train_loss: Option<f64>,
    pub test: Option<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn markdown(&self) -> String {
        let ks: Vec<usize> = self
            .rows
            .iter()
            .find_map(|r| r.test.as_ref())
            .map(|t| t.at_k.iter().map(|a| a.k).collect())
            .unwrap_or_default();
        let mut out = String::from("| arm | e_j dim | epochs | val AUC | test AUC |");
        for k in &ks {
            out += &format!(" R@{k} | nDCG@{k} |");
        }
        out += " status |\n|---|---|---|---|---|";
        out += &"---|---|".repeat(ks.len());
        out += "---|\n";
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        for r in &self.rows {
            out += &format!(
                "| {} | {} | {} | {} | {} |",
                r.label,
                r.embedding_dim,
                r.epochs,
                f(r.best_val_auc),
                f(r.test.as_ref().map(|t| t.auc))
            );
            for k in &ks {
                let a = r.test.as_ref().and_then(|t| t.at(*k));
                out += &format!(" {} | {} |", f(a.map(|a| a.recall)), f(a.map(|a| a.ndcg)));
            }
            out += if r.diverged { " diverged |\n" } else { " ok |\n" };
        }
        out
    }
}

/// The arms of one ablation axis, derived from a base configuration.
pub fn ablation_arms(axis: AblationAxis, model: &ModelConfig, train: &TrainConfig) -> Vec<AblationArm> {
    let arm = |label: &str, m: ModelConfig, t: TrainConfig| AblationArm {
        label: label.to_string(),
        model: m,
        train: t,
    };
    match axis {
        AblationAxis::Weights => {
            let learned = ModelConfig {
                weight_mode: WeightMode::Learned,
                ..model.clone()
            };
            let joint = TrainConfig {
                stage: Stage::Joint,
                ..train.clone()
            };
            vec![
                arm(
                    "learned (two-stage)",
                    learned.clone(),
                    TrainConfig {
                        stage: Stage::TwoStage,
                        ..train.clone()
                    },
                ),
                arm("learned (joint)", learned, joint.clone()),
                arm(
                    "equal",
                    ModelConfig {
                        weight_mode: WeightMode::Equal,
                        ..model.clone()
                    },
                    joint.clone(),
                ),
                arm(
                    "exp decay",
                    ModelConfig {
                        weight_mode: WeightMode::exp_decay(),
                        ..model.clone()
                    },
                    joint,
                ),
            ]
        }
        AblationAxis::Loss => {
            let mut arms = vec![arm(
                "NLL",
                model.clone(),
                TrainConfig {
                    loss: LossConfig::Nll,
                    ..train.clone()
                },
            )];
            for alpha in [0.2, 0.5, 0.8] {
                arms.push(arm(
                    &format!("triplet α={alpha}"),
                    model.clone(),
                    TrainConfig {
                        loss: LossConfig::Triplet { alpha, learn_beta: true },
                        ..train.clone()
                    },
                ));
            }
            arms
        }
        AblationAxis::Encodings => {
            let pos = model.positional;
            let temporal = if model.temporal.output_dim() > 0 {
                model.temporal
            } else {
                EncodingConfig::sinusoid(8)
            };
            let positional = if pos.output_dim() > 0 { pos } else { EncodingConfig::sinusoid(4) };
            let with = |p: EncodingConfig, t: EncodingConfig| ModelConfig {
                positional: p,
                temporal: t,
                ..model.clone()
            };
            let none = EncodingConfig::none();
            vec![
                arm("item only", with(none, none), train.clone()),
                arm("+ positional", with(positional, none), train.clone()),
                arm("+ temporal", with(none, temporal), train.clone()),
                arm("+ positional + temporal", with(positional, temporal), train.clone()),
                arm(
                    "+ positional + one-hot time",
                    with(positional, EncodingConfig::onehot(2.0, 16)),
                    train.clone(),
                ),
                arm(
                    "+ positional + two-hot time",
                    with(positional, EncodingConfig::twohot(2.0, 16)),
                    train.clone(),
                ),
            ]
        }
    }
}

/// Trains every arm from the same initial seed and evaluates on the test
/// split. A failed arm is recorded, not fatal.
pub fn run_ablation(
    axis: AblationAxis,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    split: &DatasetSplit,
    eval_ks: &[usize],
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for arm in ablation_arms(axis, model, train_cfg) {
        let mut m = MipModel::new(arm.model.clone(), split.vocab.len(), split.features.as_ref(), arm.train.seed)?;
        let mut row = AblationRow {
            label: arm.label.clone(),
            loss: arm.train.loss.name(),
            weight_mode: arm.model.weight_mode,
            embedding_dim: arm.model.embedding_dim(),
            diverged: false,
            error: None,
            best_val_auc: None,
            epochs: 0,
            final_train_loss: None,
            test: None,
        };
        match train(&mut m, split, &arm.train) {
            Ok(report) => {
                row.best_val_auc = Some(report.best_val_auc);
                row.epochs = report.epochs.len();
                row.final_train_loss = report.epochs.last().map(|e| e.train_loss);
                let opts = EvalOptions {
                    clusterer: arm.model.clusterer,
                    weight_mode: arm.model.weight_mode,
                    ks: eval_ks.to_vec(),
                };
                let test = evaluate(&m.view(), &split.test, &opts)?;
                row.diverged = !report.epochs.iter().all(|e| e.train_loss.is_finite()) || !test.auc.is_finite();
                row.test = Some(test);
            }
            Err(e @ (Error::NonFiniteGradient { .. } | Error::Training(_))) => {
                warn!("arm `{}` diverged: {e}", arm.label);
                row.diverged = true;
                row.error = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
        info!("ablation arm `{}` done", arm.label);
        rows.push(row);
    }
    Ok(AblationTable { axis, rows })
}
