//! Mini-batch Adam training with early stopping on validation AUC, in two
//! stages (cluster weights fixed at 1, then everything) or jointly.

use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, SequenceExample};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions};
use crate::model::{LossSum, MipModel, StepSpec};
use crate::numerics::{Adam, AdamConfig, GradBuffer, ParamSet, Rng};
use crate::preference::{LossConfig, WeightMode};

/// Examples per parallel work unit. Fixed so the floating-point reduction
/// order does not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    TwoStage,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub stage: Stage,
    pub adam: AdamConfig,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            patience: 20,
            batch_size: 128,
            seed: 0,
            stage: Stage::TwoStage,
            adam: AdamConfig::default(),
            loss: LossConfig::Nll,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "need 0 < patience < max_epochs, got patience {} and max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EarlyStop {
    pub stop: bool,
    pub best: usize,
}

/// Best index is the first epoch reaching the running maximum (strict `>`
/// to improve). Stops once the last `patience` epochs all failed to improve.
pub fn early_stop(history: &[f64], patience: usize) -> EarlyStop {
    let mut best = 0;
    for (i, &v) in history.iter().enumerate() {
        if v > history[best] {
            best = i;
        }
    }
    EarlyStop {
        stop: !history.is_empty() && history.len() - 1 - best >= patience,
        best,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1 or 2 for the two-stage schedule, 0 for joint training.
    pub stage: u8,
    /// 1-based within the stage.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: u8,
    pub weight_mode: WeightMode,
    /// Validation AUC before the stage's first update.
    pub initial_val_auc: f64,
    pub epochs_run: usize,
    /// 1-based epoch (within the stage) with the best validation AUC.
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub early_stopped: bool,
    /// Index into `TrainReport::epochs` of the stage's first record.
    pub first_record: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stages: Vec<StageSummary>,
    /// Validation AUC of the returned parameters.
    pub best_val_auc: f64,
    pub seconds: f64,
}

impl TrainReport {
    /// Copy with every wall-clock field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.seconds = 0.0;
        r.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
        r.stages.iter_mut().for_each(|s| s.seconds = 0.0);
        r
    }

    pub fn markdown(&self) -> String {
        let mut out = String::from("| stage | epoch | train loss | val AUC |\n|---|---|---|---|\n");
        for e in &self.epochs {
            out += &format!("| {} | {} | {:.6} | {:.6} |\n", e.stage, e.epoch, e.train_loss, e.val_auc);
        }
        for s in &self.stages {
            out += &format!(
                "\nstage {} ({}): best epoch {} of {}, val AUC {:.6} (start {:.6})",
                s.stage,
                s.weight_mode.name(),
                s.best_epoch,
                s.epochs_run,
                s.best_val_auc,
                s.initial_val_auc
            );
        }
        out.push('\n');
        out
    }
}

fn set_trainable(params: &mut ParamSet, ids: &[crate::numerics::ParamId], on: bool) {
    for &id in ids {
        params.set_trainable(id, on);
    }
}

fn val_auc(model: &MipModel, valid: &[SequenceExample], weight_mode: WeightMode) -> Result<f64> {
    let opts = EvalOptions {
        clusterer: model.config().clusterer,
        weight_mode,
        ks: Vec::new(),
    };
    Ok(evaluate(&model.view(), valid, &opts)?.auc)
}

/// Sums example gradients of one batch in fixed-size chunks, then scales by
/// the number of loss terms so the step follows the batch mean.
fn batch_gradient(
    model: &MipModel,
    train: &[SequenceExample],
    batch: &[usize],
    spec: &StepSpec,
    seed: u64,
    stream: u64,
    epoch: usize,
) -> Result<(GradBuffer, LossSum)> {
    let parts: Vec<(GradBuffer, LossSum)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.params().grad_buffer();
            let mut loss = LossSum::default();
            for &i in chunk {
                let rng = Rng::derive(seed, &[stream, epoch as u64, i as u64]);
                loss.add(model.view().example_gradient(&train[i], spec, Some(rng), Some(&mut g))?);
            }
            Ok((g, loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut grads, mut loss) = iter.next().expect("batch is non-empty");
    for (g, l) in iter {
        grads.add_assign(&g);
        loss.add(l);
    }
    if loss.count > 0 {
        grads.scale(1.0 / loss.count as f64);
    }
    Ok((grads, loss))
}

struct StageOutcome {
    summary: StageSummary,
    records: Vec<EpochRecord>,
}

fn run_stage(
    model: &mut MipModel,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    stage: u8,
    weight_mode: WeightMode,
    first_record: usize,
) -> Result<StageOutcome> {
    let start = Instant::now();
    let spec = StepSpec {
        weight_mode,
        loss: cfg.loss,
        clusterer: model.config().clusterer,
        train: true,
    };
    // Joint training draws the same streams as stage 1, so an equal-mode
    // joint run retraces stage 1 exactly.
    let key = if stage == 2 { 2 } else { 1 };
    let mut adam = Adam::new(model.params(), cfg.adam);
    let initial = val_auc(model, &split.valid, weight_mode)?;
    let mut history = Vec::new();
    let mut records = Vec::new();
    let mut best_params = model.params().clone();
    let mut early_stopped = false;
    for epoch in 0..cfg.max_epochs {
        let epoch_start = Instant::now();
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        Rng::derive(cfg.seed, &[100 + key, epoch as u64]).shuffle(&mut order);
        let mut epoch_loss = LossSum::default();
        for batch in order.chunks(cfg.batch_size) {
            let (grads, loss) = batch_gradient(model, &split.train, batch, &spec, cfg.seed, key, epoch)?;
            epoch_loss.add(loss);
            let params = model.params_mut();
            params.zero_grads();
            params.accumulate(&grads);
            adam.step(params)?;
        }
        let auc = val_auc(model, &split.valid, weight_mode)?;
        if !epoch_loss.mean().is_finite() {
            return Err(Error::Training(format!("stage {stage} epoch {}: loss is not finite", epoch + 1)));
        }
        history.push(auc);
        records.push(EpochRecord {
            stage,
            epoch: epoch + 1,
            train_loss: epoch_loss.mean(),
            val_auc: auc,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
        info!(
            "stage {stage} epoch {}: loss {:.6} val auc {auc:.6}",
            epoch + 1,
            epoch_loss.mean()
        );
        let es = early_stop(&history, cfg.patience);
        if es.best == history.len() - 1 {
            best_params = model.params().clone();
        }
        if es.stop {
            early_stopped = true;
            break;
        }
    }
    let es = early_stop(&history, cfg.patience);
    model.params_mut().copy_values_from(&best_params)?;
    Ok(StageOutcome {
        summary: StageSummary {
            stage,
            weight_mode,
            initial_val_auc: initial,
            epochs_run: history.len(),
            best_epoch: es.best + 1,
            best_val_auc: history[es.best],
            early_stopped,
            first_record,
            seconds: start.elapsed().as_secs_f64(),
        },
        records,
    })
}

fn prepare(model: &mut MipModel, split: &DatasetSplit, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if split.valid.is_empty() {
        return Err(Error::Validation("validation set is empty".into()));
    }
    if split.vocab.len() != model.num_items() {
        return Err(Error::Validation(format!(
            "model has {} items, split vocabulary has {}",
            model.num_items(),
            split.vocab.len()
        )));
    }
    let beta = model.ids().beta;
    let learn_beta = matches!(cfg.loss, LossConfig::Triplet { learn_beta: true, .. });
    model.params_mut().set_trainable(beta, learn_beta);
    Ok(())
}

/// Stage 1 trains with every cluster weight fixed at 1 (equal mode, weight
/// head frozen); stage 2 starts from the stage-1 best parameters with the
/// weight head's output layer reset so all weights start at exactly 1, and
/// trains everything. Each stage has its own Adam state and early stop.
pub fn train_two_stage(model: &mut MipModel, split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport> {
    if cfg.stage != Stage::TwoStage {
        return Err(Error::Config("train_two_stage called with stage = joint".into()));
    }
    if model.config().weight_mode != WeightMode::Learned {
        return Err(Error::Config("two-stage training needs weight_mode = learned".into()));
    }
    prepare(model, split, cfg)?;
    let start = Instant::now();
    let head = model.ids().weight_params();
    if head.is_empty() {
        return Err(Error::Config("weight_mode is learned but the model has no weight head".into()));
    }
    set_trainable(model.params_mut(), &head, false);
    let s1 = run_stage(model, split, cfg, 1, WeightMode::Equal, 0)?;

    set_trainable(model.params_mut(), &head, true);
    model.reset_weight_head_to_unit();
    let s2 = run_stage(model, split, cfg, 2, WeightMode::Learned, s1.records.len())?;

    let mut epochs = s1.records;
    epochs.extend(s2.records);
    let best_val_auc = s2.summary.best_val_auc;
    Ok(TrainReport {
        epochs,
        stages: vec![s1.summary, s2.summary],
        best_val_auc,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// All parameters (the weight head included when learned) from scratch.
pub fn train_joint(model: &mut MipModel, split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport> {
    prepare(model, split, cfg)?;
    let start = Instant::now();
    let mode = model.config().weight_mode;
    let head = model.ids().weight_params();
    set_trainable(model.params_mut(), &head, mode == WeightMode::Learned);
    let s = run_stage(model, split, cfg, 0, mode, 0)?;
    Ok(TrainReport {
        best_val_auc: s.summary.best_val_auc,
        epochs: s.records,
        stages: vec![s.summary],
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Dispatches on `cfg.stage`.
pub fn train(model: &mut MipModel, split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainReport> {
    match cfg.stage {
        Stage::TwoStage => train_two_stage(model, split, cfg),
        Stage::Joint => train_joint(model, split, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_contract() {
        let rising: Vec<f64> = (0..100).map(|i| i as f64).collect();
        for n in 1..=100 {
            assert!(!early_stop(&rising[..n], 20).stop);
        }
        let mut h = vec![0.7];
        h.extend(std::iter::repeat_n(0.6, 20));
        assert_eq!(early_stop(&h[..20], 20), EarlyStop { stop: false, best: 0 });
        assert_eq!(early_stop(&h, 20), EarlyStop { stop: true, best: 0 });
        assert_eq!(h.len(), 21);
        let plateau = vec![0.7; 21];
        assert_eq!(early_stop(&plateau, 20), EarlyStop { stop: true, best: 0 });
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            patience: 100,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}
