//! Ranking metrics, model evaluation under an arbitrary inference
//! clusterer, and a wall-clock latency profiler.

mod latency;
mod ranking;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use latency::{profile_latency, LatencyOptions, LatencyProbe, Phase};
pub use ranking::{auc, auc_brute_force, ndcg_at_k, precision_at_k, rank_by_score, recall_at_k};

use crate::clustering::{ClusterMethod, ClustererConfig};
use crate::data::SequenceExample;
use crate::error::{Error, Result};
use crate::model::ModelView;
use crate::preference::{nll_term, WeightMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sequences: usize,
    /// Pooled over every sequence's positive/negative pairs.
    pub auc: f64,
    /// Mean NLL over all candidate pairs.
    pub nll: f64,
    /// Per-sequence means.
    pub at_k: Vec<AtK>,
    pub method: ClusterMethod,
    pub inference_k: usize,
    pub weight_mode: WeightMode,
    /// Average number of interests per sequence.
    pub mean_interests: f64,
    /// Filled by the latency profiler; empty otherwise.
    #[serde(default)]
    pub latency: Vec<LatencyProbe>,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&AtK> {
        self.at_k.iter().find(|a| a.k == k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub clusterer: ClustererConfig,
    pub weight_mode: WeightMode,
    pub ks: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            clusterer: ClustererConfig::default(),
            weight_mode: WeightMode::Learned,
            ks: vec![20, 50],
        }
    }
}

struct SequenceEval {
    pos: Vec<f64>,
    neg: Vec<f64>,
    nll: f64,
    relevance: Vec<bool>,
    interests: usize,
}

fn eval_one(view: &ModelView<'_>, ex: &SequenceExample, opts: &EvalOptions) -> Result<SequenceEval> {
    let user = view.encode_user(&ex.items, &ex.timestamps, &opts.clusterer)?;
    let (w, _) = view.cluster_weights(&user, opts.weight_mode)?;
    let pos: Vec<f64> = view.score_items(&user, &w, &ex.positives)?.iter().map(|s| s.y).collect();
    let neg: Vec<f64> = view.score_items(&user, &w, &ex.negatives)?.iter().map(|s| s.y).collect();
    let nll = pos.iter().map(|&y| nll_term(y, true).0).sum::<f64>() + neg.iter().map(|&y| nll_term(y, false).0).sum::<f64>();
    let scores: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let relevance = rank_by_score(&scores).into_iter().map(|i| i < pos.len()).collect();
    Ok(SequenceEval {
        pos,
        neg,
        nll,
        relevance,
        interests: user.num_interests(),
    })
}

/// Scores every sequence's candidates with dropout off. The inference
/// clusterer may differ from the one used in training.
pub fn evaluate(view: &ModelView<'_>, examples: &[SequenceExample], opts: &EvalOptions) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    opts.clusterer.validate()?;
    opts.weight_mode.validate()?;
    let per: Vec<SequenceEval> = examples
        .par_iter()
        .map(|ex| eval_one(view, ex, opts))
        .collect::<Result<Vec<_>>>()?;

    let n = per.len() as f64;
    let pos: Vec<f64> = per.iter().flat_map(|s| s.pos.iter().copied()).collect();
    let neg: Vec<f64> = per.iter().flat_map(|s| s.neg.iter().copied()).collect();
    let pairs = (pos.len() + neg.len()) as f64;
    let at_k = opts
        .ks
        .iter()
        .map(|&k| AtK {
            k,
            recall: per.iter().map(|s| recall_at_k(&s.relevance, k)).sum::<f64>() / n,
            ndcg: per.iter().map(|s| ndcg_at_k(&s.relevance, k)).sum::<f64>() / n,
            precision: per.iter().map(|s| precision_at_k(&s.relevance, k)).sum::<f64>() / n,
        })
        .collect();
    Ok(EvalReport {
        sequences: per.len(),
        auc: auc(&pos, &neg)?,
        nll: per.iter().map(|s| s.nll).sum::<f64>() / pairs,
        at_k,
        method: opts.clusterer.method,
        inference_k: opts.clusterer.k,
        weight_mode: opts.weight_mode,
        mean_interests: per.iter().map(|s| s.interests as f64).sum::<f64>() / n,
        latency: Vec::new(),
    })
}

/// Markdown rendering of a list of reports, one row each.
pub fn reports_markdown(reports: &[EvalReport]) -> String {
    let ks: Vec<usize> = reports.first().map(|r| r.at_k.iter().map(|a| a.k).collect()).unwrap_or_default();
    let mut out = String::from("| method | k | weights | AUC |");
    for k in &ks {
        out += &format!(" R@{k} | nDCG@{k} | P@{k} |");
    }
    out += " NLL | mean Λ |\n|---|---|---|---|";
    out += &"---|---|---|".repeat(ks.len());
    out += "---|---|\n";
    for r in reports {
        out += &format!(
            "| {} | {} | {} | {:.4} |",
            r.method.display_name(),
            r.inference_k,
            r.weight_mode.name(),
            r.auc
        );
        for a in &r.at_k {
            out += &format!(" {:.4} | {:.4} | {:.4} |", a.recall, a.ndcg, a.precision);
        }
        out += &format!(" {:.4} | {:.2} |\n", r.nll, r.mean_interests);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SplitFractions, SynthConfig};
    use crate::model::{MipModel, ModelConfig};

    fn setup() -> (MipModel, Vec<SequenceExample>) {
        let data = synth_generate(&SynthConfig {
            num_users: 30,
            num_topics: 6,
            fractions: SplitFractions {
                train: 0.5,
                valid: 0.25,
                test: 0.25,
            },
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = ModelConfig {
            item_dim: 8,
            heads: 2,
            d_model: 8,
            metadata_present: true,
            ..ModelConfig::default()
        };
        let model = MipModel::new(cfg, data.split.vocab.len(), data.split.features.as_ref(), 1).unwrap();
        (model, data.split.test)
    }

    #[test]
    fn evaluate_is_deterministic_and_bounded() {
        let (model, test) = setup();
        let opts = EvalOptions::default();
        let a = evaluate(&model.view(), &test, &opts).unwrap();
        let b = evaluate(&model.view(), &test, &opts).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.auc) && a.nll >= 0.0);
        for x in &a.at_k {
            assert!((0.0..=1.0).contains(&x.recall));
        }
        let md = reports_markdown(&[a]);
        assert_eq!(md.lines().count(), 3);
    }

    #[test]
    fn learned_without_head_is_config_error() {
        let (model, test) = setup();
        let cfg = model.config().clone();
        let mut ids = model.ids().clone();
        ids.weight = None;
        let view = ModelView::new(&cfg, model.params(), &ids);
        assert!(matches!(evaluate(&view, &test, &EvalOptions::default()), Err(Error::Config(_))));
    }
}
