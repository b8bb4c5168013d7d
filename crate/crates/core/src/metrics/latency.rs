use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::ClustererConfig;
use crate::data::SequenceExample;
use crate::error::{Error, Result};
use crate::model::{MipModel, StepSpec};
use crate::numerics::{Adam, AdamConfig, Rng};
use crate::preference::{LossConfig, WeightMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Forward, backward and one Adam update on a single sequence.
    TrainStep,
    /// Encode, cluster, weight and score every candidate of one sequence.
    Inference,
    /// The clustering share of `Inference`, timed inside it.
    InferenceClustering,
    /// The clusterer alone on the same points.
    Clustering,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::TrainStep => "train_step",
            Phase::Inference => "inference",
            Phase::InferenceClustering => "inference_clustering",
            Phase::Clustering => "clustering",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyProbe {
    pub phase: Phase,
    pub samples: usize,
    pub mean_ms: f64,
    /// Sample standard deviation.
    pub std_ms: f64,
}

impl LatencyProbe {
    fn from_samples(phase: Phase, ms: &[f64]) -> Self {
        let n = ms.len();
        let mean = ms.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            phase,
            samples: n,
            mean_ms: mean,
            std_ms: var.sqrt(),
        }
    }

    /// Zeroes the wall-clock fields (for byte-stable output).
    pub fn without_timing(mut self) -> Self {
        self.mean_ms = 0.0;
        self.std_ms = 0.0;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyOptions {
    pub samples: usize,
    /// Calls discarded before timing starts.
    pub warmup: usize,
    pub clusterer: ClustererConfig,
    pub weight_mode: WeightMode,
    pub loss: LossConfig,
    pub adam: AdamConfig,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            samples: 50,
            warmup: 5,
            clusterer: ClustererConfig::default(),
            weight_mode: WeightMode::Learned,
            loss: LossConfig::Nll,
            adam: AdamConfig::default(),
        }
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Batch-size-1 timings, cycling through `examples`. Runs on the calling
/// thread; training steps update a private copy of the parameters.
pub fn profile_latency(model: &MipModel, examples: &[SequenceExample], opts: &LatencyOptions) -> Result<Vec<LatencyProbe>> {
    if examples.is_empty() || opts.samples == 0 {
        return Err(Error::Validation("latency profiling needs examples and samples >= 1".into()));
    }
    let view = model.view();
    let mut train_model = model.clone();
    let mut adam = Adam::new(train_model.params(), opts.adam);
    let spec = StepSpec {
        weight_mode: opts.weight_mode,
        loss: opts.loss,
        clusterer: opts.clusterer,
        train: true,
    };
    let mut times: [Vec<f64>; 4] = Default::default();
    for call in 0..opts.warmup + opts.samples {
        let ex = &examples[call % examples.len()];
        let keep = call >= opts.warmup;

        let start = Instant::now();
        let fwd = view.forward_sequence(&ex.items, &ex.timestamps, &opts.clusterer, None)?;
        let (w, _) = view.cluster_weights(&fwd.user, opts.weight_mode)?;
        let candidates: Vec<u32> = ex.positives.iter().chain(&ex.negatives).copied().collect();
        std::hint::black_box(view.score_items(&fwd.user, &w, &candidates)?);
        let inference = ms(start);

        // The standalone clusterer sees what the model clusters: item
        // features before attention, or φ after it.
        let points = if model.config().metadata_present {
            view.item_table().gather_rows(&ex.items.iter().map(|&i| i as usize).collect::<Vec<_>>())
        } else {
            fwd.user.phi.clone()
        };
        let start = Instant::now();
        std::hint::black_box(opts.clusterer.cluster(&points)?);
        let clustering = ms(start);

        let start = Instant::now();
        let mut grads = train_model.params().grad_buffer();
        train_model
            .view()
            .example_gradient(ex, &spec, Some(Rng::derive(0, &[call as u64])), Some(&mut grads))?;
        let params = train_model.params_mut();
        params.zero_grads();
        params.accumulate(&grads);
        adam.step(params)?;
        let train = ms(start);

        if keep {
            times[0].push(train);
            times[1].push(inference);
            times[2].push(fwd.clustering_time.as_secs_f64() * 1e3);
            times[3].push(clustering);
        }
    }
    Ok([Phase::TrainStep, Phase::Inference, Phase::InferenceClustering, Phase::Clustering]
        .into_iter()
        .zip(times.iter())
        .map(|(p, t)| LatencyProbe::from_samples(p, t))
        .collect())
}
