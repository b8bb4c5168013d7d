//! Cluster weights, user–item scoring and the training objectives.
//!
//! A user is a set of interest embeddings `z_λ` with weights `w_λ`; an item
//! `p` scores `y = max_λ β·w_λ·(z_λ·p)`. Ties in the max go to the lowest
//! cluster index and gradients flow only through the winning cluster.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{Error, Result};
use crate::ffn::{ffn_backward, ffn_forward, FfnCache, FfnIds};
use crate::numerics::{dot, sigmoid, GradBuffer, Matrix, ParamSet};

/// How cluster weights are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum WeightMode {
    /// Small FFN over the cluster embedding and its members' temporal codes.
    #[default]
    Learned,
    /// Every weight is exactly 1.
    Equal,
    /// `w_λ = Σ_{i∈λ} exp(−ε(t_now − t_i))`, `t_now` the last timestamp.
    ExpDecay { epsilon: f64 },
}


impl WeightMode {
    pub fn exp_decay() -> Self {
        WeightMode::ExpDecay { epsilon: 0.01 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightMode::Learned => "learned",
            WeightMode::Equal => "equal",
            WeightMode::ExpDecay { .. } => "exp_decay",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightMode::ExpDecay { epsilon } = self {
            if !(*epsilon > 0.0) {
                return Err(Error::Config(format!("exp_decay epsilon must be > 0, got {epsilon}")));
            }
        }
        Ok(())
    }
}

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum LossConfig {
    #[default]
    Nll,
    /// Hinge on paired positives/negatives; `learn_beta` trains the score
    /// scale `β`.
    Triplet { alpha: f64, learn_beta: bool },
}


impl LossConfig {
    pub fn name(&self) -> String {
        match self {
            LossConfig::Nll => "nll".into(),
            LossConfig::Triplet { alpha, .. } => format!("triplet(alpha={alpha})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LossConfig::Triplet { alpha, .. } = self {
            if !alpha.is_finite() {
                return Err(Error::Config("triplet alpha must be finite".into()));
            }
            if *alpha <= 0.0 {
                warn!("triplet margin alpha = {alpha} is not positive");
            }
        }
        Ok(())
    }
}

/// Input rows for the weight FFN: `[z_λ; 1[C_i=λ]·τ_i for i < max_len]`,
/// zero-padded past the end of the sequence.
pub fn weight_features(z: &Matrix, clusters: &ClusterAssignment, tau: &Matrix, max_len: usize) -> Matrix {
    let d = z.cols();
    let dt = tau.cols();
    let mut x = Matrix::zeros(z.rows(), d + max_len * dt);
    for lambda in 0..z.rows() {
        let row = x.row_mut(lambda);
        row[..d].copy_from_slice(z.row(lambda));
        for (i, &c) in clusters.labels().iter().enumerate().take(max_len) {
            if c == lambda {
                row[d + i * dt..d + (i + 1) * dt].copy_from_slice(tau.row(i));
            }
        }
    }
    x
}

/// Learned weights plus the activations needed to backpropagate them.
pub fn learned_weights(
    params: &ParamSet,
    ids: &FfnIds,
    z: &Matrix,
    clusters: &ClusterAssignment,
    tau: &Matrix,
    max_len: usize,
) -> (Vec<f64>, FfnCache) {
    let cache = ffn_forward(params, ids, weight_features(z, clusters, tau, max_len));
    (cache.output.data().to_vec(), cache)
}

/// Returns `∂L/∂Z` (`Λ × z_dim`) given `∂L/∂w`. The temporal block is
/// constant and gets no gradient.
pub fn learned_weights_backward(
    params: &ParamSet,
    ids: &FfnIds,
    cache: &FfnCache,
    d_w: &[f64],
    z_dim: usize,
    grads: &mut GradBuffer,
) -> Matrix {
    let d_out = Matrix::from_vec(d_w.len(), 1, d_w.to_vec()).expect("column vector");
    let d_x = ffn_backward(params, ids, cache, &d_out, grads);
    let mut d_z = Matrix::zeros(d_w.len(), z_dim);
    for r in 0..d_w.len() {
        d_z.row_mut(r).copy_from_slice(&d_x.row(r)[..z_dim]);
    }
    d_z
}

pub fn exp_decay_weights(clusters: &ClusterAssignment, timestamps: &[f64], epsilon: f64, t_now: f64) -> Vec<f64> {
    let mut w = vec![0.0; clusters.num_clusters()];
    for (&c, &t) in clusters.labels().iter().zip(timestamps) {
        w[c] += (-epsilon * (t_now - t)).exp();
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub y: f64,
    pub probability: f64,
    /// Winning cluster (lowest index on ties).
    pub argmax: usize,
}

pub fn score(z: &Matrix, w: &[f64], p: &[f64]) -> ScoredPair {
    score_scaled(z, w, p, 1.0)
}

/// `y = max_λ β·w_λ·(z_λ·p)`.
pub fn score_scaled(z: &Matrix, w: &[f64], p: &[f64], beta: f64) -> ScoredPair {
    let mut best = (f64::NEG_INFINITY, 0);
    for (lambda, &wl) in w.iter().enumerate() {
        let term = beta * wl * dot(z.row(lambda), p);
        if term > best.0 {
            best = (term, lambda);
        }
    }
    ScoredPair {
        y: best.0,
        probability: sigmoid(best.0),
        argmax: best.1,
    }
}

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy of one scored pair and its derivative in `y`. The
/// derivative is zero where the clamp is active.
pub fn nll_term(y: f64, positive: bool) -> (f64, f64) {
    // Probability assigned to the observed label.
    let q = if positive { sigmoid(y) } else { sigmoid(-y) };
    let clamped = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let grad = if clamped != q {
        0.0
    } else if positive {
        q - 1.0
    } else {
        1.0 - q
    };
    (-clamped.ln(), grad)
}

/// Mean binary cross-entropy over all pairs.
pub fn nll_loss(pairs: &[(f64, bool)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(y, pos)| nll_term(y, pos).0).sum::<f64>() / pairs.len() as f64
}

/// `max(0, α + y⁻ − y⁺)` with derivatives `(∂/∂y⁺, ∂/∂y⁻)`.
pub fn triplet_term(y_pos: f64, y_neg: f64, alpha: f64) -> (f64, f64, f64) {
    let margin = alpha + y_neg - y_pos;
    if margin > 0.0 {
        (margin, -1.0, 1.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

pub fn triplet_loss(pairs: &[(f64, f64)], alpha: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(p, n)| triplet_term(p, n, alpha).0).sum::<f64>() / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn score_examples() {
        let z = Matrix::from_rows(&[[3.0], [1.0]]);
        let s = score(&z, &[1.0, 2.0], &[1.0]);
        assert_eq!((s.y, s.argmax), (3.0, 0));
        let single = score(&Matrix::from_rows(&[[0.5, 2.0]]), &[1.5], &[2.0, 1.0]);
        assert_eq!(single.y, 1.5 * 3.0);
        assert_eq!(single.probability, sigmoid(4.5));
    }

    #[test]
    fn score_ties_go_to_lowest_index() {
        let z = Matrix::from_rows(&[[1.0], [2.0], [2.0]]);
        assert_eq!(score(&z, &[2.0, 1.0, 1.0], &[1.0]).argmax, 0);
    }

    #[test]
    fn exp_decay_examples() {
        let one = ClusterAssignment::single(1);
        assert_eq!(exp_decay_weights(&one, &[5.0], 0.01, 5.0), vec![1.0]);
        let aged = exp_decay_weights(&one, &[0.0], 0.01, 100.0)[0];
        assert!((aged - 0.367_879_441_171_442_32).abs() < 1e-12);
        let two = ClusterAssignment::new(vec![0, 0, 1]).unwrap();
        let w = exp_decay_weights(&two, &[9.0, 9.0, 9.0], 0.01, 9.0);
        assert_eq!(w[0], 2.0 * w[1]);
    }

    #[test]
    fn nll_examples() {
        assert!((nll_loss(&[(0.0, true), (0.0, false)]) - std::f64::consts::LN_2).abs() < 1e-15);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let l = nll_loss(&[(logit(0.9), true), (logit(0.9), true), (logit(0.2), false)]);
        // −(2·ln 0.9 + ln 0.8)/3, evaluated in extended precision.
        assert!((l - 0.144_621_527_543_287_45).abs() < 1e-12, "{l}");
        assert!(nll_loss(&[(60.0, true), (-60.0, false)]) < 1e-12);
    }

    #[test]
    fn nll_clamp_zeroes_gradient() {
        let (loss, g) = nll_term(-100.0, true);
        assert!((loss - (-PROB_CLAMP.ln())).abs() < 1e-9);
        assert_eq!(g, 0.0);
        let (_, g) = nll_term(0.3, false);
        assert!((g - sigmoid(0.3)).abs() < 1e-15);
    }

    #[test]
    fn triplet_examples() {
        assert_eq!(triplet_term(2.5, 1.0, 0.5).0, 0.0);
        assert_eq!(triplet_term(1.0, 1.0, 0.5).0, 0.5);
        // One satisfied by 0.3, one violated by 0.3.
        let l = triplet_loss(&[(1.8, 1.0), (1.2, 1.0)], 0.5);
        assert!((l - 0.15).abs() < 1e-12);
    }

    #[test]
    fn weight_features_layout_and_symmetry() {
        let mut rng = Rng::new(1);
        let mut ps = ParamSet::new();
        let z = Matrix::from_rows(&[[0.3, -0.1], [0.3, -0.1]]);
        // Clusters {0, 2} and {1, 3}, identical timestamp codes per slot pair.
        let c = ClusterAssignment::new(vec![0, 1, 0, 1]).unwrap();
        let tau = Matrix::from_rows(&[[0.5, 0.1], [0.5, 0.1], [0.2, 0.9], [0.2, 0.9]]);
        let x = weight_features(&z, &c, &tau, 4);
        assert_eq!(x.row(0), &[0.3, -0.1, 0.5, 0.1, 0.0, 0.0, 0.2, 0.9, 0.0, 0.0]);
        // Without a temporal block only z_λ enters, so the weights match.
        let ids0 = FfnIds::register(&mut ps, "w0", 2, 5, 1, &mut rng);
        let (w, _) = learned_weights(&ps, &ids0, &z, &c, &Matrix::zeros(4, 0), 4);
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn zero_ffn_weights_give_output_bias() {
        let mut ps = ParamSet::new();
        let ids = FfnIds::register(&mut ps, "w", 3 + 2, 4, 1, &mut Rng::new(2));
        ps.value_mut(ids.w1).fill(0.0);
        ps.value_mut(ids.w2).fill(0.0);
        ps.value_mut(ids.b2).fill(0.7);
        let z = Matrix::filled(3, 3, 0.4);
        let c = ClusterAssignment::new(vec![0, 1, 2]).unwrap();
        let (w, _) = learned_weights(&ps, &ids, &z, &c, &Matrix::filled(3, 1, 1.0), 2);
        assert_eq!(w, vec![0.7; 3]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn max_dominates_every_term(vals in proptest::collection::vec(-5.0f64..5.0, 2..8), ws in proptest::collection::vec(0.1f64..3.0, 8)) {
                let z = Matrix::from_vec(vals.len(), 1, vals.clone()).unwrap();
                let w = &ws[..vals.len()];
                let s = score(&z, w, &[1.0]);
                for (l, v) in vals.iter().enumerate() {
                    prop_assert!(s.y >= w[l] * v);
                }
                prop_assert_eq!(s.y, w[s.argmax] * vals[s.argmax]);
                let mut rev = vals.clone();
                rev.reverse();
                let mut wrev = w.to_vec();
                wrev.reverse();
                let zr = Matrix::from_vec(rev.len(), 1, rev).unwrap();
                prop_assert_eq!(score(&zr, &wrev, &[1.0]).y, s.y);
            }

            #[test]
            fn nll_nonnegative(y in -50.0f64..50.0, pos in any::<bool>()) {
                prop_assert!(nll_term(y, pos).0 >= 0.0);
            }
        }
    }
}
