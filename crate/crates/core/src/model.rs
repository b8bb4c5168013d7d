//! The full model: item table, attention encoder, weight head and score
//! scale, plus the per-sequence forward pass and per-example gradient.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::attention::{dropout_mask, encoder_backward, encoder_forward, AttentionCache, EncoderIds, HeadIds};
use crate::clustering::{ClusterAssignment, ClustererConfig, Mask};
use crate::data::SequenceExample;
use crate::encoding::{concat_blocks, encode_sequence, EncodingConfig};
use crate::error::{Error, Result};
use crate::ffn::{FfnCache, FfnIds};
use crate::numerics::{dot, GradBuffer, Matrix, ParamId, ParamSet, Rng};
use crate::preference::{
    exp_decay_weights, learned_weights, learned_weights_backward, nll_term, score_scaled, triplet_term, LossConfig,
    ScoredPair, WeightMode,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Item embedding size `d`.
    pub item_dim: usize,
    pub heads: usize,
    /// Query/key projection size.
    pub d_model: usize,
    /// Hidden size of the head-fusion FFN.
    pub ffn_hidden: usize,
    /// Hidden size of the cluster-weight FFN.
    pub weight_hidden: usize,
    pub dropout_rate: f64,
    /// Longest accepted input sequence `L_max`.
    pub max_len: usize,
    /// Items come with fixed dense features (clustered before attention)
    /// rather than learned id embeddings (clustered after).
    pub metadata_present: bool,
    pub temporal: EncodingConfig,
    pub positional: EncodingConfig,
    /// Training-time clustering; its `k` is the training cluster count.
    pub clusterer: ClustererConfig,
    pub weight_mode: WeightMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            item_dim: 32,
            heads: 8,
            d_model: 32,
            ffn_hidden: 32,
            weight_hidden: 32,
            dropout_rate: 0.1,
            max_len: 50,
            metadata_present: false,
            temporal: EncodingConfig::sinusoid(8),
            positional: EncodingConfig::sinusoid(4),
            clusterer: ClustererConfig::default(),
            weight_mode: WeightMode::Learned,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("item_dim", self.item_dim),
            ("heads", self.heads),
            ("d_model", self.d_model),
            ("ffn_hidden", self.ffn_hidden),
            ("weight_hidden", self.weight_hidden),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        self.temporal.validate()?;
        self.positional.validate()?;
        self.clusterer.validate()?;
        self.weight_mode.validate()
    }

    /// Length of an interaction embedding `e_j`.
    pub fn embedding_dim(&self) -> usize {
        self.item_dim + self.temporal.output_dim() + self.positional.output_dim()
    }

    pub fn weight_input_dim(&self) -> usize {
        self.item_dim + self.max_len * self.temporal.output_dim()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelIds {
    pub items: ParamId,
    pub encoder: EncoderIds,
    /// Absent only in parameter sets saved without a weight head.
    pub weight: Option<FfnIds>,
    pub beta: ParamId,
}

impl ModelIds {
    /// Looks parameters up by their registered names.
    pub fn resolve(params: &ParamSet, heads: usize) -> Result<Self> {
        let get = |name: &str| {
            params
                .id(name)
                .ok_or_else(|| Error::Validation(format!("parameter `{name}` missing")))
        };
        let ffn = |prefix: &str| -> Result<FfnIds> {
            Ok(FfnIds {
                w1: get(&format!("{prefix}.w1"))?,
                b1: get(&format!("{prefix}.b1"))?,
                w2: get(&format!("{prefix}.w2"))?,
                b2: get(&format!("{prefix}.b2"))?,
            })
        };
        let heads = (0..heads)
            .map(|h| {
                Ok(HeadIds {
                    wq: get(&format!("head{h}.wq"))?,
                    bq: get(&format!("head{h}.bq"))?,
                    wk: get(&format!("head{h}.wk"))?,
                    bk: get(&format!("head{h}.bk"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            items: get("items")?,
            encoder: EncoderIds {
                heads,
                fuse: ffn("fuse")?,
            },
            weight: params.id("weight.w1").map(|_| ffn("weight")).transpose()?,
            beta: get("beta")?,
        })
    }

    /// Weight-head parameters (empty when absent).
    pub fn weight_params(&self) -> Vec<ParamId> {
        self.weight.map(|w| w.all().to_vec()).unwrap_or_default()
    }
}

/// A user as `Λ` interest embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiInterestUser {
    /// `Λ × d`; row `λ` is `φ[μ_λ]`.
    pub z: Matrix,
    pub clusters: ClusterAssignment,
    /// Context vectors, `l × d`.
    pub phi: Matrix,
    /// Temporal codes of the inputs, `l × dim(τ)`.
    pub tau: Matrix,
    pub timestamps: Vec<f64>,
}

impl MultiInterestUser {
    pub fn num_interests(&self) -> usize {
        self.z.rows()
    }
}

/// Forward pass over one input sequence, with everything backward needs.
pub struct SequenceForward {
    pub user: MultiInterestUser,
    pub cache: AttentionCache,
    pub mu: Vec<usize>,
    pub clustering_time: Duration,
}

/// What one training/evaluation step computes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSpec {
    pub weight_mode: WeightMode,
    pub loss: LossConfig,
    pub clusterer: ClustererConfig,
    /// Dropout active.
    pub train: bool,
}

/// Unnormalized loss: `total / count` is the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSum {
    pub total: f64,
    pub count: usize,
}

impl LossSum {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total / self.count as f64
        }
    }

    pub fn add(&mut self, other: LossSum) {
        self.total += other.total;
        self.count += other.count;
    }
}

/// Borrowed model: configuration, ids and a parameter set (which need not
/// be the model's own, e.g. during finite differencing).
#[derive(Clone, Copy)]
pub struct ModelView<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a ParamSet,
    pub ids: &'a ModelIds,
}

impl<'a> ModelView<'a> {
    pub fn new(config: &'a ModelConfig, params: &'a ParamSet, ids: &'a ModelIds) -> Self {
        Self { config, params, ids }
    }

    pub fn beta(&self) -> f64 {
        self.params.value(self.ids.beta)[(0, 0)]
    }

    pub fn item_table(&self) -> &'a Matrix {
        self.params.value(self.ids.items)
    }

    fn check_items(&self, items: &[u32]) -> Result<()> {
        let n = self.item_table().rows();
        if let Some(bad) = items.iter().find(|&&i| i as usize >= n) {
            return Err(Error::Validation(format!("item id {bad} outside vocabulary of {n}")));
        }
        Ok(())
    }

    /// Encodes one input sequence. `clusterer` decides the interests;
    /// `dropout` (scale factors) is applied only when given.
    pub fn forward_sequence(
        &self,
        items: &[u32],
        timestamps: &[f64],
        clusterer: &ClustererConfig,
        dropout: Option<Matrix>,
    ) -> Result<SequenceForward> {
        let l = items.len();
        if l == 0 {
            return Err(Error::Validation("input sequence is empty".into()));
        }
        if l > self.config.max_len {
            return Err(Error::Validation(format!(
                "sequence length {l} exceeds max_len {}",
                self.config.max_len
            )));
        }
        if timestamps.len() != l {
            return Err(Error::Validation(format!("{l} items but {} timestamps", timestamps.len())));
        }
        self.check_items(items)?;
        let idx: Vec<usize> = items.iter().map(|&i| i as usize).collect();
        let p = self.item_table().gather_rows(&idx);
        let (tau, rho) = encode_sequence(timestamps, &self.config.temporal, &self.config.positional)?;
        let e = concat_blocks(&p, &tau, &rho)?;

        let mut clustering_time = Duration::ZERO;
        let (mask, pre_clusters) = if self.config.metadata_present {
            let start = Instant::now();
            let c = clusterer.cluster(&p)?;
            clustering_time = start.elapsed();
            (c.to_mask(), Some(c))
        } else {
            (Mask::all_ones(l), None)
        };
        let cache = encoder_forward(self.params, &self.ids.encoder, &p, &e, mask, dropout);
        let clusters = match pre_clusters {
            Some(c) => c,
            None => {
                let start = Instant::now();
                let c = clusterer.cluster(cache.phi())?;
                clustering_time = start.elapsed();
                c
            }
        };
        let mu = clusters.last_indices();
        let phi = cache.phi().clone();
        let user = MultiInterestUser {
            z: phi.gather_rows(&mu),
            clusters,
            phi,
            tau,
            timestamps: timestamps.to_vec(),
        };
        Ok(SequenceForward {
            user,
            cache,
            mu,
            clustering_time,
        })
    }

    /// Inference-mode encoding (no dropout).
    pub fn encode_user(&self, items: &[u32], timestamps: &[f64], clusterer: &ClustererConfig) -> Result<MultiInterestUser> {
        Ok(self.forward_sequence(items, timestamps, clusterer, None)?.user)
    }

    /// Cluster weights, with the weight-head activations when learned.
    pub fn cluster_weights(&self, user: &MultiInterestUser, mode: WeightMode) -> Result<(Vec<f64>, Option<FfnCache>)> {
        let lambda = user.num_interests();
        Ok(match mode {
            WeightMode::Equal => (vec![1.0; lambda], None),
            WeightMode::ExpDecay { epsilon } => {
                let t_now = user.timestamps.last().copied().unwrap_or(0.0);
                (exp_decay_weights(&user.clusters, &user.timestamps, epsilon, t_now), None)
            }
            WeightMode::Learned => {
                let ids = self
                    .ids
                    .weight
                    .ok_or_else(|| Error::Config("weight_mode is learned but the model has no weight head".into()))?;
                let (w, cache) = learned_weights(self.params, &ids, &user.z, &user.clusters, &user.tau, self.config.max_len);
                (w, Some(cache))
            }
        })
    }

    pub fn score_items(&self, user: &MultiInterestUser, weights: &[f64], items: &[u32]) -> Result<Vec<ScoredPair>> {
        self.check_items(items)?;
        let table = self.item_table();
        let beta = self.beta();
        Ok(items
            .iter()
            .map(|&i| score_scaled(&user.z, weights, table.row(i as usize), beta))
            .collect())
    }

    /// Loss of one example, and its gradient accumulated into `grads` when
    /// given. `dropout_rng` supplies the dropout mask in training mode.
    pub fn example_gradient(
        &self,
        ex: &SequenceExample,
        spec: &StepSpec,
        dropout_rng: Option<Rng>,
        grads: Option<&mut GradBuffer>,
    ) -> Result<LossSum> {
        let cfg = self.config;
        let drop = match (spec.train, dropout_rng) {
            (true, Some(mut rng)) => dropout_mask(ex.items.len(), cfg.heads * cfg.item_dim, cfg.dropout_rate, &mut rng),
            _ => None,
        };
        let fwd = self.forward_sequence(&ex.items, &ex.timestamps, &spec.clusterer, drop)?;
        let (w, w_cache) = self.cluster_weights(&fwd.user, spec.weight_mode)?;
        let pos = self.score_items(&fwd.user, &w, &ex.positives)?;
        let neg = self.score_items(&fwd.user, &w, &ex.negatives)?;

        let mut dy_pos = vec![0.0; pos.len()];
        let mut dy_neg = vec![0.0; neg.len()];
        let mut loss = LossSum::default();
        match spec.loss {
            LossConfig::Nll => {
                for (s, d) in pos.iter().zip(dy_pos.iter_mut()) {
                    let (l, g) = nll_term(s.y, true);
                    loss.total += l;
                    *d = g;
                }
                for (s, d) in neg.iter().zip(dy_neg.iter_mut()) {
                    let (l, g) = nll_term(s.y, false);
                    loss.total += l;
                    *d = g;
                }
                loss.count = pos.len() + neg.len();
            }
            LossConfig::Triplet { alpha, .. } => {
                let n = pos.len().min(neg.len());
                for i in 0..n {
                    let (l, gp, gn) = triplet_term(pos[i].y, neg[i].y, alpha);
                    loss.total += l;
                    dy_pos[i] = gp;
                    dy_neg[i] = gn;
                }
                loss.count = n;
            }
        }
        let Some(grads) = grads else {
            return Ok(loss);
        };

        let d = cfg.item_dim;
        let lambda = fwd.user.num_interests();
        let beta = self.beta();
        let table = self.item_table();
        let z = &fwd.user.z;
        let mut d_z = Matrix::zeros(lambda, d);
        let mut d_w = vec![0.0; lambda];
        let mut d_beta = 0.0;
        let candidates = ex
            .positives
            .iter()
            .zip(pos.iter().zip(&dy_pos))
            .chain(ex.negatives.iter().zip(neg.iter().zip(&dy_neg)));
        for (&item, (s, &dy)) in candidates {
            if dy == 0.0 {
                continue;
            }
            let a = s.argmax;
            let p = table.row(item as usize);
            let raw = dot(z.row(a), p);
            d_beta += dy * w[a] * raw;
            d_w[a] += dy * beta * raw;
            let coef = dy * beta * w[a];
            for (g, x) in d_z.row_mut(a).iter_mut().zip(p) {
                *g += coef * x;
            }
            if let Some(g) = grads.get_mut(self.ids.items) {
                for (g, x) in g.row_mut(item as usize).iter_mut().zip(z.row(a)) {
                    *g += coef * x;
                }
            }
        }
        if let Some(g) = grads.get_mut(self.ids.beta) {
            g[(0, 0)] += d_beta;
        }
        if let (Some(cache), Some(ids)) = (&w_cache, self.ids.weight) {
            d_z.add_assign(&learned_weights_backward(self.params, &ids, cache, &d_w, d, grads));
        }

        let mut d_phi = Matrix::zeros(ex.items.len(), d);
        for (lam, &m) in fwd.mu.iter().enumerate() {
            for (g, x) in d_phi.row_mut(m).iter_mut().zip(d_z.row(lam)) {
                *g += x;
            }
        }
        let inputs = encoder_backward(self.params, &self.ids.encoder, &fwd.cache, &d_phi, grads);
        if let Some(g) = grads.get_mut(self.ids.items) {
            let d_items = inputs.d_items();
            for (r, &item) in ex.items.iter().enumerate() {
                for (g, x) in g.row_mut(item as usize).iter_mut().zip(d_items.row(r)) {
                    *g += x;
                }
            }
        }
        Ok(loss)
    }

    pub fn example_loss(&self, ex: &SequenceExample, spec: &StepSpec, dropout_rng: Option<Rng>) -> Result<LossSum> {
        self.example_gradient(ex, spec, dropout_rng, None)
    }
}

/// Owned model.
#[derive(Clone, Debug)]
pub struct MipModel {
    config: ModelConfig,
    params: ParamSet,
    ids: ModelIds,
}

impl MipModel {
    /// Initializes a model over `num_items` items. With `metadata_present`
    /// the feature table (`num_items × item_dim`) is required and frozen.
    /// The random draws are the same in both modes, so the remaining
    /// parameters match for equal seeds.
    pub fn new(config: ModelConfig, num_items: usize, features: Option<&Matrix>, seed: u64) -> Result<Self> {
        config.validate()?;
        if num_items == 0 {
            return Err(Error::Validation("vocabulary is empty".into()));
        }
        let mut rng = Rng::new(seed);
        let mut params = ParamSet::new();
        let random_items = rng.normal_matrix(num_items, config.item_dim, 0.1);
        let items = if config.metadata_present {
            let f = features.ok_or_else(|| Error::Config("metadata_present needs an item feature table".into()))?;
            if f.shape() != (num_items, config.item_dim) {
                return Err(Error::Config(format!(
                    "feature table is {:?}, expected ({num_items}, {})",
                    f.shape(),
                    config.item_dim
                )));
            }
            params.add("items", f.clone(), false)
        } else {
            params.add("items", random_items, true)
        };
        let d_e = config.embedding_dim();
        let heads = (0..config.heads)
            .map(|h| HeadIds::register(&mut params, h, d_e, config.d_model, &mut rng))
            .collect();
        let fuse = FfnIds::register(&mut params, "fuse", config.heads * config.item_dim, config.ffn_hidden, config.item_dim, &mut rng);
        let weight = FfnIds::register(&mut params, "weight", config.weight_input_dim(), config.weight_hidden, 1, &mut rng);
        let beta = params.add("beta", Matrix::filled(1, 1, 1.0), false);
        Ok(Self {
            config,
            params,
            ids: ModelIds {
                items,
                encoder: EncoderIds { heads, fuse },
                weight: Some(weight),
                beta,
            },
        })
    }

    /// Reassembles a model from saved parameters, checking shapes.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let ids = ModelIds::resolve(&params, config.heads)?;
        let d_e = config.embedding_dim();
        let expect = |id: ParamId, shape: (usize, usize)| -> Result<()> {
            let got = params.value(id).shape();
            if got != shape {
                return Err(Error::Validation(format!(
                    "parameter `{}` has shape {got:?}, expected {shape:?}",
                    params.get(id).name
                )));
            }
            Ok(())
        };
        expect(ids.items, (params.value(ids.items).rows(), config.item_dim))?;
        for h in &ids.encoder.heads {
            expect(h.wq, (d_e, config.d_model))?;
            expect(h.wk, (d_e, config.d_model))?;
        }
        expect(ids.encoder.fuse.w1, (config.heads * config.item_dim, config.ffn_hidden))?;
        expect(ids.encoder.fuse.w2, (config.ffn_hidden, config.item_dim))?;
        if let Some(w) = ids.weight {
            expect(w.w1, (config.weight_input_dim(), config.weight_hidden))?;
        }
        Ok(Self { config, params, ids })
    }

    pub fn view(&self) -> ModelView<'_> {
        ModelView::new(&self.config, &self.params, &self.ids)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut ModelConfig {
        &mut self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn ids(&self) -> &ModelIds {
        &self.ids
    }

    pub fn num_items(&self) -> usize {
        self.params.value(self.ids.items).rows()
    }

    pub fn encode_user(&self, items: &[u32], timestamps: &[f64], clusterer: &ClustererConfig) -> Result<MultiInterestUser> {
        self.view().encode_user(items, timestamps, clusterer)
    }

    /// Sets the weight head's output layer to `W2 = 0, b2 = 1` so every
    /// learned weight is exactly 1.
    pub fn reset_weight_head_to_unit(&mut self) {
        if let Some(w) = self.ids.weight {
            self.params.value_mut(w.w2).fill(0.0);
            self.params.value_mut(w.b2).fill(1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterMethod;
    use crate::numerics::finite_diff_check;

    fn small_config(metadata_present: bool) -> ModelConfig {
        ModelConfig {
            item_dim: 4,
            heads: 2,
            d_model: 5,
            ffn_hidden: 6,
            weight_hidden: 5,
            dropout_rate: 0.2,
            max_len: 8,
            metadata_present,
            temporal: EncodingConfig::sinusoid(4),
            positional: EncodingConfig::sinusoid(2),
            clusterer: ClustererConfig::with_method(ClusterMethod::Ward, 3),
            weight_mode: WeightMode::Learned,
        }
    }

    fn example() -> SequenceExample {
        SequenceExample {
            user: "u".into(),
            items: vec![0, 3, 5, 1, 7, 2, 9],
            timestamps: vec![0.0, 1.5, 2.0, 4.0, 7.5, 8.0, 11.0],
            positives: vec![4, 6, 3],
            negatives: vec![8, 10, 11],
        }
    }

    #[test]
    fn z_rows_are_phi_at_last_positions() {
        let model = MipModel::new(small_config(false), 12, None, 1).unwrap();
        let ex = example();
        let user = model.encode_user(&ex.items, &ex.timestamps, &model.config().clusterer).unwrap();
        let mu = user.clusters.last_indices();
        for (lam, &m) in mu.iter().enumerate() {
            assert_eq!(user.z.row(lam), user.phi.row(m));
        }
    }

    #[test]
    fn single_item_gives_single_interest() {
        let model = MipModel::new(small_config(false), 12, None, 1).unwrap();
        let user = model.encode_user(&[3], &[0.0], &model.config().clusterer).unwrap();
        assert_eq!(user.num_interests(), 1);
        assert_eq!(user.z.row(0), user.phi.row(0));
    }

    #[test]
    fn no_clustering_keeps_every_position() {
        let model = MipModel::new(small_config(false), 12, None, 1).unwrap();
        let none = ClustererConfig::with_method(ClusterMethod::None, 0);
        let ex = example();
        let user = model.encode_user(&ex.items[..5], &ex.timestamps[..5], &none).unwrap();
        assert_eq!(user.z, user.phi);
    }

    #[test]
    fn empty_and_unknown_inputs_rejected() {
        let model = MipModel::new(small_config(false), 12, None, 1).unwrap();
        let c = model.config().clusterer;
        assert!(matches!(model.encode_user(&[], &[], &c), Err(Error::Validation(_))));
        assert!(matches!(model.encode_user(&[12], &[0.0], &c), Err(Error::Validation(_))));
    }

    #[test]
    fn learned_mode_without_head_is_config_error() {
        let mut model = MipModel::new(small_config(false), 12, None, 1).unwrap();
        model.ids.weight = None;
        let ex = example();
        let user = model.encode_user(&ex.items, &ex.timestamps, &model.config().clusterer).unwrap();
        assert!(matches!(model.view().cluster_weights(&user, WeightMode::Learned), Err(Error::Config(_))));
    }

    #[test]
    fn unit_reset_gives_equal_scores_bitwise() {
        let mut model = MipModel::new(small_config(true), 12, Some(&Rng::new(4).normal_matrix(12, 4, 1.0)), 2).unwrap();
        model.reset_weight_head_to_unit();
        let ex = example();
        let view = model.view();
        let user = view.encode_user(&ex.items, &ex.timestamps, &model.config().clusterer).unwrap();
        let (w, _) = view.cluster_weights(&user, WeightMode::Learned).unwrap();
        assert!(w.iter().all(|&x| x == 1.0));
    }

    fn gradcheck(metadata_present: bool, loss: LossConfig) {
        let features = Rng::new(3).normal_matrix(12, 4, 1.0);
        let mut model = MipModel::new(small_config(metadata_present), 12, Some(&features), 6).unwrap();
        if let LossConfig::Triplet { learn_beta: true, .. } = loss {
            let beta = model.ids().beta;
            model.params_mut().set_trainable(beta, true);
        }
        let spec = StepSpec {
            weight_mode: WeightMode::Learned,
            loss,
            clusterer: model.config().clusterer,
            train: true,
        };
        let ex = example();
        let drop = Rng::new(77);
        let mut g = model.params().grad_buffer();
        model.view().example_gradient(&ex, &spec, Some(drop.clone()), Some(&mut g)).unwrap();
        model.params_mut().accumulate(&g);
        let cfg = model.config().clone();
        let ids = model.ids().clone();
        let report = finite_diff_check(model.params_mut(), 1e-5, |p| {
            ModelView::new(&cfg, p, &ids)
                .example_loss(&ex, &spec, Some(drop.clone()))
                .unwrap()
                .total
        });
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn gradient_check_nll_learned_items() {
        gradcheck(false, LossConfig::Nll);
    }

    #[test]
    fn gradient_check_nll_features() {
        gradcheck(true, LossConfig::Nll);
    }

    #[test]
    fn gradient_check_triplet_beta() {
        gradcheck(true, LossConfig::Triplet { alpha: 0.5, learn_beta: true });
    }
}
