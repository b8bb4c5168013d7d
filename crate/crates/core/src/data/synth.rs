use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::sequences::{sample_negatives, split_users, SplitFractions};
use super::{DatasetSplit, SequenceExample, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{squared_distance, Matrix, Rng};

/// How a user's engagements are spread over their interests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Skew {
    Uniform,
    /// Per-user proportions from a symmetric Dirichlet.
    Dirichlet { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_users: usize,
    /// Interests per user (K).
    pub interests_per_user: usize,
    /// Topics in the catalogue; each user draws K of them.
    pub num_topics: usize,
    pub vocab_per_interest: usize,
    pub embed_dim: usize,
    pub noise_sigma: f64,
    /// Norm of the topic centroids.
    pub radius: f64,
    pub skew: Skew,
    /// Engagements per user; cut into windows of `window`.
    pub seq_len: usize,
    pub window: usize,
    pub input_len: usize,
    pub negatives: usize,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_users: 2000,
            interests_per_user: 3,
            num_topics: 20,
            vocab_per_interest: 30,
            embed_dim: 8,
            noise_sigma: 0.05,
            radius: 1.0,
            skew: Skew::Uniform,
            seq_len: 100,
            window: 100,
            input_len: 50,
            negatives: 50,
            fractions: SplitFractions::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.interests_per_user == 0 || self.interests_per_user > self.num_topics {
            return bad(format!(
                "interests_per_user must be in 1..={}, got {}",
                self.num_topics, self.interests_per_user
            ));
        }
        if self.vocab_per_interest == 0 || self.embed_dim == 0 || self.num_users == 0 {
            return bad("num_users, vocab_per_interest and embed_dim must be positive".into());
        }
        if !(self.noise_sigma >= 0.0) || !(self.radius > 0.0) {
            return bad("noise_sigma must be >= 0 and radius > 0".into());
        }
        if let Skew::Dirichlet { alpha } = self.skew {
            if !(alpha > 0.0) {
                return bad(format!("dirichlet alpha must be positive, got {alpha}"));
            }
        }
        if self.input_len == 0 || self.input_len >= self.window {
            return bad("input_len must be in 1..window".into());
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.num_topics * self.vocab_per_interest
    }
}

/// Interests of one synthetic user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub topics: Vec<usize>,
    pub proportions: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub split: DatasetSplit,
    pub centroids: Matrix,
    /// Profile per user, indexed like `user{i}`.
    pub profiles: Vec<UserProfile>,
}

/// Draws a user's K topics and mixing proportions.
pub fn synth_user_topics(cfg: &SynthConfig, rng: &mut Rng) -> UserProfile {
    let mut all: Vec<usize> = (0..cfg.num_topics).collect();
    rng.shuffle(&mut all);
    let mut topics = all[..cfg.interests_per_user].to_vec();
    topics.sort_unstable();
    let k = topics.len();
    let proportions = match cfg.skew {
        Skew::Uniform => vec![1.0 / k as f64; k],
        Skew::Dirichlet { alpha } => rng.dirichlet(k, alpha),
    };
    UserProfile { topics, proportions }
}

/// `n` item draws for a user: pick an interest by proportion, then a
/// uniform item within it. Returns `(item, topic)` pairs.
pub fn synth_events(cfg: &SynthConfig, profile: &UserProfile, n: usize, rng: &mut Rng) -> Vec<(u32, usize)> {
    (0..n)
        .map(|_| {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut pick = profile.topics.len() - 1;
            for (i, p) in profile.proportions.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let topic = profile.topics[pick];
            let item = topic * cfg.vocab_per_interest + rng.below(cfg.vocab_per_interest);
            (item as u32, topic)
        })
        .collect()
}

fn draw_centroids(cfg: &SynthConfig, rng: &mut Rng) -> Result<Matrix> {
    let min_sq = (10.0 * cfg.noise_sigma).powi(2);
    let mut out = Matrix::zeros(cfg.num_topics, cfg.embed_dim);
    let mut accepted = 0;
    for _ in 0..10_000 * cfg.num_topics {
        if accepted == cfg.num_topics {
            break;
        }
        let mut v: Vec<f64> = (0..cfg.embed_dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x *= cfg.radius / norm);
        if (0..accepted).all(|j| squared_distance(out.row(j), &v) >= min_sq) {
            out.row_mut(accepted).copy_from_slice(&v);
            accepted += 1;
        }
    }
    if accepted < cfg.num_topics {
        return Err(Error::Config(format!(
            "could not place {} centroids at separation {} on a radius-{} sphere",
            cfg.num_topics,
            10.0 * cfg.noise_sigma,
            cfg.radius
        )));
    }
    Ok(out)
}

/// Generates a multi-interest split with dense item features
/// (centroid + Gaussian noise) and ground-truth item topics.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = Rng::derive(cfg.seed, &[0]);
    let centroids = draw_centroids(cfg, &mut rng)?;
    let v = cfg.vocab_size();
    let mut features = Matrix::zeros(v, cfg.embed_dim);
    let mut item_interests = Vec::with_capacity(v);
    for item in 0..v {
        let topic = item / cfg.vocab_per_interest;
        for (f, c) in features.row_mut(item).iter_mut().zip(centroids.row(topic)) {
            *f = c + cfg.noise_sigma * rng.normal();
        }
        item_interests.push(topic);
    }
    let vocab = Vocabulary::from_ids((0..v).map(|i| format!("item{i}")))?;

    let width = cfg.num_users.to_string().len();
    let mut profiles = Vec::with_capacity(cfg.num_users);
    let mut examples = Vec::new();
    for u in 0..cfg.num_users {
        let mut urng = Rng::derive(cfg.seed, &[1, u as u64]);
        let profile = synth_user_topics(cfg, &mut urng);
        let events = synth_events(cfg, &profile, cfg.seq_len, &mut urng);
        let mut t = 0.0;
        let times: Vec<f64> = events
            .iter()
            .map(|_| {
                t += urng.uniform_range(0.0, 2.0);
                t
            })
            .collect();
        let history: HashSet<u32> = events.iter().map(|e| e.0).collect();
        let user = format!("user{u:0width$}");
        for (w, chunk) in events.chunks_exact(cfg.window).enumerate() {
            let ts = &times[w * cfg.window..w * cfg.window + cfg.input_len];
            let negatives = sample_negatives(v, &history, cfg.negatives, &mut urng)?;
            examples.push(SequenceExample {
                user: user.clone(),
                items: chunk[..cfg.input_len].iter().map(|e| e.0).collect(),
                timestamps: ts.iter().map(|x| x - ts[0]).collect(),
                positives: chunk[cfg.input_len..].iter().map(|e| e.0).collect(),
                negatives,
            });
        }
        profiles.push(profile);
    }

    let users: Vec<String> = examples.iter().map(|e| e.user.clone()).collect();
    let assignment = split_users(&users, cfg.fractions, &mut Rng::derive(cfg.seed, &[2]))?;
    let mut split = DatasetSplit {
        vocab,
        features: Some(features),
        item_interests: Some(item_interests),
        ..DatasetSplit::default()
    };
    for ex in examples {
        match assignment[&ex.user] {
            0 => split.train.push(ex),
            1 => split.valid.push(ex),
            _ => split.test.push(ex),
        }
    }
    split.validate()?;
    Ok(SynthDataset {
        split,
        centroids,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{adjusted_rand_index, ClusterMethod, ClustererConfig};

    fn small() -> SynthConfig {
        SynthConfig {
            num_users: 60,
            num_topics: 6,
            vocab_per_interest: 30,
            fractions: SplitFractions {
                train: 0.8,
                valid: 0.1,
                test: 0.1,
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn centroids_are_separated() {
        let d = synth_generate(&small()).unwrap();
        let c = &d.centroids;
        for i in 0..c.rows() {
            for j in 0..i {
                assert!(squared_distance(c.row(i), c.row(j)).sqrt() >= 0.5);
            }
        }
    }

    #[test]
    fn zero_noise_items_identical_and_ward_recovers() {
        let cfg = SynthConfig { noise_sigma: 0.0, ..small() };
        let d = synth_generate(&cfg).unwrap();
        let f = d.split.features.as_ref().unwrap();
        let truth = d.split.item_interests.as_ref().unwrap();
        for i in 0..f.rows() {
            assert_eq!(f.row(i), d.centroids.row(truth[i]));
        }
        let ex = &d.split.train[0];
        let idx: Vec<usize> = ex.items.iter().map(|&i| i as usize).collect();
        let pts = f.gather_rows(&idx);
        let got = ClustererConfig::with_method(ClusterMethod::Ward, 3).cluster(&pts).unwrap();
        let want: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
        assert_eq!(adjusted_rand_index(got.labels(), &want), 1.0);
    }

    #[test]
    fn uniform_skew_frequencies_converge() {
        let cfg = small();
        let mut rng = Rng::new(7);
        let profile = synth_user_topics(&cfg, &mut rng);
        let events = synth_events(&cfg, &profile, 10_000, &mut rng);
        for &t in &profile.topics {
            let f = events.iter().filter(|e| e.1 == t).count() as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "topic {t}: {f}");
        }
    }

    #[test]
    fn each_user_spans_their_interests() {
        let d = synth_generate(&small()).unwrap();
        let truth = d.split.item_interests.as_ref().unwrap();
        for ex in d.split.train.iter().chain(&d.split.valid).chain(&d.split.test) {
            let u: usize = ex.user.trim_start_matches("user").parse().unwrap();
            let topics: HashSet<usize> = ex.items.iter().chain(&ex.positives).map(|&i| truth[i as usize]).collect();
            let expected: HashSet<usize> = d.profiles[u].topics.iter().copied().collect();
            assert_eq!(topics, expected);
            let own: HashSet<u32> = ex.items.iter().chain(&ex.positives).copied().collect();
            assert!(ex.negatives.iter().all(|n| !own.contains(n)));
        }
    }

    #[test]
    fn single_interest_users() {
        let cfg = SynthConfig {
            interests_per_user: 1,
            ..small()
        };
        let d = synth_generate(&cfg).unwrap();
        let truth = d.split.item_interests.as_ref().unwrap();
        for ex in &d.split.train {
            let topics: HashSet<usize> = ex.items.iter().map(|&i| truth[i as usize]).collect();
            assert_eq!(topics.len(), 1);
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        assert_eq!(a.split, b.split);
    }
}
