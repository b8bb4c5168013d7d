use std::collections::{BTreeMap, HashMap, HashSet};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{DatasetSplit, RawInteraction, SequenceExample, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Engagement types that count as observed negatives.
pub fn is_observed_negative(label: Option<&str>) -> bool {
    matches!(label, Some("hide") | Some("impression"))
}

/// Events per user, users sorted by id, each user's events in input order.
pub fn group_by_user(interactions: &[RawInteraction]) -> BTreeMap<&str, Vec<&RawInteraction>> {
    let mut out: BTreeMap<&str, Vec<&RawInteraction>> = BTreeMap::new();
    for r in interactions {
        out.entry(r.user.as_str()).or_default().push(r);
    }
    out
}

/// Drops items seen fewer than `min_count` times. One pass by default;
/// `iterated` also drops sparse users and repeats until nothing changes.
pub fn ten_core_filter(interactions: &[RawInteraction], min_count: usize, iterated: bool) -> Vec<RawInteraction> {
    let mut current = interactions.to_vec();
    loop {
        let mut item_counts: HashMap<&str, usize> = HashMap::new();
        let mut user_counts: HashMap<&str, usize> = HashMap::new();
        for r in &current {
            *item_counts.entry(&r.item).or_default() += 1;
            *user_counts.entry(&r.user).or_default() += 1;
        }
        let keep = |r: &RawInteraction| {
            item_counts[r.item.as_str()] >= min_count && (!iterated || user_counts[r.user.as_str()] >= min_count)
        };
        let next: Vec<RawInteraction> = current.iter().filter(|r| keep(r)).cloned().collect();
        let changed = next.len() != current.len();
        current = next;
        if !iterated || !changed {
            return current;
        }
    }
}

/// Cuts each user's engagements into disjoint `window`-long chunks: the
/// first `input_len` are inputs (timestamps shifted to start at 0), the rest
/// positives. Leftovers shorter than `window` are dropped. Negatives are left
/// empty.
pub fn build_sequences(
    interactions: &[RawInteraction],
    vocab: &mut Vocabulary,
    window: usize,
    input_len: usize,
) -> Vec<SequenceExample> {
    assert!(input_len < window, "input_len must be shorter than the window");
    let mut out = Vec::new();
    for (user, events) in group_by_user(interactions) {
        let events: Vec<&&RawInteraction> = events.iter().filter(|r| !is_observed_negative(r.label.as_deref())).collect();
        for chunk in events.chunks_exact(window) {
            let t0 = chunk[0].timestamp;
            out.push(SequenceExample {
                user: user.to_string(),
                items: chunk[..input_len].iter().map(|r| vocab.insert(r.item.clone())).collect(),
                timestamps: chunk[..input_len].iter().map(|r| r.timestamp - t0).collect(),
                positives: chunk[input_len..].iter().map(|r| vocab.insert(r.item.clone())).collect(),
                negatives: Vec::new(),
            });
        }
    }
    out
}

/// `n` distinct items drawn uniformly from `0..num_items` minus `exclude`.
pub fn sample_negatives(num_items: usize, exclude: &HashSet<u32>, n: usize, rng: &mut Rng) -> Result<Vec<u32>> {
    let mut pool: Vec<u32> = (0..num_items as u32).filter(|i| !exclude.contains(i)).collect();
    if pool.len() < n {
        return Err(Error::Validation(format!(
            "only {} candidate negatives for {n} requested",
            pool.len()
        )));
    }
    // Partial Fisher–Yates.
    for i in 0..n {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(n);
    Ok(pool)
}

/// Metadata-mode sequences: `input_len` inputs, then the next `label_len`
/// engagements that start at least `gap_days` after the last input. The
/// returned `negatives` hold the user's observed negatives after the inputs
/// (not yet mixed).
pub fn build_gap_split(
    interactions: &[RawInteraction],
    vocab: &mut Vocabulary,
    gap_days: f64,
    input_len: usize,
    label_len: usize,
) -> Vec<SequenceExample> {
    let mut out = Vec::new();
    for (user, events) in group_by_user(interactions) {
        let (neg, pos): (Vec<&RawInteraction>, Vec<&RawInteraction>) =
            events.into_iter().partition(|r| is_observed_negative(r.label.as_deref()));
        let mut start = 0;
        while start + input_len <= pos.len() {
            let inputs = &pos[start..start + input_len];
            let t_last = inputs[input_len - 1].timestamp;
            let Some(first_label) = (start + input_len..pos.len()).find(|&j| pos[j].timestamp >= t_last + gap_days) else {
                break;
            };
            if first_label + label_len > pos.len() {
                break;
            }
            let t0 = inputs[0].timestamp;
            let mut seen = HashSet::new();
            let observed: Vec<u32> = neg
                .iter()
                .filter(|r| r.timestamp > t_last)
                .map(|r| vocab.insert(r.item.clone()))
                .filter(|i| seen.insert(*i))
                .collect();
            out.push(SequenceExample {
                user: user.to_string(),
                items: inputs.iter().map(|r| vocab.insert(r.item.clone())).collect(),
                timestamps: inputs.iter().map(|r| r.timestamp - t0).collect(),
                positives: pos[first_label..first_label + label_len]
                    .iter()
                    .map(|r| vocab.insert(r.item.clone()))
                    .collect(),
                negatives: observed,
            });
            start = first_label + label_len;
        }
    }
    out
}

/// `n` negatives, half observed and half random; odd `n` gives the extra
/// slot to observed. A short observed list is topped up with random items.
pub fn mix_negatives(observed: &[u32], random: &[u32], n: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    for &i in observed {
        if out.len() == n.div_ceil(2) {
            break;
        }
        if seen.insert(i) {
            out.push(i);
        }
    }
    for &i in random {
        if out.len() == n {
            break;
        }
        if seen.insert(i) {
            out.push(i);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.9,
            valid: 0.05,
            test: 0.05,
        }
    }
}

/// Assigns users to train/valid/test after a seeded shuffle. Returns the
/// split index (0, 1, 2) per user.
pub fn split_users(users: &[String], fractions: SplitFractions, rng: &mut Rng) -> Result<HashMap<String, usize>> {
    let total = fractions.train + fractions.valid + fractions.test;
    if fractions.train < 0.0 || fractions.valid < 0.0 || fractions.test < 0.0 || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions must be non-negative and sum to 1, got {total}")));
    }
    let mut order: Vec<&String> = users.iter().collect();
    order.sort();
    order.dedup();
    rng.shuffle(&mut order);
    let n = order.len();
    let n_valid = (fractions.valid * n as f64).round() as usize;
    let n_test = ((fractions.test * n as f64).round() as usize).min(n - n_valid.min(n));
    let n_train = n - n_valid.min(n) - n_test;
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            let s = if i < n_train {
                0
            } else if i < n_train + n_valid {
                1
            } else {
                2
            };
            (u.clone(), s)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepareOptions {
    pub min_item_count: usize,
    /// Iterate user+item filtering to a fixpoint instead of one item pass.
    pub iterated_core: bool,
    pub window: usize,
    pub input_len: usize,
    pub negatives: usize,
    /// When set, build gap-separated labels and mix in observed negatives.
    pub gap_days: Option<f64>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            min_item_count: 10,
            iterated_core: false,
            window: 100,
            input_len: 50,
            negatives: 50,
            gap_days: None,
            fractions: SplitFractions::default(),
            seed: 0,
        }
    }
}

/// Full preparation: filter, build sequences, sample negatives, split by
/// user. `features` maps raw item ids to dense vectors (metadata mode).
pub fn prepare_split(
    interactions: &[RawInteraction],
    opts: &PrepareOptions,
    features: Option<&HashMap<String, Vec<f64>>>,
) -> Result<DatasetSplit> {
    let filtered = ten_core_filter(interactions, opts.min_item_count, opts.iterated_core);
    info!(
        "10-core filter kept {} of {} interactions",
        filtered.len(),
        interactions.len()
    );
    let mut vocab = Vocabulary::new();
    // Every surviving item is a candidate, in sorted-user traversal order.
    for events in group_by_user(&filtered).values() {
        for r in events {
            vocab.insert(r.item.clone());
        }
    }
    let label_len = opts.window - opts.input_len;
    let mut examples = match opts.gap_days {
        Some(gap) => build_gap_split(&filtered, &mut vocab, gap, opts.input_len, label_len),
        None => build_sequences(&filtered, &mut vocab, opts.window, opts.input_len),
    };
    if examples.is_empty() {
        return Err(Error::Validation("no user has enough interactions to form a sequence".into()));
    }

    let mut history: HashMap<&str, HashSet<u32>> = HashMap::new();
    for r in &filtered {
        if !is_observed_negative(r.label.as_deref()) {
            history.entry(&r.user).or_default().insert(vocab.get(&r.item).expect("in vocabulary"));
        }
    }
    for (k, ex) in examples.iter_mut().enumerate() {
        let mut rng = Rng::derive(opts.seed, &[1, k as u64]);
        let exclude = &history[ex.user.as_str()];
        let random = sample_negatives(vocab.len(), exclude, opts.negatives, &mut rng)?;
        ex.negatives = if opts.gap_days.is_some() {
            let observed: Vec<u32> = ex.negatives.iter().copied().filter(|i| !exclude.contains(i)).collect();
            mix_negatives(&observed, &random, opts.negatives)
        } else {
            random
        };
    }

    let users: Vec<String> = examples.iter().map(|e| e.user.clone()).collect();
    let assignment = split_users(&users, opts.fractions, &mut Rng::derive(opts.seed, &[2]))?;
    let mut split = DatasetSplit {
        vocab,
        ..DatasetSplit::default()
    };
    for ex in examples {
        match assignment[&ex.user] {
            0 => split.train.push(ex),
            1 => split.valid.push(ex),
            _ => split.test.push(ex),
        }
    }
    if let Some(f) = features {
        let dim = f.values().next().map_or(0, Vec::len);
        let mut table = Matrix::zeros(split.vocab.len(), dim);
        for (i, id) in split.vocab.ids().iter().enumerate() {
            let row = f
                .get(id)
                .ok_or_else(|| Error::Validation(format!("item `{id}` has no feature vector")))?;
            if row.len() != dim {
                return Err(Error::Validation(format!("item `{id}` has {} features, expected {dim}", row.len())));
            }
            table.row_mut(i).copy_from_slice(row);
        }
        split.features = Some(table);
    }
    if split.valid.is_empty() || split.test.is_empty() {
        warn!("validation or test split is empty; consider more users");
    }
    split.validate()?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(user: &str, item: &str, t: f64) -> RawInteraction {
        RawInteraction {
            user: user.into(),
            item: item.into(),
            timestamp: t,
            label: None,
        }
    }

    fn user_with(n: usize, user: &str) -> Vec<RawInteraction> {
        (0..n).map(|i| rec(user, &format!("i{}", i % 20), i as f64)).collect()
    }

    #[test]
    fn core_threshold_boundary() {
        let mut data: Vec<RawInteraction> = (0..9).map(|t| rec("u", "nine", t as f64)).collect();
        data.extend((0..10).map(|t| rec("v", "ten", t as f64)));
        let kept = ten_core_filter(&data, 10, false);
        assert!(kept.iter().all(|r| r.item == "ten"));
        assert_eq!(kept.len(), 10);
        assert!(ten_core_filter(&[], 10, false).is_empty());
    }

    #[test]
    fn iterated_core_reaches_fixpoint() {
        // Item `a` has 10 events but 5 come from a user with only 5 events
        // in total; dropping that user drops `a` below threshold.
        let mut data: Vec<RawInteraction> = (0..5).map(|t| rec("sparse", "a", t as f64)).collect();
        data.extend((0..5).map(|t| rec("dense", "a", t as f64)));
        data.extend((0..10).map(|t| rec("dense", "b", t as f64)));
        assert_eq!(ten_core_filter(&data, 10, false).len(), 20);
        let it = ten_core_filter(&data, 10, true);
        assert!(it.iter().all(|r| r.item == "b"));
    }

    #[test]
    fn window_counts() {
        for (n, expected) in [(250, 2), (99, 0), (100, 1)] {
            let mut v = Vocabulary::new();
            let seqs = build_sequences(&user_with(n, "u"), &mut v, 100, 50);
            assert_eq!(seqs.len(), expected, "n={n}");
            for s in &seqs {
                assert_eq!((s.items.len(), s.positives.len()), (50, 50));
                assert_eq!(s.timestamps[0], 0.0);
            }
        }
    }

    #[test]
    fn negatives_are_disjoint_and_deterministic() {
        let exclude: HashSet<u32> = (0..30).collect();
        let a = sample_negatives(100, &exclude, 50, &mut Rng::new(1)).unwrap();
        let b = sample_negatives(100, &exclude, 50, &mut Rng::new(1)).unwrap();
        assert_eq!(a, b);
        let set: HashSet<u32> = a.iter().copied().collect();
        assert_eq!(set.len(), 50);
        assert!(set.is_disjoint(&exclude));
        assert!(sample_negatives(60, &exclude, 50, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn gap_split_respects_gap() {
        let mut data: Vec<RawInteraction> = (0..50).map(|t| rec("u", &format!("a{t}"), t as f64 * 0.1)).collect();
        // Events within the gap are skipped; labels start a day later.
        data.extend((0..5).map(|t| rec("u", &format!("b{t}"), 5.0 + t as f64 * 0.1)));
        data.extend((0..50).map(|t| rec("u", &format!("c{t}"), 7.0 + t as f64 * 0.1)));
        let mut v = Vocabulary::new();
        let seqs = build_gap_split(&data, &mut v, 1.0, 50, 50);
        assert_eq!(seqs.len(), 1);
        assert_eq!(v.id(seqs[0].positives[0]), "c0");
    }

    #[test]
    fn mix_is_half_and_half() {
        let m = mix_negatives(&[1, 2, 3, 4], &[10, 11, 12], 5);
        assert_eq!(m, vec![1, 2, 3, 10, 11]);
        let short = mix_negatives(&[1], &[10, 11, 12, 13], 4);
        assert_eq!(short, vec![1, 10, 11, 12]);
    }

    #[test]
    fn prepare_keeps_users_disjoint() {
        let mut data = Vec::new();
        for u in 0..40 {
            // 25 items per user out of 80, so negatives are plentiful.
            data.extend((0..100).map(|i| rec(&format!("u{u}"), &format!("i{}", (2 * u + i % 25) % 80), i as f64)));
        }
        let opts = PrepareOptions {
            fractions: SplitFractions {
                train: 0.5,
                valid: 0.25,
                test: 0.25,
            },
            ..PrepareOptions::default()
        };
        let split = prepare_split(&data, &opts, None).unwrap();
        assert_eq!(split.train.len() + split.valid.len() + split.test.len(), 40);
        assert_eq!(split.valid.len(), 10);
        split.validate().unwrap();
        for ex in split.train.iter().chain(&split.test) {
            let own: HashSet<u32> = ex.items.iter().chain(&ex.positives).copied().collect();
            assert!(ex.negatives.iter().all(|n| !own.contains(n)));
        }
        assert_eq!(prepare_split(&data, &opts, None).unwrap(), split);
    }
}
