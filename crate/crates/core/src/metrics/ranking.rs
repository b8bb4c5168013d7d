use crate::error::{Error, Result};

/// Pairwise concordance `(#{p > n} + ½·#{p = n}) / (|pos|·|neg|)`, computed
/// by sorting the pooled scores and counting per tie group.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Validation("auc needs at least one positive and one negative".into()));
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(Error::Validation("auc received a NaN score".into()));
    }
    let mut pooled: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Doubled counts keep everything integral: 2·concordant + ties.
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            if pooled[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        doubled += 2 * p * neg_below + p * n;
        neg_below += n;
        i = j;
    }
    Ok(doubled as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}

/// Reference O(m·n) pair loop.
pub fn auc_brute_force(pos: &[f64], neg: &[f64]) -> f64 {
    let mut doubled = 0u128;
    for &p in pos {
        for &n in neg {
            if p > n {
                doubled += 2;
            } else if p == n {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64
}

/// Candidate order by descending score; ties keep input order.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

fn positives(relevance: &[bool]) -> usize {
    relevance.iter().filter(|&&r| r).count()
}

/// `relevance[i]` marks whether the rank-`i` candidate is a positive.
/// Returns hits in the top `k` over all positives (0 when there are none).
pub fn recall_at_k(relevance: &[bool], k: usize) -> f64 {
    let total = positives(relevance);
    if total == 0 {
        return 0.0;
    }
    positives(&relevance[..k.min(relevance.len())]) as f64 / total as f64
}

pub fn precision_at_k(relevance: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    positives(&relevance[..k.min(relevance.len())]) as f64 / k as f64
}

/// Binary-relevance nDCG with `DCG = Σ rel_i / log2(i + 1)` over 1-based
/// ranks, normalized by the ideal ordering at `k`.
pub fn ndcg_at_k(relevance: &[bool], k: usize) -> f64 {
    let gain = |rank0: usize| 1.0 / ((rank0 + 2) as f64).log2();
    let dcg: f64 = relevance.iter().take(k).enumerate().filter(|(_, &r)| r).map(|(i, _)| gain(i)).sum();
    let ideal: f64 = (0..positives(relevance).min(k)).map(gain).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}
