//! K-means with k-means++ seeding and Lloyd iterations.

use log::debug;

use super::{check_k, ClusterAssignment};
use crate::error::Result;
use crate::numerics::{squared_distance, Matrix, Rng};

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Final centroids, one row per (compacted) cluster.
    pub centroids: Matrix,
    /// WCSS after every assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().expect("at least one assignment step")
    }
}

pub fn kmeans(points: &Matrix, k: usize, max_iters: usize, rng: &mut Rng) -> Result<ClusterAssignment> {
    Ok(kmeans_with_trace(points, k, max_iters, rng)?.assignment)
}

/// Runs until assignments stop changing or `max_iters` assignment steps.
/// Empty clusters are reseeded to the point farthest from its centroid.
pub fn kmeans_with_trace(points: &Matrix, k: usize, max_iters: usize, rng: &mut Rng) -> Result<KMeansResult> {
    let n = points.rows();
    check_k(n, k)?;
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for iter in 0..max_iters.max(1) {
        iterations = iter + 1;
        let mut changed = false;
        let mut total = 0.0;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = d;
            total += d;
        }
        history.push(total);
        if !changed {
            break;
        }

        let mut sums = Matrix::zeros(k, points.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(p) = far {
                    debug!("k-means: reseeding empty cluster {c} at point {p}");
                    taken[p] = true;
                    dists[p] = 0.0;
                    centroids.row_mut(c).copy_from_slice(points.row(p));
                }
            }
        }
    }

    let assignment = ClusterAssignment::from_raw_labels(&labels);
    let mut order = vec![usize::MAX; k];
    for (raw, &compact) in labels.iter().zip(assignment.labels()) {
        order[*raw] = compact;
    }
    let mut final_centroids = Matrix::zeros(assignment.num_clusters(), points.cols());
    for (raw, &compact) in order.iter().enumerate() {
        if compact != usize::MAX {
            final_centroids.row_mut(compact).copy_from_slice(centroids.row(raw));
        }
    }
    Ok(KMeansResult {
        assignment,
        centroids: final_centroids,
        wcss_history: history,
        iterations,
    })
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(pick)));
        }
    }
    centroids
}
