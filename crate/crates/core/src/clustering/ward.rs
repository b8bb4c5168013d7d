//! Agglomerative clustering with Ward linkage, using the Lance–Williams
//! recurrence on squared Euclidean distances.

use super::{check_k, ClusterAssignment};
use crate::error::Result;
use crate::numerics::{squared_distance, Matrix};

/// Merges until `k` clusters remain. Ties go to the lexicographically
/// smallest `(i, j)` pair.
pub fn ward(points: &Matrix, k: usize) -> Result<ClusterAssignment> {
    let n = points.rows();
    check_k(n, k)?;
    Ok(ClusterAssignment::from_raw_labels(&ward_labels(points, k, &vec![1.0; n])))
}

/// Ward on weighted points (initial cluster sizes); raw labels are the index
/// of each point's surviving representative.
pub(crate) fn ward_labels(points: &Matrix, k: usize, weights: &[f64]) -> Vec<usize> {
    let n = points.rows();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            // Weighted Ward distance between singletons-with-mass.
            let d = 2.0 * weights[i] * weights[j] / (weights[i] + weights[j])
                * squared_distance(points.row(i), points.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = weights.to_vec();
    let mut active = vec![true; n];
    let mut rep: Vec<usize> = (0..n).collect();

    for _ in 0..n.saturating_sub(k) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            let row = &dist[i * n..(i + 1) * n];
            for j in (i + 1)..n {
                if active[j] && row[j] < best.0 {
                    best = (row[j], i, j);
                }
            }
        }
        let (dij, i, j) = best;
        let (ni, nj) = (size[i], size[j]);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let nm = size[m];
            let d = ((ni + nm) * dist[i * n + m] + (nj + nm) * dist[j * n + m] - nm * dij) / (ni + nj + nm);
            dist[i * n + m] = d;
            dist[m * n + i] = d;
        }
        size[i] += nj;
        active[j] = false;
        for r in rep.iter_mut() {
            if *r == j {
                *r = i;
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::test_support::blobs;
    use crate::clustering::{adjusted_rand_index, wcss};
    use crate::numerics::Rng;

    #[test]
    fn k_equals_n_is_identity() {
        let mut rng = Rng::new(1);
        let pts = rng.uniform_matrix(6, 3, 0.0, 1.0);
        assert_eq!(ward(&pts, 6).unwrap().labels(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn k_one_is_single_cluster() {
        let mut rng = Rng::new(2);
        let pts = rng.uniform_matrix(9, 2, 0.0, 1.0);
        assert!(ward(&pts, 1).unwrap().labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn recovers_two_blobs() {
        let (pts, truth) = blobs(2, 40, 4, 10.0, 3);
        let c = ward(&pts, 2).unwrap();
        assert_eq!(adjusted_rand_index(c.labels(), &truth), 1.0);
    }

    #[test]
    fn out_of_range_k() {
        let pts = Matrix::zeros(3, 2);
        assert!(ward(&pts, 0).is_err());
        assert!(ward(&pts, 4).is_err());
    }

    #[test]
    fn tie_breaking_prefers_smallest_pair() {
        // Points 0-1 and 2-3 are equally close; the first pair merges first.
        let pts = Matrix::from_rows(&[[0.0], [1.0], [10.0], [11.0]]);
        assert_eq!(ward(&pts, 3).unwrap().labels(), &[0, 0, 1, 2]);
    }

    #[test]
    fn merge_cost_matches_wcss_increase() {
        // Brute force: the first merge must be the pair with the smallest
        // WCSS increase over all pairs.
        let mut rng = Rng::new(11);
        let pts = rng.uniform_matrix(7, 2, -1.0, 1.0);
        let c = ward(&pts, 6).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for i in 0..7 {
            for j in (i + 1)..7 {
                let raw: Vec<usize> = (0..7).map(|p| if p == j { i } else { p }).collect();
                let cand = ClusterAssignment::from_raw_labels(&raw);
                let w = wcss(&pts, &cand);
                if w < best.0 {
                    best = (w, cand.labels().to_vec());
                }
            }
        }
        assert_eq!(c.labels(), &best.1[..]);
    }
}
