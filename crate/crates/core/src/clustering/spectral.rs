//! Spectral clustering: RBF affinity, symmetric normalized Laplacian,
//! k-means on the row-normalized bottom eigenvectors.

use log::warn;

use super::kmeans::kmeans_with_trace;
use super::{check_k, ClusterAssignment};
use crate::error::Result;
use crate::numerics::{jacobi_eigen_symmetric, squared_distance, Matrix, Rng};

const RESTARTS: usize = 10;

/// `gamma` defaults to `1 / dim`. Identical points collapse to one cluster.
pub fn spectral(points: &Matrix, k: usize, gamma: Option<f64>, seed: u64) -> Result<ClusterAssignment> {
    let n = points.rows();
    check_k(n, k)?;
    if (1..n).all(|i| points.row(i) == points.row(0)) {
        if k > 1 {
            warn!("spectral: all {n} points identical; returning a single cluster");
        }
        return Ok(ClusterAssignment::single(n));
    }
    let gamma = gamma.unwrap_or(1.0 / points.cols().max(1) as f64);

    let mut affinity = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (-gamma * squared_distance(points.row(i), points.row(j))).exp();
            affinity[(i, j)] = a;
            affinity[(j, i)] = a;
        }
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = affinity.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            lap[(i, j)] -= inv_sqrt_deg[i] * affinity[(i, j)] * inv_sqrt_deg[j];
        }
    }

    let (_, vectors) = jacobi_eigen_symmetric(&lap)?;
    let mut embed = Matrix::zeros(n, k);
    for i in 0..n {
        let row = embed.row_mut(i);
        for (c, v) in row.iter_mut().enumerate() {
            *v = vectors[(i, c)];
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }

    let mut rng = Rng::new(seed);
    let mut best: Option<(f64, ClusterAssignment)> = None;
    for _ in 0..RESTARTS {
        let r = kmeans_with_trace(&embed, k, 100, &mut rng)?;
        let w = r.wcss();
        if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
            best = Some((w, r.assignment));
        }
    }
    Ok(best.expect("at least one restart").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use crate::clustering::test_support::blobs;

    #[test]
    fn recovers_blobs() {
        let (pts, truth) = blobs(3, 20, 3, 8.0, 17);
        let c = spectral(&pts, 3, None, 0).unwrap();
        assert!(adjusted_rand_index(c.labels(), &truth) > 0.99);
    }

    #[test]
    fn identical_points_single_cluster() {
        let pts = Matrix::filled(5, 3, 0.25);
        assert_eq!(spectral(&pts, 3, None, 0).unwrap().num_clusters(), 1);
    }

    #[test]
    fn deterministic() {
        let (pts, _) = blobs(2, 15, 2, 2.0, 4);
        assert_eq!(spectral(&pts, 2, None, 7).unwrap(), spectral(&pts, 2, None, 7).unwrap());
    }
}
