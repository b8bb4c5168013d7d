//! Density-based clustering. Noise points become singleton clusters so
//! every position still carries a label.

use std::collections::VecDeque;

use super::ClusterAssignment;
use crate::numerics::{squared_distance, Matrix};

/// Neighbourhoods are closed balls (`dist ≤ eps`) and include the point
/// itself; a core point has at least `min_pts` neighbours.
pub fn dbscan(points: &Matrix, eps: f64, min_pts: usize) -> ClusterAssignment {
    let n = points.rows();
    let eps2 = eps * eps;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| squared_distance(points.row(i), points.row(j)) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut raw: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if raw[start].is_some() || !core[start] {
            continue;
        }
        raw[start] = Some(next);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            if !core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if raw[q].is_none() {
                    raw[q] = Some(next);
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    let labels: Vec<usize> = raw
        .into_iter()
        .map(|l| {
            l.unwrap_or_else(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    ClusterAssignment::from_raw_labels(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dense_groups_and_noise() {
        let pts = Matrix::from_rows(&[[0.0], [0.1], [0.2], [5.0], [5.1], [5.2], [20.0]]);
        let c = dbscan(&pts, 0.15, 2);
        assert_eq!(c.labels(), &[0, 0, 0, 1, 1, 1, 2]);
    }

    #[test]
    fn all_noise_is_singletons() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        assert_eq!(dbscan(&pts, 0.5, 2).labels(), &[0, 1, 2]);
    }

    #[test]
    fn eps_boundary_is_inclusive() {
        let pts = Matrix::from_rows(&[[0.0], [0.5]]);
        assert_eq!(dbscan(&pts, 0.5, 2).num_clusters(), 1);
    }

    #[test]
    fn border_point_not_expanded() {
        // 0.7 borders the dense run but is not core itself, so 1.1 stays noise.
        let pts = Matrix::from_rows(&[[0.0], [0.1], [0.2], [0.3], [0.7], [1.1]]);
        let c = dbscan(&pts, 0.45, 4);
        assert_eq!(c.labels(), &[0, 0, 0, 0, 0, 1]);
    }
}
