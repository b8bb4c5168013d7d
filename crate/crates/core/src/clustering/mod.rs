//! Clustering of embedding points, and the cluster-assignment utilities the
//! encoder consumes: the same-cluster mask and the last-member index of each
//! cluster.
//!
//! All algorithms use Euclidean distance and return labels numbered by first
//! appearance (point 0 is always in cluster 0), so a fixed input and seed
//! gives bit-identical output.

mod birch;
mod dbscan;
mod kmeans;
mod spectral;
mod ward;

use serde::{Deserialize, Serialize};

pub use birch::birch;
pub use dbscan::dbscan;
pub use kmeans::{kmeans, kmeans_with_trace, KMeansResult};
pub use spectral::spectral;
pub use ward::ward;

use crate::error::{Error, Result};
use crate::numerics::{squared_distance, Matrix, Rng};

/// Per-point cluster labels in `0..num_clusters`, every cluster non-empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl ClusterAssignment {
    /// Validates that labels cover `0..Λ` with no gaps.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let num_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_clusters];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("cluster {empty} has no members")));
        }
        Ok(Self {
            labels,
            num_clusters,
        })
    }

    /// Relabels arbitrary ids to `0..Λ` in order of first appearance.
    pub fn from_raw_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self {
            labels,
            num_clusters: map.len(),
        }
    }

    /// Every point in its own cluster.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            num_clusters: usize::from(n > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member index lists `L_λ`, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn to_mask(&self) -> Mask {
        assignment_to_mask(self)
    }

    pub fn last_indices(&self) -> Vec<usize> {
        last_indices(self)
    }
}

/// Binary same-cluster matrix `M[i][j] = 1[C_i = C_j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    n: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn all_ones(n: usize) -> Self {
        Self {
            n,
            bits: vec![true; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn is_all_ones(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn to_matrix(&self) -> Matrix {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Matrix::from_vec(self.n, self.n, data).expect("square")
    }
}

pub fn assignment_to_mask(c: &ClusterAssignment) -> Mask {
    let n = c.len();
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            bits[i * n + j] = c.labels[i] == c.labels[j];
        }
    }
    Mask { n, bits }
}

/// `μ_λ`: the largest position carrying label `λ`.
pub fn last_indices(c: &ClusterAssignment) -> Vec<usize> {
    let mut mu = vec![0; c.num_clusters];
    for (i, &l) in c.labels.iter().enumerate() {
        mu[l] = i;
    }
    mu
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    /// Each point is its own cluster.
    None,
    Ward,
    Kmeans,
    Spectral,
    Birch,
    Dbscan,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 6] = [
        ClusterMethod::None,
        ClusterMethod::Ward,
        ClusterMethod::Kmeans,
        ClusterMethod::Spectral,
        ClusterMethod::Birch,
        ClusterMethod::Dbscan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::None => "none",
            ClusterMethod::Ward => "ward",
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Spectral => "spectral",
            ClusterMethod::Birch => "birch",
            ClusterMethod::Dbscan => "dbscan",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            ClusterMethod::None => "None",
            ClusterMethod::Ward => "Ward",
            ClusterMethod::Kmeans => "K-Means",
            ClusterMethod::Spectral => "Spectral",
            ClusterMethod::Birch => "BIRCH",
            ClusterMethod::Dbscan => "DBSCAN",
        }
    }

    /// Whether the method takes a cluster count.
    pub fn uses_k(&self) -> bool {
        !matches!(self, ClusterMethod::None | ClusterMethod::Dbscan)
    }
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => ClusterMethod::None,
            "ward" => ClusterMethod::Ward,
            "kmeans" | "k-means" => ClusterMethod::Kmeans,
            "spectral" => ClusterMethod::Spectral,
            "birch" => ClusterMethod::Birch,
            "dbscan" => ClusterMethod::Dbscan,
            other => return Err(Error::Config(format!("unknown clustering method `{other}`"))),
        })
    }
}

impl std::fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A clustering method plus every knob the five algorithms take.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClustererConfig {
    pub method: ClusterMethod,
    pub k: usize,
    pub kmeans_max_iters: usize,
    /// RBF bandwidth for spectral; `None` means `1 / dim`.
    pub spectral_gamma: Option<f64>,
    pub birch_threshold: f64,
    pub birch_branching: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Seed for k-means++ (also used inside spectral).
    pub seed: u64,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Ward,
            k: 5,
            kmeans_max_iters: 100,
            spectral_gamma: None,
            birch_threshold: 0.5,
            birch_branching: 50,
            dbscan_eps: 0.5,
            dbscan_min_pts: 5,
            seed: 0,
        }
    }
}

impl ClustererConfig {
    pub fn with_method(method: ClusterMethod, k: usize) -> Self {
        Self {
            method,
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.uses_k() && self.k == 0 {
            return Err(Error::Config("cluster count k must be >= 1".into()));
        }
        if self.birch_threshold <= 0.0 || self.birch_branching < 2 {
            return Err(Error::Config("birch needs threshold > 0 and branching >= 2".into()));
        }
        if self.dbscan_eps <= 0.0 || self.dbscan_min_pts == 0 {
            return Err(Error::Config("dbscan needs eps > 0 and min_pts >= 1".into()));
        }
        Ok(())
    }

    /// Clusters the rows of `points`. When the method takes a count, `k` is
    /// capped at the number of points.
    pub fn cluster(&self, points: &Matrix) -> Result<ClusterAssignment> {
        let n = points.rows();
        if n == 0 {
            return Err(Error::Validation("cannot cluster an empty point set".into()));
        }
        let k = self.k.min(n);
        match self.method {
            ClusterMethod::None => Ok(ClusterAssignment::singletons(n)),
            ClusterMethod::Ward => ward(points, k),
            ClusterMethod::Kmeans => {
                let mut rng = Rng::new(self.seed);
                kmeans(points, k, self.kmeans_max_iters, &mut rng)
            }
            ClusterMethod::Spectral => spectral(points, k, self.spectral_gamma, self.seed),
            ClusterMethod::Birch => birch(points, self.birch_threshold, self.birch_branching, k),
            ClusterMethod::Dbscan => Ok(dbscan(points, self.dbscan_eps, self.dbscan_min_pts)),
        }
    }
}

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Validation(format!("cluster count {k} out of range 1..={n}")));
    }
    Ok(())
}

/// Within-cluster sum of squared distances to cluster means.
pub fn wcss(points: &Matrix, c: &ClusterAssignment) -> f64 {
    let d = points.cols();
    let mut sums = vec![vec![0.0; d]; c.num_clusters()];
    let mut counts = vec![0usize; c.num_clusters()];
    for (i, &l) in c.labels().iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|x| x / n as f64).collect())
        .collect();
    c.labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_distance(points.row(i), &means[l]))
        .sum()
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_a: f64 = table.iter().map(|r| comb2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| comb2(table.iter().map(|r| r[j]).sum())).sum();
    let total = comb2(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// `k` Gaussian blobs of `per` points each in `dim` dimensions, centres
    /// on scaled axis directions `sep` apart (so well over 10σ for σ = 1).
    pub fn blobs(k: usize, per: usize, dim: usize, sep: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for c in 0..k {
            let mut centre = vec![0.0; dim];
            centre[c % dim] = sep * (1 + c / dim) as f64;
            for _ in 0..per {
                rows.push(centre.iter().map(|m| m + rng.normal()).collect::<Vec<_>>());
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows), truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_from_labels() {
        let c = ClusterAssignment::new(vec![0, 0, 1]).unwrap();
        assert_eq!(
            c.to_mask().to_matrix(),
            Matrix::from_rows(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        );
        assert!(ClusterAssignment::single(4).to_mask().is_all_ones());
        assert_eq!(ClusterAssignment::singletons(3).to_mask().to_matrix(), Matrix::identity(3));
    }

    #[test]
    fn last_index_cases() {
        let c = ClusterAssignment::new(vec![0, 1, 0, 1]).unwrap();
        assert_eq!(c.last_indices(), vec![2, 3]);
        assert_eq!(ClusterAssignment::single(7).last_indices(), vec![6]);
        let c = ClusterAssignment::new(vec![2, 2, 0, 1, 0]).unwrap();
        assert_eq!(c.last_indices()[0], 4);
        assert_eq!(c.last_indices(), vec![4, 3, 1]);
    }

    #[test]
    fn rejects_gapped_labels() {
        assert!(ClusterAssignment::new(vec![0, 2]).is_err());
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }

    #[test]
    fn none_method_is_identity() {
        let pts = Matrix::zeros(4, 2);
        let c = ClustererConfig::with_method(ClusterMethod::None, 0).cluster(&pts).unwrap();
        assert_eq!(c.labels(), &[0, 1, 2, 3]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn members_partition_and_mask_is_relabel_invariant(raw in proptest::collection::vec(0usize..6, 1..30), shift in 1usize..6) {
                let c = ClusterAssignment::from_raw_labels(&raw);
                let members = c.members();
                let mut all: Vec<usize> = members.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..raw.len()).collect::<Vec<_>>());
                prop_assert!(members.iter().all(|m| !m.is_empty()));

                let permuted: Vec<usize> = raw.iter().map(|r| (r + shift) % 6).collect();
                let c2 = ClusterAssignment::from_raw_labels(&permuted);
                prop_assert_eq!(c.to_mask(), c2.to_mask());

                let m = c.to_mask();
                for i in 0..raw.len() {
                    prop_assert!(m.get(i, i));
                    for j in 0..raw.len() {
                        prop_assert_eq!(m.get(i, j), m.get(j, i));
                    }
                }
            }
        }
    }
}
