//! BIRCH: points are absorbed into a clustering-feature tree, then the leaf
//! subclusters are merged to `k` groups with Ward linkage on their centroids.

use log::warn;

use super::{check_k, ward::ward_labels, ClusterAssignment};
use crate::error::Result;
use crate::numerics::{squared_distance, Matrix};

/// Clustering feature: count, linear sum and sum of squared norms.
#[derive(Clone, Debug)]
struct Cf {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Cf {
    fn point(x: &[f64]) -> Self {
        Self {
            n: 1.0,
            ls: x.to_vec(),
            ss: x.iter().map(|v| v * v).sum(),
        }
    }

    fn add(&mut self, other: &Cf) {
        self.n += other.n;
        self.ss += other.ss;
        for (a, b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    /// Root-mean-square distance of members to the centroid.
    fn radius(&self) -> f64 {
        let c2: f64 = self.ls.iter().map(|v| (v / self.n).powi(2)).sum();
        (self.ss / self.n - c2).max(0.0).sqrt()
    }

    fn merged(&self, other: &Cf) -> Cf {
        let mut m = self.clone();
        m.add(other);
        m
    }
}

enum Node {
    Leaf(Vec<Cf>),
    Internal(Vec<(Cf, Node)>),
}

impl Node {
    fn len(&self) -> usize {
        match self {
            Node::Leaf(e) => e.len(),
            Node::Internal(e) => e.len(),
        }
    }

    fn summary(&self) -> Cf {
        let mut cfs: Box<dyn Iterator<Item = &Cf>> = match self {
            Node::Leaf(e) => Box::new(e.iter()),
            Node::Internal(e) => Box::new(e.iter().map(|(cf, _)| cf)),
        };
        let mut total = cfs.next().expect("non-empty node").clone();
        for cf in cfs {
            total.add(cf);
        }
        total
    }

    fn collect_leaves(&self, out: &mut Vec<Cf>) {
        match self {
            Node::Leaf(e) => out.extend(e.iter().cloned()),
            Node::Internal(e) => e.iter().for_each(|(_, child)| child.collect_leaves(out)),
        }
    }
}

fn closest<'a>(x: &[f64], cfs: impl Iterator<Item = &'a Cf>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cf) in cfs.enumerate() {
        let d = squared_distance(x, &cf.centroid());
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Splits entries around the two mutually farthest centroids.
fn split<T>(entries: Vec<T>, cf_of: impl Fn(&T) -> &Cf) -> (Vec<T>, Vec<T>) {
    let cents: Vec<Vec<f64>> = entries.iter().map(|e| cf_of(e).centroid()).collect();
    let (mut sa, mut sb, mut far) = (0, 1, -1.0);
    for i in 0..cents.len() {
        for j in (i + 1)..cents.len() {
            let d = squared_distance(&cents[i], &cents[j]);
            if d > far {
                (sa, sb, far) = (i, j, d);
            }
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, e) in entries.into_iter().enumerate() {
        let to_a = i == sa
            || (i != sb && squared_distance(&cents[i], &cents[sa]) <= squared_distance(&cents[i], &cents[sb]));
        if to_a {
            a.push(e);
        } else {
            b.push(e);
        }
    }
    (a, b)
}

/// Inserts `x`; returns a new sibling if this node overflowed.
fn insert(node: &mut Node, x: &Cf, threshold: f64, branching: usize) -> Option<Node> {
    match node {
        Node::Leaf(entries) => {
            match closest(&x.ls, entries.iter()) {
                Some(i) if entries[i].merged(x).radius() <= threshold => entries[i].add(x),
                _ => entries.push(x.clone()),
            }
            if entries.len() > branching {
                let (a, b) = split(std::mem::take(entries), |e| e);
                *entries = a;
                return Some(Node::Leaf(b));
            }
            None
        }
        Node::Internal(entries) => {
            let i = closest(&x.ls, entries.iter().map(|(cf, _)| cf)).expect("internal node has children");
            let sibling = insert(&mut entries[i].1, x, threshold, branching);
            match sibling {
                None => entries[i].0.add(x),
                Some(sib) => {
                    entries[i].0 = entries[i].1.summary();
                    entries.push((sib.summary(), sib));
                }
            }
            if entries.len() > branching {
                let (a, b) = split(std::mem::take(entries), |e| &e.0);
                *entries = a;
                return Some(Node::Internal(b));
            }
            None
        }
    }
}

/// Builds the CF tree and returns its leaf subclusters in tree order.
fn subclusters(points: &Matrix, threshold: f64, branching: usize) -> Vec<Cf> {
    let mut root = Node::Leaf(Vec::new());
    for i in 0..points.rows() {
        let x = Cf::point(points.row(i));
        if let Some(sibling) = insert(&mut root, &x, threshold, branching) {
            let old = std::mem::replace(&mut root, Node::Leaf(Vec::new()));
            root = Node::Internal(vec![(old.summary(), old), (sibling.summary(), sibling)]);
        }
    }
    debug_assert!(root.len() > 0 || points.rows() == 0);
    let mut out = Vec::new();
    root.collect_leaves(&mut out);
    out
}

/// If the tree yields fewer than `k` subclusters, each subcluster becomes a
/// cluster. Points are labelled by their nearest subcluster centroid.
pub fn birch(points: &Matrix, threshold: f64, branching: usize, k: usize) -> Result<ClusterAssignment> {
    let n = points.rows();
    check_k(n, k)?;
    let subs = subclusters(points, threshold, branching);
    let centroids = Matrix::from_rows(&subs.iter().map(Cf::centroid).collect::<Vec<_>>());
    let sub_labels: Vec<usize> = if subs.len() > k {
        let weights: Vec<f64> = subs.iter().map(|cf| cf.n).collect();
        ward_labels(&centroids, k, &weights)
    } else {
        if subs.len() < k {
            warn!("birch: only {} subclusters for k = {k}", subs.len());
        }
        (0..subs.len()).collect()
    };
    let raw: Vec<usize> = (0..n)
        .map(|i| {
            let s = closest(points.row(i), subs.iter()).expect("at least one subcluster");
            sub_labels[s]
        })
        .collect();
    Ok(ClusterAssignment::from_raw_labels(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use crate::clustering::test_support::blobs;

    #[test]
    fn huge_threshold_gives_one_cluster() {
        let (pts, _) = blobs(3, 10, 2, 5.0, 1);
        let c = birch(&pts, 1e6, 50, 3).unwrap();
        assert_eq!(c.num_clusters(), 1);
    }

    #[test]
    fn tiny_threshold_k_equals_n_is_identity() {
        let (pts, _) = blobs(2, 6, 2, 5.0, 2);
        let c = birch(&pts, 1e-9, 50, 12).unwrap();
        assert_eq!(c.labels(), (0..12).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn recovers_blobs_through_splits() {
        // Small branching factor forces several node splits.
        let (pts, truth) = blobs(3, 40, 3, 15.0, 8);
        let c = birch(&pts, 0.8, 4, 3).unwrap();
        assert!(adjusted_rand_index(c.labels(), &truth) > 0.99);
    }

    #[test]
    fn radius_matches_direct_computation() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        let mut cf = Cf::point(&pts[0]);
        cf.add(&Cf::point(&pts[1]));
        cf.add(&Cf::point(&pts[2]));
        let c = [1.0, 1.0];
        let direct = (pts.iter().map(|p| squared_distance(p, &c)).sum::<f64>() / 3.0).sqrt();
        assert!((cf.radius() - direct).abs() < 1e-12);
    }
}
