//! HDBSCAN over mutual-reachability distances with excess-of-mass cluster
//! selection.

mod ari;
mod labels;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ari::adjusted_rand_index;
pub use labels::{format_labels, load_labels, write_labels, LabeledPoint};
pub use tree::{condense_and_extract, condensed_clusters, ClusterAssignment};

use crate::error::{Error, Result};
use crate::io::EmbeddingMatrix;
use crate::reduce::{Distances, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// Neighbours, excluding the point itself, that define the core distance.
    pub min_samples: usize,
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: 1,
        }
    }
}

impl HdbscanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Parameter("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Parameter("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric pairwise dissimilarity over `len()` points.
pub trait Dissimilarity: Sync {
    fn len(&self) -> usize;
    fn distance(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rows of an embedding matrix under a metric.
pub struct MetricSpace<'a> {
    inner: Distances<'a>,
    n: usize,
}

impl<'a> MetricSpace<'a> {
    pub fn new(x: &'a EmbeddingMatrix, metric: Metric) -> Result<Self> {
        Ok(Self {
            inner: Distances::new(x, metric)?,
            n: x.len(),
        })
    }
}

impl Dissimilarity for MetricSpace<'_> {
    fn len(&self) -> usize {
        self.n
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.inner.between(i, j)
    }
}

/// A dense square distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Precomputed {
    n: usize,
    data: Vec<f64>,
}

impl Precomputed {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("non-zero self distance at {i}")));
            }
            for j in 0..i {
                let d = data[i * n + j];
                if !(d >= 0.0) || d != data[j * n + i] {
                    return Err(Error::Validation(format!("distance ({i}, {j}) is negative or asymmetric")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self::new(n, data)
    }
}

impl Dissimilarity for Precomputed {
    fn len(&self) -> usize {
        self.n
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Applies `f` to every distance of `inner`.
pub struct Transformed<D, F> {
    pub inner: D,
    pub f: F,
}

impl<D: Dissimilarity, F: Fn(f64) -> f64 + Sync> Dissimilarity for Transformed<D, F> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        (self.f)(self.inner.distance(i, j))
    }
}

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances<D: Dissimilarity + ?Sized>(d: &D, min_samples: usize) -> Result<Vec<f64>> {
    let n = d.len();
    if min_samples == 0 || n <= min_samples {
        return Err(Error::Parameter(format!(
            "{n} points are too few for min_samples = {min_samples}"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.distance(i, j)).collect();
            let (_, kth, _) = row.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Minimum spanning tree under max(core_a, core_b, d(a, b)) by Prim's
/// algorithm on the implicit complete graph. Edges come out in the order
/// they join the tree, which starts at point 0.
pub fn mutual_reachability_mst<D: Dissimilarity + ?Sized>(d: &D, core: &[f64]) -> Result<Vec<MstEdge>> {
    let n = d.len();
    if core.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: core.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let c = current;
        best.par_iter_mut()
            .zip(in_tree.par_iter())
            .enumerate()
            .with_min_len(256)
            .for_each(|(j, (slot, &done))| {
                if done {
                    return;
                }
                let w = d.distance(c, j).max(core[c]).max(core[j]);
                if w < slot.0 {
                    *slot = (w, c);
                }
            });
        let (next, &(weight, from)) = best
            .iter()
            .enumerate()
            .filter(|(j, _)| !in_tree[*j])
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .expect("points remain outside the tree");
        in_tree[next] = true;
        edges.push(MstEdge { a: from, b: next, weight });
        current = next;
    }
    Ok(edges)
}

/// Core distances, spanning tree and cluster extraction in one call.
pub fn hdbscan<D: Dissimilarity + ?Sized>(d: &D, cfg: &HdbscanConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    let core = core_distances(d, cfg.min_samples)?;
    let mst = mutual_reachability_mst(d, &core)?;
    condense_and_extract(d.len(), &mst, cfg)
}
