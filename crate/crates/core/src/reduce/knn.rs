use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// 1 − cosine similarity.
    #[default]
    Cosine,
    Euclidean,
}

/// Row-wise distance evaluator with cached norms.
pub(crate) struct Distances<'a> {
    x: &'a EmbeddingMatrix,
    metric: Metric,
    norms: Vec<f64>,
}

impl<'a> Distances<'a> {
    pub(crate) fn new(x: &'a EmbeddingMatrix, metric: Metric) -> Result<Self> {
        let norms = match metric {
            Metric::Cosine => crate::retrieval::row_norms(x)?,
            Metric::Euclidean => Vec::new(),
        };
        Ok(Self { x, metric, norms })
    }

    pub(crate) fn between(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.x.row(i), self.x.row(j));
        match self.metric {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&p, &q)| {
                    let d = p as f64 - q as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let c = crate::retrieval::cosine_with_norms(a, self.norms[i], b, self.norms[j]);
                (1.0 - c).max(0.0)
            }
        }
    }
}

/// Exact k-nearest-neighbour lists, self excluded. Row `i` occupies
/// `indices[i*k..(i+1)*k]`, sorted by distance then index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.indices.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn neighbor_distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }
}

pub fn knn_graph(x: &EmbeddingMatrix, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = x.len();
    if k == 0 || n <= k {
        return Err(Error::Parameter(format!(
            "{n} points are too few for {k} neighbours"
        )));
    }
    let dist = Distances::new(x, metric)?;
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist.between(i, j), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            row.select_nth_unstable_by(k - 1, cmp);
            row.truncate(k);
            row.sort_by(cmp);
            row
        })
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for row in rows {
        for (d, j) in row {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(KnnGraph {
        k,
        indices,
        distances,
    })
}
