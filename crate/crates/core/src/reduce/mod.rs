//! UMAP dimensionality reduction with exact neighbour search.
//!
//! Pipeline: [`knn_graph`] → [`fuzzy_simplicial_set`] → [`optimize_embedding`].
//! [`umap`] runs all three.

mod curve;
mod fuzzy;
mod init;
mod knn;
mod sgd;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use curve::find_ab_params;
pub use fuzzy::{fuzzy_simplicial_set, fuzzy_union, smooth_knn, FuzzyGraph, SmoothKnn};
pub use init::{InitKind, DENSE_EIGEN_LIMIT};
pub use knn::{knn_graph, KnnGraph, Metric};
pub(crate) use knn::Distances;

use crate::error::{Error, Result};
use crate::io::EmbeddingMatrix;

pub const SPREAD: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SgdMode {
    /// Single-threaded, bit-reproducible for a given seed.
    #[default]
    Serial,
    /// Lock-free multi-threaded updates; not reproducible.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub out_dim: usize,
    pub min_dist: f64,
    /// Defaults to 500 below 10,000 points and 200 otherwise.
    pub n_epochs: Option<usize>,
    pub negative_sample_rate: usize,
    pub seed: u64,
    pub metric: Metric,
    pub mode: SgdMode,
}

impl Default for UmapConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            out_dim: 32,
            min_dist: 0.0,
            n_epochs: None,
            negative_sample_rate: 5,
            seed: 42,
            metric: Metric::Cosine,
            mode: SgdMode::Serial,
        }
    }
}

impl UmapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::Parameter("n_neighbors must be at least 2".into()));
        }
        if self.out_dim < 2 {
            return Err(Error::Parameter("out_dim must be at least 2".into()));
        }
        if !(self.min_dist >= 0.0 && self.min_dist.is_finite()) {
            return Err(Error::Parameter(format!("min_dist must be non-negative, got {}", self.min_dist)));
        }
        if self.n_epochs == Some(0) {
            return Err(Error::Parameter("n_epochs must be positive".into()));
        }
        Ok(())
    }

    pub fn epochs_for(&self, n: usize) -> usize {
        self.n_epochs.unwrap_or(if n < 10_000 { 500 } else { 200 })
    }
}

/// A low-dimensional layout, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub dim: usize,
    pub data: Vec<f32>,
    pub init: InitKind,
    pub a: f64,
    pub b: f64,
}

pub fn optimize_embedding(g: &FuzzyGraph, cfg: &UmapConfig) -> Result<Layout> {
    cfg.validate()?;
    let n = g.len();
    let dim = cfg.out_dim;
    let n_epochs = cfg.epochs_for(n);
    let (a, b) = find_ab_params(SPREAD, cfg.min_dist);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut coords, init) = init::initial_layout(g, dim, &mut rng);
    let mut schedule = sgd::Schedule::new(g, n_epochs, cfg.negative_sample_rate);
    log::debug!("umap: {n} points, {} directed edges, {n_epochs} epochs, init {init:?}", schedule.len());
    match cfg.mode {
        SgdMode::Serial => sgd::optimize_serial(&mut coords, dim, &mut schedule, n_epochs, a, b, &mut rng),
        SgdMode::Parallel => sgd::optimize_parallel(&mut coords, dim, &mut schedule, n_epochs, a, b, cfg.seed),
    }
    let data: Vec<f32> = coords.iter().map(|&v| v as f32).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("layout diverged to non-finite values".into()));
    }
    Ok(Layout { dim, data, init, a, b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UmapResult {
    pub embedding: EmbeddingMatrix,
    pub layout_init: InitKind,
    pub sigma_fallbacks: usize,
    pub a: f64,
    pub b: f64,
}

/// Reduces `x` to `cfg.out_dim` columns; row ids are preserved.
pub fn umap(x: &EmbeddingMatrix, cfg: &UmapConfig) -> Result<UmapResult> {
    cfg.validate()?;
    if x.len() <= cfg.n_neighbors {
        return Err(Error::Parameter(format!(
            "n_neighbors {} requires more than {} points",
            cfg.n_neighbors,
            x.len()
        )));
    }
    let knn = knn_graph(x, cfg.n_neighbors, cfg.metric)?;
    let g = fuzzy_simplicial_set(&knn);
    let layout = optimize_embedding(&g, cfg)?;
    Ok(UmapResult {
        embedding: EmbeddingMatrix::new(x.ids().to_vec(), layout.dim, layout.data)?,
        layout_init: layout.init,
        sigma_fallbacks: g.sigma_fallbacks,
        a: layout.a,
        b: layout.b,
    })
}

/// Rank-based neighbourhood preservation in [0, 1]: low-dimensional
/// neighbours that are not high-dimensional neighbours are penalised by
/// their excess rank in the original space. Requires `k < n / 2`.
pub fn trustworthiness(high: &EmbeddingMatrix, low: &EmbeddingMatrix, k: usize, metric: Metric) -> Result<f64> {
    let n = high.len();
    if low.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: low.len(),
        });
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::Parameter(format!("k = {k} must satisfy 0 < k < n/2 for n = {n}")));
    }
    let dh = knn::Distances::new(high, metric)?;
    let dl = knn::Distances::new(low, Metric::Euclidean)?;
    let ordered = |d: &knn::Distances<'_>, i: usize| -> Vec<usize> {
        let mut js: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d.between(i, j), j)).collect();
        js.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        js.into_iter().map(|(_, j)| j).collect()
    };
    let penalty: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rank = vec![0usize; n];
            for (r, j) in ordered(&dh, i).into_iter().enumerate() {
                rank[j] = r + 1;
            }
            ordered(&dl, i)
                .into_iter()
                .take(k)
                .map(|j| rank[j].saturating_sub(k) as f64)
                .sum::<f64>()
        })
        .sum();
    let (n, k) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n_per: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f32>> = (0..2 * n_per)
            .map(|i| {
                let c = if i < n_per { 0.0 } else { 20.0 };
                (0..5).map(|_| c + rng.random_range(-1.0..1.0f32)).collect()
            })
            .collect();
        EmbeddingMatrix::from_rows((0..2 * n_per).map(|i| i.to_string()).collect(), &rows).unwrap()
    }

    fn small_cfg() -> UmapConfig {
        UmapConfig {
            out_dim: 2,
            n_epochs: Some(50),
            metric: Metric::Euclidean,
            ..UmapConfig::default()
        }
    }

    #[test]
    fn serial_is_bit_deterministic() {
        let x = blobs(40, 1);
        let a = umap(&x, &small_cfg()).unwrap();
        let b = umap(&x, &small_cfg()).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.embedding.dim(), 2);
        assert_eq!(a.embedding.ids(), x.ids());
    }

    #[test]
    fn parallel_mode_produces_finite_layout() {
        let cfg = UmapConfig {
            mode: SgdMode::Parallel,
            ..small_cfg()
        };
        let r = umap(&blobs(40, 2), &cfg).unwrap();
        assert!(r.embedding.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn config_validation() {
        let x = blobs(5, 1);
        assert!(umap(&x, &small_cfg()).is_err());
        let bad = UmapConfig {
            out_dim: 1,
            ..UmapConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(UmapConfig::default().epochs_for(9_999), 500);
        assert_eq!(UmapConfig::default().epochs_for(10_000), 200);
    }

    #[test]
    fn identity_embedding_is_fully_trustworthy() {
        let x = blobs(20, 3);
        assert!((trustworthiness(&x, &x, 5, Metric::Euclidean).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trustworthiness_matches_brute_force_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let hi: Vec<Vec<f32>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f32>()).collect()).collect();
        let lo: Vec<Vec<f32>> = (0..n).map(|_| (0..2).map(|_| rng.random::<f32>()).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let h = EmbeddingMatrix::from_rows(ids.clone(), &hi).unwrap();
        let l = EmbeddingMatrix::from_rows(ids, &lo).unwrap();
        let k = 5;
        let dist = |a: &[f32], b: &[f32]| -> f64 {
            a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
        };
        let mut sum = 0.0;
        for i in 0..n {
            let mut by_hi: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            by_hi.sort_by(|&a, &b| dist(&hi[i], &hi[a]).total_cmp(&dist(&hi[i], &hi[b])));
            let mut by_lo: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            by_lo.sort_by(|&a, &b| dist(&lo[i], &lo[a]).total_cmp(&dist(&lo[i], &lo[b])));
            for &j in &by_lo[..k] {
                let r = by_hi.iter().position(|&x| x == j).unwrap() + 1;
                if r > k {
                    sum += (r - k) as f64;
                }
            }
        }
        let expected = 1.0 - 2.0 / ((n * k) as f64 * (2 * n - 3 * k - 1) as f64) * sum;
        let got = trustworthiness(&h, &l, k, Metric::Euclidean).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }
}
