use std::collections::HashMap;

use super::KnnGraph;

const SEARCH_ITERATIONS: usize = 64;
const SEARCH_TOLERANCE: f64 = 1e-5;

/// Local connectivity parameters of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothKnn {
    pub rho: f64,
    pub sigma: f64,
    /// The binary search did not converge and `sigma` is the mean distance.
    pub fallback: bool,
}

/// Solves Σ_j exp(−max(0, d_j − ρ)/σ) = log2(k) for σ, where ρ is the
/// smallest positive neighbour distance (0 if all are zero).
pub fn smooth_knn(distances: &[f64]) -> SmoothKnn {
    let k = distances.len();
    let target = (k as f64).log2();
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let mass = |sigma: f64| -> f64 {
        distances
            .iter()
            .map(|&d| (-(d - rho).max(0.0) / sigma).exp())
            .sum()
    };
    let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..SEARCH_ITERATIONS {
        let m = mass(mid);
        if (m - target).abs() < SEARCH_TOLERANCE {
            return SmoothKnn {
                rho,
                sigma: mid,
                fallback: false,
            };
        }
        if m > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let mean = distances.iter().sum::<f64>() / k.max(1) as f64;
    SmoothKnn {
        rho,
        sigma: if mean > 0.0 { mean } else { 1.0 },
        fallback: true,
    }
}

/// Fuzzy union of two membership strengths.
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric weighted graph in compressed sparse row form. Each row lists
/// its neighbours in ascending order; weights lie in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    /// Points whose σ search fell back to the mean distance.
    pub sigma_fallbacks: usize,
}

impl FuzzyGraph {
    /// Builds the graph from undirected edges `(i, j, w)` with `i < j`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, w) in row {
                cols.push(j);
                weights.push(w);
            }
            offsets.push(cols.len());
        }
        Self {
            n,
            offsets,
            cols,
            weights,
            sigma_fallbacks: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.weights[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).map(|(_, w)| w).sum()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| i < j).map(move |(j, w)| (i, j, w)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    /// Component index per point.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for (j, _) in self.row(i) {
                    if comp[j] == usize::MAX {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Directed memberships from the kNN lists, symmetrised by fuzzy union.
pub fn fuzzy_simplicial_set(knn: &KnnGraph) -> FuzzyGraph {
    let n = knn.len();
    let mut pairs: HashMap<(usize, usize), (f64, f64)> = HashMap::with_capacity(n * knn.k);
    let mut fallbacks = 0;
    for i in 0..n {
        let dists = knn.neighbor_distances(i);
        let s = smooth_knn(dists);
        if s.fallback {
            fallbacks += 1;
        }
        for (&j, &d) in knn.neighbors(i).iter().zip(dists) {
            let w = (-(d - s.rho).max(0.0) / s.sigma).exp();
            if w <= 0.0 || i == j {
                continue;
            }
            let entry = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = w;
            } else {
                entry.1 = w;
            }
        }
    }
    if fallbacks > 0 {
        log::warn!("sigma search did not converge for {fallbacks} points; used mean neighbour distance");
    }
    let mut edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, fuzzy_union(a, b)))
        .collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut g = FuzzyGraph::from_edges(n, &edges);
    g.sigma_fallbacks = fallbacks;
    g
}
