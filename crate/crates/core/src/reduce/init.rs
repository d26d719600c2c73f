use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FuzzyGraph;

/// Largest graph handled by a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
const SUBSPACE_ITERATIONS: usize = 300;
const SUBSPACE_OVERSAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Spectral,
    Random,
}

/// Initial layout, each coordinate rescaled to [0, 10].
pub(crate) fn initial_layout(g: &FuzzyGraph, dim: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, InitKind) {
    let n = g.len();
    let connected = g.components().iter().all(|&c| c == 0);
    let (mut coords, kind) = match (connected && n > dim + 1)
        .then(|| spectral_layout(g, dim, rng))
        .flatten()
    {
        Some(mut coords) => {
            let scale = 10.0 / coords.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let noise = Normal::new(0.0, 1e-4).expect("valid normal");
            for v in &mut coords {
                *v = *v * scale + noise.sample(rng);
            }
            (coords, InitKind::Spectral)
        }
        None => {
            if !connected {
                log::warn!("fuzzy graph is disconnected; using random initialisation");
            }
            let coords = (0..n * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            (coords, InitKind::Random)
        }
    };
    rescale_columns(&mut coords, dim);
    (coords, kind)
}

fn rescale_columns(coords: &mut [f64], dim: usize) {
    for d in 0..dim {
        let col = coords.iter().skip(d).step_by(dim);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        for v in coords.iter_mut().skip(d).step_by(dim) {
            *v = if range > 0.0 { 10.0 * (*v - lo) / range } else { 0.0 };
        }
    }
}

/// Eigenvectors 1..=dim of the symmetric normalised Laplacian, row-major.
pub(crate) fn spectral_layout(g: &FuzzyGraph, dim: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if g.len() <= DENSE_EIGEN_LIMIT {
        Some(dense_spectral(g, dim))
    } else {
        subspace_spectral(g, dim, rng)
    }
}

fn inv_sqrt_degrees(g: &FuzzyGraph) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            let d = g.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

fn take_columns(vectors: &DMatrix<f64>, order: &[usize], dim: usize) -> Vec<f64> {
    let n = vectors.nrows();
    let mut out = vec![0.0; n * dim];
    for (c, &col) in order.iter().skip(1).take(dim).enumerate() {
        for r in 0..n {
            out[r * dim + c] = vectors[(r, col)];
        }
    }
    out
}

pub(crate) fn dense_spectral(g: &FuzzyGraph, dim: usize) -> Vec<f64> {
    let n = g.len();
    let s = inv_sqrt_degrees(g);
    let mut lap = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for (j, w) in g.row(i) {
            lap[(i, j)] -= w * s[i] * s[j];
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    take_columns(&eig.eigenvectors, &order, dim)
}

/// Block power iteration on `I + D^-1/2 W D^-1/2`, whose leading eigenvectors
/// are the trailing ones of the Laplacian, followed by a Rayleigh–Ritz step.
pub(crate) fn subspace_spectral(g: &FuzzyGraph, dim: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let n = g.len();
    let b = (dim + 1 + SUBSPACE_OVERSAMPLE).min(n);
    let s = inv_sqrt_degrees(g);
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = x.clone();
        for i in 0..n {
            for (j, w) in g.row(i) {
                let c = w * s[i] * s[j];
                for k in 0..x.ncols() {
                    y[(i, k)] += c * x[(j, k)];
                }
            }
        }
        y
    };
    let mut x = DMatrix::<f64>::from_fn(n, b, |_, _| StandardNormal.sample(rng));
    x = x.qr().q();
    let mut previous = vec![0.0; b];
    for it in 0..SUBSPACE_ITERATIONS {
        let y = apply(&x);
        if it % 10 == 9 {
            let rq: Vec<f64> = (0..b).map(|k| x.column(k).dot(&y.column(k))).collect();
            let delta = rq.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            previous = rq;
            if delta < 1e-9 {
                x = y.qr().q();
                break;
            }
        }
        x = y.qr().q();
    }
    let ax = apply(&x);
    let h = x.transpose() * &ax;
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let ritz = &x * &eig.eigenvectors;
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]).then(p.cmp(&q)));
    Some(take_columns(&ritz, &order, dim))
}
