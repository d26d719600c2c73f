//! Seeded synthetic data shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use finkit_core::io::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:05}")).collect()
}

pub fn matrix(rows: &[Vec<f32>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(ids(rows.len()), rows).unwrap()
}

/// Isotropic Gaussian blobs; returns the points and their blob index.
pub fn gaussian_blobs(centers: &[Vec<f32>], per_blob: usize, sd: f32, seed: u64) -> (Vec<Vec<f32>>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, sd).unwrap();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(center.iter().map(|&m| m + normal.sample(&mut rng)).collect());
            labels.push(c as i64);
        }
    }
    (points, labels)
}

/// Uniform points in the axis-aligned box `[lo, hi]^dim`.
pub fn uniform_box(n: usize, dim: usize, lo: f32, hi: f32, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

/// Points on a swiss roll, a 2-d sheet rolled up in 3-d.
pub fn swiss_roll(n: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = 1.5 * std::f32::consts::PI * (1.0 + 2.0 * rng.random::<f32>());
            let h = 21.0 * rng.random::<f32>();
            vec![t * t.cos(), h, t * t.sin()]
        })
        .collect()
}

pub fn euclid(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/titles500")
}

/// Copies the bundled fixture into a fresh directory so runs can write
/// their output beside the configuration.
pub fn fixture_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
        }
    }
    dir
}

/// Two 100-point unit Gaussians ten apart in 32 dimensions plus ten uniform
/// noise points in the surrounding box; truth labels 0, 1 and −1.
pub fn blobs_with_noise(seed: u64) -> (EmbeddingMatrix, Vec<i64>) {
    let dim = 32;
    let mut far = vec![0.0f32; dim];
    far[0] = 10.0;
    let (mut points, mut labels) = gaussian_blobs(&[vec![0.0; dim], far], 100, 1.0, seed);
    points.extend(uniform_box(10, dim, -10.0, 20.0, seed + 1));
    labels.extend([-1; 10]);
    (matrix(&points), labels)
}

/// Distance between the two blob centroids and the mean within-blob
/// pairwise distance.
pub fn blob_gap(x: &EmbeddingMatrix, labels: &[i64]) -> (f64, f64) {
    let rows: Vec<&[f32]> = x.rows().collect();
    let centroid = |c: i64| -> Vec<f32> {
        let members: Vec<&[f32]> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| *r).collect();
        (0..x.dim()).map(|d| members.iter().map(|m| m[d]).sum::<f32>() / members.len() as f32).collect()
    };
    let gap = euclid(&centroid(0), &centroid(1));
    let mut within = 0.0;
    let mut pairs = 0usize;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if labels[i] == labels[j] {
                within += euclid(rows[i], rows[j]);
                pairs += 1;
            }
        }
    }
    (gap, within / pairs as f64)
}
