use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::FuzzyGraph;

const GRAD_CLIP: f64 = 4.0;
const REPULSION: f64 = 1.0;
const INITIAL_ALPHA: f64 = 1.0;
const PARALLEL_CHUNK: usize = 4096;

trait Coords {
    fn get(&self, i: usize, d: usize) -> f64;
    fn add(&mut self, i: usize, d: usize, v: f64);
}

struct Owned<'a> {
    data: &'a mut [f64],
    dim: usize,
}

impl Coords for Owned<'_> {
    fn get(&self, i: usize, d: usize) -> f64 {
        self.data[i * self.dim + d]
    }

    fn add(&mut self, i: usize, d: usize, v: f64) {
        self.data[i * self.dim + d] += v;
    }
}

/// Lock-free shared coordinates; concurrent updates may be lost.
struct Shared<'a> {
    data: &'a [AtomicU64],
    dim: usize,
}

impl Coords for Shared<'_> {
    fn get(&self, i: usize, d: usize) -> f64 {
        f64::from_bits(self.data[i * self.dim + d].load(Ordering::Relaxed))
    }

    fn add(&mut self, i: usize, d: usize, v: f64) {
        let cell = &self.data[i * self.dim + d];
        let cur = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((cur + v).to_bits(), Ordering::Relaxed);
    }
}

#[derive(Debug, Clone)]
struct Edge {
    head: usize,
    tail: usize,
    epochs_per_sample: f64,
    next_sample: f64,
    epochs_per_negative: f64,
    next_negative: f64,
}

pub(crate) struct Schedule {
    edges: Vec<Edge>,
}

impl Schedule {
    /// Both directions of every edge, each sampled in proportion to its
    /// weight. Edges too weak to be sampled once in `n_epochs` are dropped.
    pub(crate) fn new(g: &FuzzyGraph, n_epochs: usize, negative_sample_rate: usize) -> Self {
        let undirected = g.edges();
        let max_w = undirected.iter().map(|e| e.2).fold(0.0, f64::max);
        let mut edges = Vec::with_capacity(undirected.len() * 2);
        for i in 0..g.len() {
            for (j, w) in g.row(i) {
                if w < max_w / n_epochs as f64 {
                    continue;
                }
                let eps = max_w / w;
                let eps_neg = if negative_sample_rate > 0 {
                    eps / negative_sample_rate as f64
                } else {
                    f64::INFINITY
                };
                edges.push(Edge {
                    head: i,
                    tail: j,
                    epochs_per_sample: eps,
                    next_sample: eps,
                    epochs_per_negative: eps_neg,
                    next_negative: eps_neg,
                });
            }
        }
        Self { edges }
    }

    pub(crate) fn len(&self) -> usize {
        self.edges.len()
    }
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

struct Step {
    epoch: f64,
    alpha: f64,
    a: f64,
    b: f64,
    dim: usize,
    n: usize,
}

fn process<C: Coords, R: Rng>(c: &mut C, e: &mut Edge, s: &Step, rng: &mut R) {
    if e.next_sample > s.epoch {
        return;
    }
    let (j, k) = (e.head, e.tail);
    let dist2: f64 = (0..s.dim).map(|d| (c.get(j, d) - c.get(k, d)).powi(2)).sum();
    let coeff = if dist2 > 0.0 {
        -2.0 * s.a * s.b * dist2.powf(s.b - 1.0) / (s.a * dist2.powf(s.b) + 1.0)
    } else {
        0.0
    };
    for d in 0..s.dim {
        let g = clip(coeff * (c.get(j, d) - c.get(k, d)));
        c.add(j, d, g * s.alpha);
        c.add(k, d, -g * s.alpha);
    }
    e.next_sample += e.epochs_per_sample;

    let n_neg = ((s.epoch - e.next_negative) / e.epochs_per_negative).max(0.0) as usize;
    for _ in 0..n_neg {
        let k = rng.random_range(0..s.n);
        let dist2: f64 = (0..s.dim).map(|d| (c.get(j, d) - c.get(k, d)).powi(2)).sum();
        let coeff = if dist2 > 0.0 {
            2.0 * REPULSION * s.b / ((0.001 + dist2) * (s.a * dist2.powf(s.b) + 1.0))
        } else if j == k {
            continue;
        } else {
            0.0
        };
        for d in 0..s.dim {
            let g = if coeff > 0.0 {
                clip(coeff * (c.get(j, d) - c.get(k, d)))
            } else {
                GRAD_CLIP
            };
            c.add(j, d, g * s.alpha);
        }
    }
    e.next_negative += n_neg as f64 * e.epochs_per_negative;
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn optimize_serial(
    coords: &mut [f64],
    dim: usize,
    schedule: &mut Schedule,
    n_epochs: usize,
    a: f64,
    b: f64,
    rng: &mut ChaCha8Rng,
) {
    let n = coords.len() / dim;
    let mut c = Owned { data: coords, dim };
    for epoch in 0..n_epochs {
        let step = Step {
            epoch: epoch as f64,
            alpha: INITIAL_ALPHA * (1.0 - epoch as f64 / n_epochs as f64),
            a,
            b,
            dim,
            n,
        };
        for e in &mut schedule.edges {
            process(&mut c, e, &step, rng);
        }
    }
}

/// Asynchronous updates over edge chunks. Results depend on thread timing.
pub(crate) fn optimize_parallel(
    coords: &mut [f64],
    dim: usize,
    schedule: &mut Schedule,
    n_epochs: usize,
    a: f64,
    b: f64,
    seed: u64,
) {
    let n = coords.len() / dim;
    let shared: Vec<AtomicU64> = coords.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    for epoch in 0..n_epochs {
        let step = Step {
            epoch: epoch as f64,
            alpha: INITIAL_ALPHA * (1.0 - epoch as f64 / n_epochs as f64),
            a,
            b,
            dim,
            n,
        };
        schedule
            .edges
            .par_chunks_mut(PARALLEL_CHUNK)
            .enumerate()
            .for_each(|(chunk, edges)| {
                let stream = ((epoch as u64) << 32) | chunk as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                let mut c = Shared { data: &shared, dim };
                for e in edges {
                    process(&mut c, e, &step, &mut rng);
                }
            });
    }
    for (v, cell) in coords.iter_mut().zip(&shared) {
        *v = f64::from_bits(cell.load(Ordering::Relaxed));
    }
}
