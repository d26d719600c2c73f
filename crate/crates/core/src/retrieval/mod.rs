//! Brute-force cosine retrieval, ranking metrics, hard-negative mining,
//! contrastive training pairs and the InfoNCE reference loss.

mod filter;
mod loss;
mod metrics;
mod mining;
mod pairs;

use rayon::prelude::*;

pub use filter::{filter_pairs_with_judge, FilterConfig, FilterOutcome, JudgeFailure, RemovedTriplet};
pub use loss::{infonce_from_scores, infonce_loss, InfoNce, DEFAULT_TEMPERATURE};
pub use metrics::{ndcg_at_k, recall_at_k, MetricReport};
pub use mining::{mine_all, mine_hard_negatives};
pub use pairs::{
    build_training_pairs, candidate_triplets, sample_training_pairs, ContrastiveConfig,
    PairReport, SkipReason, SkippedQuery, TrainingTriplet,
};

use crate::error::{Error, Result};
use crate::io::{rank_order, EmbeddingMatrix, RetrievalRun, ScoredDoc};

/// Euclidean norm accumulated in f64.
pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Cosine similarity given precomputed norms, clamped to [-1, 1].
pub fn cosine_with_norms(a: &[f32], na: f64, b: &[f32], nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("<vector>".into()));
    }
    Ok(cosine_with_norms(a, na, b, nb))
}

/// Row norms, failing on the first zero-norm row.
pub(crate) fn row_norms(m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    m.rows()
        .zip(m.ids())
        .map(|(row, id)| {
            let n = norm(row);
            if n == 0.0 {
                Err(Error::ZeroNorm(id.clone()))
            } else {
                Ok(n)
            }
        })
        .collect()
}

fn check_dims(queries: &EmbeddingMatrix, docs: &EmbeddingMatrix) -> Result<()> {
    if queries.dim() != docs.dim() {
        return Err(Error::DimensionMismatch {
            expected: docs.dim(),
            actual: queries.dim(),
        });
    }
    Ok(())
}

/// Scores of one query against every document, in document order.
pub(crate) fn score_row(q: &[f32], qn: f64, docs: &EmbeddingMatrix, dn: &[f64]) -> Vec<ScoredDoc> {
    docs.rows()
        .zip(docs.ids())
        .zip(dn)
        .map(|((d, id), &n)| ScoredDoc::new(id.clone(), cosine_with_norms(q, qn, d, n)))
        .collect()
}

/// Keeps the `k` best entries in rank order.
pub(crate) fn top_k(mut scored: Vec<ScoredDoc>, k: usize) -> Vec<ScoredDoc> {
    if k < scored.len() {
        scored.select_nth_unstable_by(k, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    scored
}

/// Top-`k` documents per query by cosine similarity, ties broken by
/// ascending doc id. Queries are scored in parallel; the result does not
/// depend on the thread count.
pub fn cosine_topk(queries: &EmbeddingMatrix, docs: &EmbeddingMatrix, k: usize) -> Result<RetrievalRun> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    check_dims(queries, docs)?;
    let qn = row_norms(queries)?;
    let dn = row_norms(docs)?;
    let ranked: Vec<Vec<ScoredDoc>> = (0..queries.len())
        .into_par_iter()
        .map(|i| top_k(score_row(queries.row(i), qn[i], docs, &dn), k))
        .collect();
    let mut run = RetrievalRun::new();
    for (id, list) in queries.ids().iter().zip(ranked) {
        run.insert_ranked(id.clone(), list)?;
    }
    Ok(run)
}

/// Full similarity matrix, `queries.len()` rows of `docs.len()` scores.
pub fn score_all(queries: &EmbeddingMatrix, docs: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>> {
    check_dims(queries, docs)?;
    let qn = row_norms(queries)?;
    let dn = row_norms(docs)?;
    Ok((0..queries.len())
        .into_par_iter()
        .map(|i| {
            docs.rows()
                .zip(&dn)
                .map(|(d, &n)| cosine_with_norms(queries.row(i), qn[i], d, n))
                .collect()
        })
        .collect())
}
