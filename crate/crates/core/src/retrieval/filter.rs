use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ContrastiveConfig, TrainingTriplet};
use crate::error::{Error, Result};
use crate::judge::{with_retries, CheckType, PairJudge, PairJudgeRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_positives: usize,
    pub min_negatives: usize,
    /// Attempts per judged item, including the first.
    pub attempts: usize,
    /// Maximum judge requests in flight.
    pub concurrency: usize,
}

impl FilterConfig {
    pub fn from_contrastive(cfg: &ContrastiveConfig) -> Self {
        Self {
            min_positives: cfg.pos_per_query,
            min_negatives: cfg.neg_per_query,
            ..Self::default()
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_positives: 1,
            min_negatives: 1,
            attempts: 3,
            concurrency: 4,
        }
    }
}

/// A judge call that failed on every attempt. The document was kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeFailure {
    pub query_id: String,
    pub doc_id: String,
    pub check_type: CheckType,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedTriplet {
    pub query_id: String,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub triplets: Vec<TrainingTriplet>,
    pub dropped_positives: usize,
    pub dropped_negatives: usize,
    pub removed: Vec<RemovedTriplet>,
    pub failures: Vec<JudgeFailure>,
}

struct Job {
    triplet: usize,
    doc: String,
    check: CheckType,
}

/// Drops positives the judge finds insufficient and negatives it finds
/// answerable, then removes triplets left below the configured minimums.
///
/// `texts` maps document ids to their text and must cover every document
/// referenced by the triplets.
pub fn filter_pairs_with_judge(
    triplets: &[TrainingTriplet],
    texts: &HashMap<String, String>,
    judge: &dyn PairJudge,
    cfg: &FilterConfig,
) -> Result<FilterOutcome> {
    let mut jobs = Vec::new();
    for (i, t) in triplets.iter().enumerate() {
        t.validate()?;
        let roles = t
            .positives
            .iter()
            .map(|d| (d, CheckType::Sufficiency))
            .chain(t.negatives.iter().map(|d| (d, CheckType::Answerability)));
        for (doc, check) in roles {
            if !texts.contains_key(doc) {
                return Err(Error::Validation(format!(
                    "no text for document {doc:?} of query {:?}",
                    t.query_id
                )));
            }
            jobs.push(Job {
                triplet: i,
                doc: doc.clone(),
                check,
            });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.max(1))
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let verdicts: Vec<Result<bool>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let request = PairJudgeRequest {
                    query_text: triplets[job.triplet].query_text.clone(),
                    doc_text: texts[&job.doc].clone(),
                    check_type: job.check,
                };
                with_retries(cfg.attempts, |_| judge.judge(&request)).map(|v| v.verdict)
            })
            .collect()
    });

    let mut outcome = FilterOutcome::default();
    let mut keep: Vec<TrainingTriplet> = triplets
        .iter()
        .map(|t| TrainingTriplet {
            positives: Vec::new(),
            negatives: Vec::new(),
            ..t.clone()
        })
        .collect();
    for (job, verdict) in jobs.into_iter().zip(verdicts) {
        let t = &triplets[job.triplet];
        let kept = match verdict {
            Ok(v) => match job.check {
                CheckType::Sufficiency => v,
                CheckType::Answerability => !v,
            },
            Err(e) => {
                outcome.failures.push(JudgeFailure {
                    query_id: t.query_id.clone(),
                    doc_id: job.doc.clone(),
                    check_type: job.check,
                    error: e.to_string(),
                });
                true
            }
        };
        let slot = &mut keep[job.triplet];
        match (job.check, kept) {
            (CheckType::Sufficiency, true) => slot.positives.push(job.doc),
            (CheckType::Answerability, true) => slot.negatives.push(job.doc),
            (CheckType::Sufficiency, false) => outcome.dropped_positives += 1,
            (CheckType::Answerability, false) => outcome.dropped_negatives += 1,
        }
    }
    for t in keep {
        if t.positives.len() < cfg.min_positives || t.negatives.len() < cfg.min_negatives {
            outcome.removed.push(RemovedTriplet {
                query_id: t.query_id,
                positives: t.positives.len(),
                negatives: t.negatives.len(),
            });
        } else {
            outcome.triplets.push(t);
        }
    }
    if !outcome.failures.is_empty() {
        log::warn!(
            "{} judge calls failed after {} attempts; affected documents were kept",
            outcome.failures.len(),
            cfg.attempts
        );
    }
    Ok(outcome)
}
