use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{QRels, ScoredDoc};

/// One contrastive training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub query_id: String,
    pub query_text: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl TrainingTriplet {
    pub fn validate(&self) -> Result<()> {
        if self.query_id.is_empty() {
            return Err(Error::Validation("triplet with empty query id".into()));
        }
        let pos: HashSet<&str> = self.positives.iter().map(String::as_str).collect();
        let neg: HashSet<&str> = self.negatives.iter().map(String::as_str).collect();
        if pos.len() != self.positives.len() || neg.len() != self.negatives.len() {
            return Err(Error::Validation(format!(
                "duplicate document in triplet {:?}",
                self.query_id
            )));
        }
        if let Some(d) = pos.intersection(&neg).next() {
            return Err(Error::Validation(format!(
                "document {d:?} is both positive and negative for {:?}",
                self.query_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub pos_per_query: usize,
    pub neg_per_query: usize,
    pub max_mined_negatives: usize,
}

impl ContrastiveConfig {
    /// 2 positives to 8 negatives out of up to 50 mined.
    pub fn base() -> Self {
        Self {
            temperature: super::DEFAULT_TEMPERATURE,
            pos_per_query: 2,
            neg_per_query: 8,
            max_mined_negatives: 50,
        }
    }

    /// The larger model's preset: 15 negatives per query.
    pub fn large() -> Self {
        Self {
            neg_per_query: 15,
            ..Self::base()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Parameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.pos_per_query == 0 || self.neg_per_query == 0 {
            return Err(Error::Parameter(
                "pos_per_query and neg_per_query must be at least 1".into(),
            ));
        }
        if self.max_mined_negatives < self.neg_per_query {
            return Err(Error::Parameter(format!(
                "max_mined_negatives {} is below neg_per_query {}",
                self.max_mined_negatives, self.neg_per_query
            )));
        }
        Ok(())
    }
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self::base()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    TooFewPositives { available: usize, required: usize },
    TooFewNegatives { available: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedQuery {
    pub query_id: String,
    #[serde(flatten)]
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    pub emitted: usize,
    pub skipped: Vec<SkippedQuery>,
}

/// Unsampled triplets: every relevant document as a positive and the mined
/// negatives (positives removed, capped at `max_mined_negatives`).
/// Queries come out in id order.
pub fn candidate_triplets(
    qrels: &QRels,
    mined: &BTreeMap<String, Vec<ScoredDoc>>,
    query_texts: &BTreeMap<String, String>,
    cfg: &ContrastiveConfig,
) -> Vec<TrainingTriplet> {
    qrels
        .queries()
        .map(|q| {
            let positives: Vec<String> = qrels.relevant(q).into_iter().map(str::to_owned).collect();
            let excluded: HashSet<&str> = positives.iter().map(String::as_str).collect();
            let negatives = mined
                .get(q)
                .map(|list| {
                    list.iter()
                        .map(|d| d.doc_id.clone())
                        .filter(|d| !excluded.contains(d.as_str()))
                        .take(cfg.max_mined_negatives)
                        .collect()
                })
                .unwrap_or_default();
            TrainingTriplet {
                query_id: q.to_string(),
                query_text: query_texts.get(q).cloned().unwrap_or_default(),
                positives,
                negatives,
            }
        })
        .collect()
}

fn sample(rng: &mut ChaCha8Rng, pool: &[String], amount: usize) -> Vec<String> {
    let mut picked = index::sample(rng, pool.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

/// Draws exactly `pos_per_query` positives and `neg_per_query` negatives per
/// triplet without replacement. Triplets with too small a pool are skipped
/// and reported. Sampled items keep their original relative order.
pub fn sample_training_pairs(
    candidates: &[TrainingTriplet],
    cfg: &ContrastiveConfig,
    seed: u64,
) -> Result<(Vec<TrainingTriplet>, PairReport)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut report = PairReport::default();
    for t in candidates {
        t.validate()?;
        let reason = if t.positives.len() < cfg.pos_per_query {
            Some(SkipReason::TooFewPositives {
                available: t.positives.len(),
                required: cfg.pos_per_query,
            })
        } else if t.negatives.len() < cfg.neg_per_query {
            Some(SkipReason::TooFewNegatives {
                available: t.negatives.len(),
                required: cfg.neg_per_query,
            })
        } else {
            None
        };
        if let Some(reason) = reason {
            report.skipped.push(SkippedQuery {
                query_id: t.query_id.clone(),
                reason,
            });
            continue;
        }
        out.push(TrainingTriplet {
            query_id: t.query_id.clone(),
            query_text: t.query_text.clone(),
            positives: sample(&mut rng, &t.positives, cfg.pos_per_query),
            negatives: sample(&mut rng, &t.negatives, cfg.neg_per_query),
        });
    }
    report.emitted = out.len();
    Ok((out, report))
}

/// Candidate construction followed by sampling.
pub fn build_training_pairs(
    qrels: &QRels,
    mined: &BTreeMap<String, Vec<ScoredDoc>>,
    query_texts: &BTreeMap<String, String>,
    cfg: &ContrastiveConfig,
    seed: u64,
) -> Result<(Vec<TrainingTriplet>, PairReport)> {
    cfg.validate()?;
    sample_training_pairs(&candidate_triplets(qrels, mined, query_texts, cfg), cfg, seed)
}
