use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{QRels, RetrievalRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub per_query: BTreeMap<String, f64>,
    /// Unweighted mean over queries.
    pub mean: f64,
}

/// Evaluates every query of the run; each must have a judged relevant doc.
fn evaluate<F>(run: &RetrievalRun, qrels: &QRels, k: usize, metric: F) -> Result<MetricReport>
where
    F: Fn(&[&str], &BTreeMap<String, u32>, usize) -> f64,
{
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if run.is_empty() {
        return Err(Error::MetricUndefined("run has no queries".into()));
    }
    let mut per_query = BTreeMap::new();
    for (query, ranking) in run.iter() {
        let judged = qrels
            .judgments(query)
            .filter(|j| j.values().any(|&r| r > 0))
            .ok_or_else(|| Error::NoRelevant(query.to_string()))?;
        let top: Vec<&str> = ranking.iter().take(k).map(|d| d.doc_id.as_str()).collect();
        per_query.insert(query.to_string(), metric(&top, judged, k));
    }
    let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
    Ok(MetricReport { k, per_query, mean })
}

/// |relevant ∩ top-k| / |relevant|, relevant meaning relevance > 0.
pub fn recall_at_k(run: &RetrievalRun, qrels: &QRels, k: usize) -> Result<MetricReport> {
    evaluate(run, qrels, k, |top, judged, _| {
        let relevant: HashSet<&str> = judged
            .iter()
            .filter(|(_, &r)| r > 0)
            .map(|(d, _)| d.as_str())
            .collect();
        let hits = top.iter().filter(|d| relevant.contains(*d)).count();
        hits as f64 / relevant.len() as f64
    })
}

fn dcg(gains: impl Iterator<Item = u32>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG with linear gain: DCG = Σ rel_i / log2(i + 1) over ranks 1..=k,
/// normalized by the DCG of the relevance-sorted ideal ranking.
pub fn ndcg_at_k(run: &RetrievalRun, qrels: &QRels, k: usize) -> Result<MetricReport> {
    evaluate(run, qrels, k, |top, judged, k| {
        let actual = dcg(top.iter().map(|d| judged.get(*d).copied().unwrap_or(0)));
        let mut ideal: Vec<u32> = judged.values().copied().filter(|&r| r > 0).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        actual / dcg(ideal.into_iter().take(k))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::ScoredDoc;

    fn run_of(query: &str, docs: &[&str]) -> RetrievalRun {
        let mut run = RetrievalRun::new();
        let n = docs.len() as f64;
        run.insert_ranked(
            query,
            docs.iter()
                .enumerate()
                .map(|(i, d)| ScoredDoc::new(*d, n - i as f64))
                .collect(),
        )
        .unwrap();
        run
    }

    fn qrels(rows: &[(&str, &str, u32)]) -> QRels {
        let mut q = QRels::new();
        for (a, b, r) in rows {
            q.insert(*a, *b, *r).unwrap();
        }
        q
    }

    #[test]
    fn perfect_first_rank() {
        let run = run_of("q", &["a", "b"]);
        let q = qrels(&[("q", "a", 1)]);
        assert_eq!(recall_at_k(&run, &q, 1).unwrap().mean, 1.0);
        assert_eq!(ndcg_at_k(&run, &q, 10).unwrap().mean, 1.0);
    }

    #[test]
    fn half_recall() {
        let run = run_of("q", &["a", "x", "y", "b"]);
        let q = qrels(&[("q", "a", 1), ("q", "b", 1)]);
        assert_eq!(recall_at_k(&run, &q, 3).unwrap().mean, 0.5);
    }

    #[test]
    fn second_rank_ndcg() {
        let run = run_of("q", &["x", "a"]);
        let q = qrels(&[("q", "a", 1)]);
        let v = ndcg_at_k(&run, &q, 10).unwrap().mean;
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn recall_capped_by_relevant_count() {
        let run = run_of("q", &["a", "b"]);
        let q = qrels(&[("q", "a", 1), ("q", "b", 1), ("q", "c", 1)]);
        let v = recall_at_k(&run, &q, 20).unwrap().mean;
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_relevance_judgments_do_not_count() {
        let run = run_of("q", &["a"]);
        let q = qrels(&[("q", "a", 0)]);
        assert!(matches!(recall_at_k(&run, &q, 1), Err(Error::NoRelevant(_))));
        assert!(matches!(ndcg_at_k(&run, &qrels(&[]), 1), Err(Error::NoRelevant(_))));
    }

    #[test]
    fn mean_is_unweighted() {
        let mut run = run_of("q1", &["a"]);
        run.insert_ranked("q2", vec![ScoredDoc::new("x", 1.0)]).unwrap();
        let q = qrels(&[("q1", "a", 1), ("q2", "b", 1)]);
        let r = recall_at_k(&run, &q, 1).unwrap();
        assert_eq!(r.mean, 0.5);
        assert_eq!(r.per_query["q2"], 0.0);
    }
}
