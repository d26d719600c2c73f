use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use super::{norm, row_norms, score_row, top_k};
use crate::error::{Error, Result};
use crate::io::{EmbeddingMatrix, QRels, ScoredDoc};

/// The `max_n` documents most similar to the query, excluding `positives`,
/// in descending similarity (ties by ascending id).
pub fn mine_hard_negatives(
    query_id: &str,
    query: &[f32],
    positives: &[String],
    docs: &EmbeddingMatrix,
    max_n: usize,
) -> Result<Vec<ScoredDoc>> {
    if query.len() != docs.dim() {
        return Err(Error::DimensionMismatch {
            expected: docs.dim(),
            actual: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(Error::ZeroNorm(query_id.to_string()));
    }
    let dn = row_norms(docs)?;
    mine_with_norms(query_id, query, qn, positives, docs, &dn, max_n)
}

fn mine_with_norms(
    query_id: &str,
    query: &[f32],
    qn: f64,
    positives: &[String],
    docs: &EmbeddingMatrix,
    dn: &[f64],
    max_n: usize,
) -> Result<Vec<ScoredDoc>> {
    if let Some(missing) = positives.iter().find(|p| docs.position(p).is_none()) {
        return Err(Error::Validation(format!(
            "positive {missing:?} of query {query_id:?} is not in the document matrix"
        )));
    }
    let excluded: HashSet<&str> = positives.iter().map(String::as_str).collect();
    let candidates: Vec<ScoredDoc> = score_row(query, qn, docs, dn)
        .into_iter()
        .filter(|d| !excluded.contains(d.doc_id.as_str()))
        .collect();
    Ok(top_k(candidates, max_n))
}

/// Mines negatives for every qrels query that has a query vector. Queries
/// without a vector are skipped with a warning. Positives are the documents
/// judged relevant (relevance > 0).
pub fn mine_all(
    queries: &EmbeddingMatrix,
    qrels: &QRels,
    docs: &EmbeddingMatrix,
    max_n: usize,
) -> Result<BTreeMap<String, Vec<ScoredDoc>>> {
    if queries.dim() != docs.dim() {
        return Err(Error::DimensionMismatch {
            expected: docs.dim(),
            actual: queries.dim(),
        });
    }
    let dn = row_norms(docs)?;
    let work: Vec<(&str, usize, Vec<String>)> = qrels
        .queries()
        .filter_map(|q| match queries.position(q) {
            Some(i) => Some((q, i, qrels.relevant(q).into_iter().map(str::to_owned).collect())),
            None => {
                log::warn!("query {q:?} has judgments but no vector; skipped");
                None
            }
        })
        .collect();
    work.into_par_iter()
        .map(|(q, i, positives)| {
            let row = queries.row(i);
            let qn = norm(row);
            if qn == 0.0 {
                return Err(Error::ZeroNorm(q.to_string()));
            }
            let mined = mine_with_norms(q, row, qn, &positives, docs, &dn, max_n)?;
            Ok((q.to_string(), mined))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> EmbeddingMatrix {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![1.0, i as f32 * 0.1]).collect();
        EmbeddingMatrix::from_rows((0..10).map(|i| format!("d{i}")).collect(), &rows).unwrap()
    }

    fn ids(v: &[ScoredDoc]) -> Vec<&str> {
        v.iter().map(|d| d.doc_id.as_str()).collect()
    }

    #[test]
    fn excludes_positives_and_orders_by_similarity() {
        let d = docs();
        let mined = mine_hard_negatives("q", &[1.0, 0.0], &["d0".into()], &d, 2).unwrap();
        assert_eq!(ids(&mined), ["d1", "d2"]);
    }

    #[test]
    fn corpus_of_positives_only_yields_nothing() {
        let d = EmbeddingMatrix::from_rows(vec!["a".into()], &[vec![1.0]]).unwrap();
        assert!(mine_hard_negatives("q", &[1.0], &["a".into()], &d, 50).unwrap().is_empty());
    }

    #[test]
    fn small_corpus_returns_everything_else() {
        let d = EmbeddingMatrix::from_rows(
            ["a", "b", "c", "d", "e"].map(String::from).to_vec(),
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.0], vec![1.0, 0.2]],
        )
        .unwrap();
        let mined = mine_hard_negatives("q", &[1.0, 0.0], &["a".into()], &d, 50).unwrap();
        assert_eq!(ids(&mined), ["e", "c", "b", "d"]);
    }

    #[test]
    fn unknown_positive_rejected() {
        assert!(mine_hard_negatives("q", &[1.0, 0.0], &["nope".into()], &docs(), 3).is_err());
    }

    #[test]
    fn mine_all_uses_relevant_docs() {
        let d = docs();
        let q = EmbeddingMatrix::from_rows(vec!["q".into(), "lost".into()], &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let mut qrels = QRels::new();
        qrels.insert("q", "d0", 1).unwrap();
        qrels.insert("q", "d1", 0).unwrap();
        qrels.insert("missing", "d0", 1).unwrap();
        let all = mine_all(&q, &qrels, &d, 2).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(ids(&all["q"]), ["d1", "d2"]);
    }
}
