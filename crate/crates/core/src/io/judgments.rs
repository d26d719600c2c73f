//! Relevance judgments and ranked runs, both tab-separated.
//!
//! QRels lines: `query-id \t doc-id \t relevance`.
//! Run lines: `query-id \t rank \t doc-id \t score`, ranks starting at 1.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QRels {
    entries: BTreeMap<String, BTreeMap<String, u32>>,
}

impl QRels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        query: impl Into<String>,
        doc: impl Into<String>,
        relevance: u32,
    ) -> Result<()> {
        let query = query.into();
        let doc = doc.into();
        if query.is_empty() || doc.is_empty() {
            return Err(Error::Validation("empty query or document id in qrels".into()));
        }
        let judged = self.entries.entry(query.clone()).or_default();
        if judged.contains_key(&doc) {
            return Err(Error::Validation(format!(
                "duplicate judgment for ({query:?}, {doc:?})"
            )));
        }
        judged.insert(doc, relevance);
        Ok(())
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn judgments(&self, query: &str) -> Option<&BTreeMap<String, u32>> {
        self.entries.get(query)
    }

    pub fn relevance(&self, query: &str, doc: &str) -> u32 {
        self.entries
            .get(query)
            .and_then(|j| j.get(doc))
            .copied()
            .unwrap_or(0)
    }

    /// Documents judged with relevance > 0, in id order.
    pub fn relevant(&self, query: &str) -> Vec<&str> {
        self.entries
            .get(query)
            .map(|j| {
                j.iter()
                    .filter(|(_, &r)| r > 0)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.entries
            .iter()
            .flat_map(|(q, j)| j.iter().map(move |(d, &r)| (q.as_str(), d.as_str(), r)))
    }
}

pub fn parse_qrels(text: &str, origin: &Path) -> Result<QRels> {
    let mut qrels = QRels::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                origin,
                lineno + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let rel: u32 = fields[2].trim().parse().map_err(|_| {
            Error::parse(
                origin,
                lineno + 1,
                format!("relevance {:?} is not a non-negative integer", fields[2]),
            )
        })?;
        qrels
            .insert(fields[0], fields[1], rel)
            .map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
    }
    Ok(qrels)
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<QRels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(&text, path)
}

pub fn format_qrels(qrels: &QRels) -> String {
    let mut out = String::new();
    for (q, d, r) in qrels.iter() {
        out.push_str(&format!("{q}\t{d}\t{r}\n"));
    }
    out
}

pub fn write_qrels(qrels: &QRels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_qrels(qrels)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Orders by descending score, then ascending doc id.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalRun {
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RetrievalRun {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores an already ranked list after checking the ranking invariants.
    pub fn insert_ranked(&mut self, query: impl Into<String>, ranked: Vec<ScoredDoc>) -> Result<()> {
        let query = query.into();
        let mut seen = HashSet::with_capacity(ranked.len());
        for (i, d) in ranked.iter().enumerate() {
            if !d.score.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite score for ({query:?}, {:?})",
                    d.doc_id
                )));
            }
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Validation(format!(
                    "document {:?} ranked twice for query {query:?}",
                    d.doc_id
                )));
            }
            if i > 0 && ranked[i - 1].score < d.score {
                return Err(Error::Validation(format!(
                    "scores increase at rank {} for query {query:?}",
                    i + 1
                )));
            }
        }
        self.rankings.insert(query, ranked);
        Ok(())
    }

    /// Sorts the scores into rank order (ties by ascending doc id) and stores them.
    pub fn insert_scores(&mut self, query: impl Into<String>, mut scores: Vec<ScoredDoc>) -> Result<()> {
        scores.sort_by(rank_order);
        self.insert_ranked(query, scores)
    }

    pub fn ranking(&self, query: &str) -> Option<&[ScoredDoc]> {
        self.rankings.get(query).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.rankings.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }
}

pub fn parse_run(text: &str, origin: &Path) -> Result<RetrievalRun> {
    let mut rows: BTreeMap<String, Vec<(usize, ScoredDoc, usize)>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                origin,
                lineno + 1,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let rank: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, lineno + 1, format!("bad rank {:?}", fields[1])))?;
        let score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, lineno + 1, format!("bad score {:?}", fields[3])))?;
        rows.entry(fields[0].to_string())
            .or_default()
            .push((rank, ScoredDoc::new(fields[2], score), lineno + 1));
    }
    let mut run = RetrievalRun::new();
    for (query, mut entries) in rows {
        entries.sort_by_key(|(rank, _, _)| *rank);
        for (pos, (rank, _, line)) in entries.iter().enumerate() {
            if *rank != pos + 1 {
                return Err(Error::parse(
                    origin,
                    *line,
                    format!("ranks for query {query:?} are not 1..n"),
                ));
            }
        }
        let ranked = entries.into_iter().map(|(_, d, _)| d).collect();
        run.insert_ranked(query, ranked).map_err(|e| match e {
            Error::Validation(m) => Error::Format(m),
            other => other,
        })?;
    }
    Ok(run)
}

pub fn load_run(path: impl AsRef<Path>) -> Result<RetrievalRun> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&text, path)
}

pub fn format_run(run: &RetrievalRun) -> String {
    let mut out = String::new();
    for (q, ranked) in run.iter() {
        for (i, d) in ranked.iter().enumerate() {
            // `{}` on f64 prints the shortest representation that parses back exactly.
            out.push_str(&format!("{q}\t{}\t{}\t{}\n", i + 1, d.doc_id, d.score));
        }
    }
    out
}

pub fn write_run(run: &RetrievalRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_run(run)).map_err(|e| Error::io(path, e))
}
