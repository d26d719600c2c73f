use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TermCounts = BTreeMap<String, u64>;
pub type TermWeights = BTreeMap<String, f64>;

/// Class-based TF-IDF: W(t, c) = tf(t, c) / |c| · ln(1 + A / f(t)), where
/// |c| is the total term count of class c, f(t) the corpus frequency of t
/// and A the mean total term count per class. Empty classes get an empty
/// weight map.
pub fn ctfidf(classes: &[TermCounts]) -> Result<Vec<TermWeights>> {
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total = 0u64;
    for class in classes {
        for (t, &c) in class {
            *freq.entry(t).or_default() += c;
            total += c;
        }
    }
    if total == 0 {
        return Err(Error::Validation("c-TF-IDF needs at least one term occurrence".into()));
    }
    let avg = total as f64 / classes.len() as f64;
    Ok(classes
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let size: u64 = class.values().sum();
            if size == 0 {
                log::warn!("class {i} has no terms; its c-TF-IDF weights are zero");
                return TermWeights::new();
            }
            class
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(t, &c)| {
                    let idf = (1.0 + avg / freq[t.as_str()] as f64).ln();
                    (t.clone(), c as f64 / size as f64 * idf)
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub term: String,
    pub weight: f64,
}

/// The `k` heaviest non-zero terms, heaviest first, ties in lexicographic order.
pub fn top_terms(weights: &TermWeights, k: usize) -> Vec<Descriptor> {
    let mut terms: Vec<(&String, f64)> = weights.iter().filter(|(_, &w)| w > 0.0).map(|(t, &w)| (t, w)).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    terms
        .into_iter()
        .take(k)
        .map(|(t, w)| Descriptor {
            term: t.clone(),
            weight: w,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    /// Cluster label; −1 collects the outliers.
    pub label: i64,
    pub doc_count: usize,
    pub descriptors: Vec<Descriptor>,
}

impl Topic {
    pub fn is_outlier(&self) -> bool {
        self.label < 0
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.descriptors.iter().map(|d| d.term.as_str())
    }
}

/// Groups per-document terms by label, weights them with [`ctfidf`] (the
/// outlier class takes part like any other) and keeps the top `k` terms of
/// each class. Topics come out in ascending label order.
pub fn build_topics<S: AsRef<str>>(labels: &[i64], doc_terms: &[Vec<S>], k: usize) -> Result<Vec<Topic>> {
    if labels.len() != doc_terms.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: doc_terms.len(),
        });
    }
    if k == 0 {
        return Err(Error::Parameter("descriptor count k must be at least 1".into()));
    }
    let classes: Vec<i64> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let slot: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = vec![TermCounts::new(); classes.len()];
    let mut docs = vec![0usize; classes.len()];
    for (&l, terms) in labels.iter().zip(doc_terms) {
        let s = slot[&l];
        docs[s] += 1;
        for t in terms {
            *counts[s].entry(t.as_ref().to_owned()).or_default() += 1;
        }
    }
    let weights = ctfidf(&counts)?;
    Ok(classes
        .iter()
        .zip(docs)
        .zip(&weights)
        .map(|((&label, doc_count), w)| Topic {
            label,
            doc_count,
            descriptors: top_terms(w, k),
        })
        .collect())
}

/// One JSON object per line.
pub fn write_topics(topics: &[Topic], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::io::write_atomic(path, format_topics(topics).as_bytes())
}

pub fn format_topics(topics: &[Topic]) -> String {
    let mut out = String::new();
    for t in topics {
        out.push_str(&serde_json::to_string(t).expect("topics serialize"));
        out.push('\n');
    }
    out
}

pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<Topic>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}
