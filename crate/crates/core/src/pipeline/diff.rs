use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDiff {
    pub term: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub terms: usize,
    pub inconsistencies: usize,
    /// Inconsistent terms grouped by their length in characters.
    pub by_char_length: BTreeMap<usize, usize>,
    pub diffs: Vec<TermDiff>,
}

/// Segments every term with both tokenizers and records the terms whose
/// segmentations differ.
pub fn tokenizer_diff<S, A, B>(terms: &[S], a: A, b: B) -> DiffReport
where
    S: AsRef<str>,
    A: Fn(&str) -> Vec<String>,
    B: Fn(&str) -> Vec<String>,
{
    let mut report = DiffReport {
        terms: terms.len(),
        ..DiffReport::default()
    };
    for term in terms {
        let term = term.as_ref();
        let (sa, sb) = (a(term), b(term));
        if sa != sb {
            report.inconsistencies += 1;
            *report.by_char_length.entry(term.chars().count()).or_default() += 1;
            report.diffs.push(TermDiff {
                term: term.to_string(),
                a: sa,
                b: sb,
            });
        }
    }
    report
}
