//! Overlapping token windows over long documents, and the roll-up of
//! per-window scores back to documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Document;
use crate::tokenize::pre_tokenize;

pub const DEFAULT_WINDOW: usize = 400;
pub const DEFAULT_OVERLAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub token_start: usize,
    /// Exclusive.
    pub token_end: usize,
    pub tokens: Vec<String>,
}

impl Chunk {
    pub fn id(&self) -> String {
        chunk_id(&self.doc_id, self.index)
    }
}

pub fn chunk_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index}")
}

/// Splits `"<doc-id>#<index>"` back into its parts.
pub fn split_chunk_id(id: &str) -> Option<(&str, usize)> {
    let (doc, idx) = id.rsplit_once('#')?;
    Some((doc, idx.parse().ok()?))
}

/// Token ranges `[start, end)` of the windows over `n` tokens.
///
/// Window `i` starts at `i * (window - overlap)`. Generation stops once a
/// window reaches the end of the sequence, so a window lying entirely inside
/// its predecessor is never produced.
pub fn window_ranges(n: usize, window: usize, overlap: usize) -> Result<Vec<(usize, usize)>> {
    if window == 0 {
        return Err(Error::Parameter("window must be positive".into()));
    }
    if overlap >= window {
        return Err(Error::Parameter(format!(
            "overlap {overlap} must be smaller than window {window}"
        )));
    }
    let step = window - overlap;
    let mut ranges = Vec::with_capacity(n.div_ceil(step));
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        ranges.push((start, end));
        if end == n {
            break;
        }
        start += step;
    }
    Ok(ranges)
}

pub fn chunk_tokens<S: AsRef<str>>(
    doc_id: &str,
    tokens: &[S],
    window: usize,
    overlap: usize,
) -> Result<Vec<Chunk>> {
    Ok(window_ranges(tokens.len(), window, overlap)?
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| Chunk {
            doc_id: doc_id.to_string(),
            index,
            token_start: start,
            token_end: end,
            tokens: tokens[start..end]
                .iter()
                .map(|t| t.as_ref().to_string())
                .collect(),
        })
        .collect())
}

/// Windows a document over its pre-tokenized units (whitespace words, single
/// CJK characters). Each chunk keeps the original text between its first and
/// last unit, so spacing inside the window is preserved.
pub fn chunk_document(doc: &Document, window: usize, overlap: usize) -> Result<Vec<Document>> {
    let units = pre_tokenize(&doc.text);
    let ranges = window_ranges(units.len(), window, overlap)?;
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| {
            let text = &doc.text[units[start].start..units[end - 1].end];
            let mut chunk = Document::new(chunk_id(&doc.id, index), text);
            chunk.meta = doc.meta.clone();
            chunk
                .with_meta("doc_id", doc.id.clone())
                .with_meta("token_start", start.to_string())
                .with_meta("token_end", end.to_string())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

pub fn aggregate_chunk_scores(
    groups: &BTreeMap<String, Vec<f64>>,
    mode: Aggregation,
) -> Result<BTreeMap<String, f64>> {
    groups
        .iter()
        .map(|(doc, scores)| {
            if scores.is_empty() {
                return Err(Error::Validation(format!("no chunk scores for {doc:?}")));
            }
            let value = match mode {
                Aggregation::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Aggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
            };
            Ok((doc.clone(), value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    fn ranges(n: usize) -> Vec<(usize, usize)> {
        chunk_tokens("d", &toks(n), 400, 20)
            .unwrap()
            .iter()
            .map(|c| (c.token_start, c.token_end))
            .collect()
    }

    #[test]
    fn single_window() {
        assert_eq!(ranges(400), [(0, 400)]);
    }

    #[test]
    fn contained_tail_suppressed() {
        assert_eq!(ranges(780), [(0, 400), (380, 780)]);
    }

    #[test]
    fn truncated_tail_kept() {
        assert_eq!(ranges(790), [(0, 400), (380, 780), (760, 790)]);
    }

    #[test]
    fn empty_and_short_inputs() {
        assert!(ranges(0).is_empty());
        assert_eq!(ranges(3), [(0, 3)]);
    }

    #[test]
    fn overlap_must_be_below_window() {
        assert!(matches!(
            chunk_tokens("d", &toks(5), 10, 10),
            Err(Error::Parameter(_))
        ));
        assert!(chunk_tokens("d", &toks(5), 0, 0).is_err());
    }

    #[test]
    fn chunk_ids_and_tokens() {
        let chunks = chunk_tokens("doc", &toks(5), 3, 1).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].id(), "doc#1");
        assert_eq!(chunks[1].tokens, ["w2", "w3", "w4"]);
        assert_eq!(split_chunk_id("a#b#12"), Some(("a#b", 12)));
        assert_eq!(split_chunk_id("plain"), None);
    }

    #[test]
    fn document_chunks_keep_original_text() {
        let doc = Document::new("r1", "alpha beta  gamma 比亚迪 delta");
        let chunks = chunk_document(&doc, 4, 1).unwrap();
        let texts: Vec<_> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["alpha beta  gamma 比", "比亚迪 delta"]);
        assert_eq!(chunks[1].meta["token_start"], "3");
        assert_eq!(chunks[1].meta["doc_id"], "r1");
    }

    #[test]
    fn aggregation_modes() {
        let mut g = BTreeMap::new();
        g.insert("x".to_string(), vec![0.2, 0.9, 0.5]);
        assert_eq!(aggregate_chunk_scores(&g, Aggregation::Max).unwrap()["x"], 0.9);

        let mut single = BTreeMap::new();
        single.insert("s".to_string(), vec![0.7]);
        for mode in [Aggregation::Max, Aggregation::Mean] {
            assert_eq!(aggregate_chunk_scores(&single, mode).unwrap()["s"], 0.7);
        }

        let mut two = BTreeMap::new();
        two.insert("a".to_string(), vec![0.1, 0.3]);
        two.insert("b".to_string(), vec![0.2]);
        let out = aggregate_chunk_scores(&two, Aggregation::Max).unwrap();
        assert_eq!((out["a"], out["b"]), (0.3, 0.2));

        let mut empty = BTreeMap::new();
        empty.insert("e".to_string(), vec![]);
        assert!(aggregate_chunk_scores(&empty, Aggregation::Max).is_err());
    }

    proptest! {
        #[test]
        fn windows_cover_every_token(n in 0usize..3000, window in 1usize..500, frac in 0.0f64..1.0) {
            let overlap = ((window as f64) * frac) as usize % window;
            let rs = window_ranges(n, window, overlap).unwrap();
            let mut covered = vec![false; n];
            for (i, &(s, e)) in rs.iter().enumerate() {
                prop_assert!(e - s <= window);
                prop_assert_eq!(s, i * (window - overlap));
                covered[s..e].iter_mut().for_each(|c| *c = true);
                if i > 0 {
                    let (ps, pe) = rs[i - 1];
                    prop_assert!(!(ps <= s && e <= pe));
                    prop_assert_eq!(pe - s, overlap);
                }
            }
            prop_assert!(covered.into_iter().all(|c| c));
            prop_assert_eq!(window_ranges(n, window, overlap).unwrap(), rs);
        }

        #[test]
        fn wider_windows_never_add_chunks(n in 0usize..2000, overlap in 0usize..50, w in 51usize..400, extra in 0usize..200) {
            let small = window_ranges(n, w, overlap).unwrap().len();
            let large = window_ranges(n, w + extra, overlap).unwrap().len();
            prop_assert!(large <= small);
        }
    }
}
