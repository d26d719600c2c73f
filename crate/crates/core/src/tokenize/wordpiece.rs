//! WordPiece vocabulary expansion.
//!
//! Each word starts as its characters (`w`, `##o`, `##r`, `##d`). Every round
//! merges the adjacent pair with the highest likelihood score
//! `freq(pair) / (freq(left) * freq(right))`; ties go to the lexicographically
//! smallest pair. Only merge products count as new tokens: the character
//! alphabet is expected to be covered by the base vocabulary already.

use std::collections::{BTreeMap, HashMap};

use super::{pre_tokenize, SubwordVocabulary, CONTINUATION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordPieceConfig {
    pub new_tokens: usize,
    /// A pair must occur at least this often to be merged.
    pub min_freq: u64,
}

impl Default for WordPieceConfig {
    fn default() -> Self {
        Self {
            new_tokens: 14_000,
            min_freq: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordPieceReport {
    pub added: usize,
    /// Requested tokens that could not be produced.
    pub shortfall: usize,
    /// Merges whose product was already in the base vocabulary.
    pub existing_merges: usize,
    /// Corpus frequency of each added token at the time it was merged.
    pub frequencies: Vec<(String, u64)>,
    /// Initial symbols absent from the base vocabulary.
    pub missing_alphabet: Vec<String>,
}

fn merge_symbols(left: &str, right: &str) -> String {
    let mut s = String::with_capacity(left.len() + right.len());
    s.push_str(left);
    s.push_str(right.strip_prefix(CONTINUATION).unwrap_or(right));
    s
}

/// `a` scores strictly higher than `b`, compared exactly on integers.
fn better(a: (u64, u64, u64), b: (u64, u64, u64)) -> bool {
    let (pa, la, ra) = a;
    let (pb, lb, rb) = b;
    (pa as u128) * (lb as u128) * (rb as u128) > (pb as u128) * (la as u128) * (ra as u128)
}

/// Counts words in a text stream using the standard pre-tokenization.
pub fn count_words<'a, I>(lines: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts = BTreeMap::new();
    for line in lines {
        for unit in pre_tokenize(line) {
            *counts.entry(unit.text.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

/// Expands `base` with up to `cfg.new_tokens` merged tokens learned from the
/// corpus lines.
pub fn train_wordpiece_expansion<'a, I>(
    corpus: I,
    base: &SubwordVocabulary,
    cfg: &WordPieceConfig,
) -> Result<(SubwordVocabulary, WordPieceReport)>
where
    I: IntoIterator<Item = &'a str>,
{
    let counts = count_words(corpus);
    if counts.is_empty() {
        return Err(Error::Validation("empty training corpus".into()));
    }
    let mut vocab = base.clone().rebase();
    let mut report = WordPieceReport::default();
    if cfg.new_tokens == 0 {
        return Ok((vocab, report));
    }

    let mut words: Vec<(Vec<String>, u64)> = counts
        .into_iter()
        .map(|(w, c)| {
            let symbols = w
                .chars()
                .enumerate()
                .map(|(i, ch)| {
                    if i == 0 {
                        ch.to_string()
                    } else {
                        format!("{CONTINUATION}{ch}")
                    }
                })
                .collect();
            (symbols, c)
        })
        .collect();

    let mut alphabet: Vec<String> = words
        .iter()
        .flat_map(|(s, _)| s.iter().cloned())
        .filter(|s| !vocab.contains(s))
        .collect();
    alphabet.sort();
    alphabet.dedup();
    report.missing_alphabet = alphabet;

    let min_freq = cfg.min_freq.max(1);
    while report.added < cfg.new_tokens {
        let mut symbol_freq: HashMap<&str, u64> = HashMap::new();
        let mut pair_freq: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &words {
            for s in symbols {
                *symbol_freq.entry(s.as_str()).or_insert(0) += count;
            }
            for w in symbols.windows(2) {
                *pair_freq.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += count;
            }
        }

        let mut best: Option<((&str, &str), (u64, u64, u64))> = None;
        for (&pair, &freq) in &pair_freq {
            if freq < min_freq {
                continue;
            }
            let score = (freq, symbol_freq[pair.0], symbol_freq[pair.1]);
            best = match best {
                None => Some((pair, score)),
                Some((bp, bs)) => {
                    if better(score, bs) || (!better(bs, score) && pair < bp) {
                        Some((pair, score))
                    } else {
                        Some((bp, bs))
                    }
                }
            };
        }
        let Some(((left, right), (freq, _, _))) = best else {
            break;
        };
        let (left, right) = (left.to_string(), right.to_string());
        let merged = merge_symbols(&left, &right);

        for (symbols, _) in &mut words {
            if symbols.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            *symbols = out;
        }

        if vocab.push_expansion(merged.clone()) {
            report.added += 1;
            report.frequencies.push((merged, freq));
        } else {
            report.existing_merges += 1;
        }
    }
    report.shortfall = cfg.new_tokens - report.added;
    if report.shortfall > 0 {
        log::warn!(
            "wordpiece expansion stopped after {} of {} tokens: no pair reaches frequency {}",
            report.added,
            cfg.new_tokens,
            min_freq
        );
    }
    Ok((vocab, report))
}
