//! Tokenization: pre-tokenization into base units, WordPiece vocabularies
//! (training and greedy inference), entity dictionaries and the merged
//! longest-coverage tokenizer.

mod dictionary;
mod merged;
mod vocab;
mod wordpiece;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

pub use dictionary::{EntityDictionary, Trie};
pub use merged::{merged_tokenize, MergedTokenizer};
pub use vocab::{subword_tokenize, subword_tokens, SubwordVocabulary, CONTINUATION, DEFAULT_UNK};
pub use wordpiece::{count_words, train_wordpiece_expansion, WordPieceConfig, WordPieceReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Dictionary,
    Subword,
    Unknown,
}

/// An emitted token. `start..end` is the byte span it covers in the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn surface<'a>(&self, input: &'a str) -> &'a str {
        &input[self.start..self.end]
    }
}

/// A pre-tokenized unit with its byte span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x2000..=0x206F      // general punctuation
            | 0x3000..=0x303F    // CJK symbols and punctuation
            | 0xFF00..=0xFF0F
            | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40
            | 0xFF5B..=0xFF65)
}

fn stands_alone(c: char) -> bool {
    is_cjk(c) || is_punctuation(c)
}

/// Splits text on whitespace; every CJK ideograph and punctuation mark is a
/// unit of its own.
pub fn pre_tokenize(text: &str) -> Vec<Unit<'_>> {
    let mut units = Vec::new();
    let mut word_start: Option<usize> = None;
    let unit = |s: usize, e: usize| Unit {
        text: &text[s..e],
        start: s,
        end: e,
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || stands_alone(c) {
            if let Some(s) = word_start.take() {
                units.push(unit(s, i));
            }
            if !c.is_whitespace() {
                units.push(unit(i, i + c.len_utf8()));
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        units.push(unit(s, text.len()));
    }
    units
}

/// Order-preserving filter dropping every token found in `stopwords`.
pub fn remove_stopwords<S: AsRef<str> + Clone>(tokens: &[S], stopwords: &HashSet<String>) -> Vec<S> {
    tokens
        .iter()
        .filter(|t| !stopwords.contains(t.as_ref()))
        .cloned()
        .collect()
}

/// One term per line; blank lines and surrounding whitespace ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}
