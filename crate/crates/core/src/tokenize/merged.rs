use std::collections::HashSet;

use super::vocab::char_offsets;
use super::{
    is_cjk, is_punctuation, remove_stopwords, EntityDictionary, SubwordVocabulary, Token,
    TokenKind,
};

/// Dictionary segmentation merged with WordPiece: at every cut the candidate
/// covering more characters wins, the dictionary winning ties.
#[derive(Debug, Clone)]
pub struct MergedTokenizer {
    pub dictionary: EntityDictionary,
    pub subwords: SubwordVocabulary,
    pub stopwords: HashSet<String>,
}

impl MergedTokenizer {
    pub fn new(
        dictionary: EntityDictionary,
        subwords: SubwordVocabulary,
        stopwords: HashSet<String>,
    ) -> Self {
        Self {
            dictionary,
            subwords,
            stopwords,
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        merged_tokenize(text, self)
    }

    /// Surface strings of the emitted tokens.
    pub fn segment<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.tokenize(text).iter().map(|t| t.surface(text)).collect()
    }

    /// Surface strings with stopwords removed.
    pub fn terms<'a>(&self, text: &'a str) -> Vec<&'a str> {
        remove_stopwords(&self.segment(text), &self.stopwords)
    }
}

/// Unit boundaries in char indices: `unit_end[i]` is the exclusive end of the
/// unit containing char `i`, `unit_start[i]` its start. Whitespace chars are
/// not part of any unit.
fn unit_bounds(chars: &[char]) -> (Vec<usize>, Vec<usize>) {
    let n = chars.len();
    let mut starts = vec![0; n];
    let mut ends = vec![0; n];
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let end = if is_cjk(c) || is_punctuation(c) {
            i + 1
        } else {
            let mut j = i + 1;
            while j < n && !chars[j].is_whitespace() && !is_cjk(chars[j]) && !is_punctuation(chars[j]) {
                j += 1;
            }
            j
        };
        for k in i..end {
            starts[k] = i;
            ends[k] = end;
        }
        i = end;
    }
    (starts, ends)
}

/// Greedy longest-coverage segmentation.
///
/// At each non-whitespace position the candidates are the longest dictionary
/// entry starting there (entries may span whitespace) and the WordPiece token
/// starting there. The WordPiece candidate is the first piece of the greedy
/// decomposition of the rest of the current unit; when that remainder cannot
/// be decomposed the candidate is an unknown token covering it, and any
/// dictionary match beats an unknown token.
pub fn merged_tokenize(text: &str, t: &MergedTokenizer) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let offsets = char_offsets(text, 0);
    let (unit_start, unit_end) = unit_bounds(&chars);
    let mut out = Vec::new();
    // Remaining pieces of the last decomposition, valid while cutting the same unit.
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut pending_at = usize::MAX;

    let mut p = 0;
    while p < chars.len() {
        if chars[p].is_whitespace() {
            p += 1;
            continue;
        }
        let (us, ue) = (unit_start[p], unit_end[p]);
        if pending_at != p || pending.is_empty() {
            pending = t
                .subwords
                .decompose(&chars[p..ue], p > us)
                .map(|mut pieces| {
                    pieces.reverse();
                    pieces
                })
                .unwrap_or_default();
        }
        let dict_len = t.dictionary.longest_match(&chars[p..]);
        let subword = pending.last().cloned();

        let (len, kind, token) = match (dict_len, subword) {
            (Some(d), Some((s, _))) if d >= s => (d, TokenKind::Dictionary, None),
            (Some(d), None) => (d, TokenKind::Dictionary, None),
            (_, Some((s, piece))) => (s, TokenKind::Subword, Some(piece)),
            (None, None) => (ue - p, TokenKind::Unknown, Some(t.subwords.unk().to_string())),
        };

        let start = offsets[p];
        let end = offsets[p + len];
        let text_form = match kind {
            TokenKind::Dictionary => text[start..end].to_string(),
            _ => token.unwrap(),
        };
        if kind == TokenKind::Subword {
            pending.pop();
            pending_at = p + len;
        } else {
            pending.clear();
            pending_at = usize::MAX;
        }
        out.push(Token {
            text: text_form,
            start,
            end,
            kind,
        });
        p += len;
    }
    out
}
