use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{pre_tokenize, Token, TokenKind};
use crate::error::{Error, Result};

pub const CONTINUATION: &str = "##";
pub const DEFAULT_UNK: &str = "[UNK]";
/// Units longer than this (in characters) are mapped to the unknown token.
pub const MAX_UNIT_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    tokens: Vec<String>,
    lookup: HashSet<String>,
    unk: String,
    base_size: usize,
}

impl SubwordVocabulary {
    /// Builds a vocabulary from an ordered token list. The unknown token is
    /// prepended when missing.
    pub fn new(tokens: Vec<String>, unk: &str) -> Result<Self> {
        if unk.is_empty() {
            return Err(Error::Validation("unknown token must be non-empty".into()));
        }
        let mut ordered = Vec::with_capacity(tokens.len() + 1);
        if !tokens.iter().any(|t| t == unk) {
            ordered.push(unk.to_string());
        }
        ordered.extend(tokens);
        let mut lookup = HashSet::with_capacity(ordered.len());
        for t in &ordered {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("invalid vocabulary token {t:?}")));
            }
            if !lookup.insert(t.clone()) {
                return Err(Error::Validation(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let base_size = ordered.len();
        Ok(Self {
            tokens: ordered,
            lookup,
            unk: unk.to_string(),
            base_size,
        })
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(tokens.into_iter().map(Into::into).collect(), DEFAULT_UNK)
    }

    /// Marks the current size as the base size.
    pub fn rebase(mut self) -> Self {
        self.base_size = self.tokens.len();
        self
    }

    pub(crate) fn push_expansion(&mut self, token: String) -> bool {
        if self.lookup.contains(&token) {
            return false;
        }
        self.lookup.insert(token.clone());
        self.tokens.push(token);
        true
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup.contains(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk(&self) -> &str {
        &self.unk
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn expanded_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens added on top of the base vocabulary.
    pub fn expansion(&self) -> &[String] {
        &self.tokens[self.base_size..]
    }

    /// Greedy longest-prefix decomposition of `chars`. The first piece carries
    /// the continuation marker when `continued` is set. Returns the char
    /// length and vocabulary form of each piece, or `None` if some position has
    /// no matching prefix.
    pub(crate) fn decompose(&self, chars: &[char], continued: bool) -> Option<Vec<(usize, String)>> {
        if chars.len() > MAX_UNIT_CHARS {
            return None;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut buf = String::new();
        while start < chars.len() {
            let mut found = None;
            for end in (start + 1..=chars.len()).rev() {
                buf.clear();
                if start > 0 || continued {
                    buf.push_str(CONTINUATION);
                }
                buf.extend(&chars[start..end]);
                if self.lookup.contains(buf.as_str()) {
                    found = Some((end - start, buf.clone()));
                    break;
                }
            }
            let (len, token) = found?;
            pieces.push((len, token));
            start += len;
        }
        Some(pieces)
    }

    /// Reads one token per line. A vocabulary file must list the unknown token.
    pub fn load(path: impl AsRef<Path>, unk: &str) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        if !tokens.iter().any(|t| t == unk) {
            return Err(Error::Validation(format!(
                "{} does not contain the unknown token {unk:?}",
                path.display()
            )));
        }
        Self::new(tokens, unk)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// WordPiece inference with spans. Units with no full decomposition become a
/// single unknown token.
pub fn subword_tokens(text: &str, vocab: &SubwordVocabulary) -> Vec<Token> {
    let mut out = Vec::new();
    for unit in pre_tokenize(text) {
        let chars: Vec<char> = unit.text.chars().collect();
        match vocab.decompose(&chars, false) {
            Some(pieces) => {
                let offsets = char_offsets(unit.text, unit.start);
                let mut at = 0;
                for (len, token) in pieces {
                    out.push(Token {
                        text: token,
                        start: offsets[at],
                        end: offsets[at + len],
                        kind: TokenKind::Subword,
                    });
                    at += len;
                }
            }
            None => out.push(Token {
                text: vocab.unk().to_string(),
                start: unit.start,
                end: unit.end,
                kind: TokenKind::Unknown,
            }),
        }
    }
    out
}

/// Byte offset of every char boundary of `s` (including the end), shifted by `base`.
pub(crate) fn char_offsets(s: &str, base: usize) -> Vec<usize> {
    s.char_indices()
        .map(|(i, _)| base + i)
        .chain(std::iter::once(base + s.len()))
        .collect()
}

pub fn subword_tokenize(text: &str, vocab: &SubwordVocabulary) -> Vec<String> {
    subword_tokens(text, vocab).into_iter().map(|t| t.text).collect()
}
