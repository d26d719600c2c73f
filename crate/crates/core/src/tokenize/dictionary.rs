use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Node {
    children: HashMap<char, usize>,
    terminal: bool,
}

/// Character prefix trie backed by a flat node arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trie {
    nodes: Vec<Node>,
}

impl Default for Trie {
    fn default() -> Self {
        Self {
            nodes: vec![Node::default()],
        }
    }
}

impl Trie {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str) {
        let mut at = 0;
        for c in word.chars() {
            at = match self.nodes[at].children.get(&c) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[at].children.insert(c, next);
                    next
                }
            };
        }
        self.nodes[at].terminal = true;
    }

    pub fn contains(&self, word: &str) -> bool {
        let mut at = 0;
        for c in word.chars() {
            match self.nodes[at].children.get(&c) {
                Some(&next) => at = next,
                None => return false,
            }
        }
        self.nodes[at].terminal
    }

    /// Lengths (in chars) of every entry that is a prefix of `chars`, ascending.
    pub fn prefix_lengths(&self, chars: &[char]) -> Vec<usize> {
        let mut found = Vec::new();
        let mut at = 0;
        for (i, c) in chars.iter().enumerate() {
            match self.nodes[at].children.get(c) {
                Some(&next) => at = next,
                None => break,
            }
            if self.nodes[at].terminal {
                found.push(i + 1);
            }
        }
        found
    }

    /// Length (in chars) of the longest entry that is a prefix of `chars`.
    pub fn longest_prefix(&self, chars: &[char]) -> Option<usize> {
        let mut best = None;
        let mut at = 0;
        for (i, c) in chars.iter().enumerate() {
            match self.nodes[at].children.get(c) {
                Some(&next) => at = next,
                None => break,
            }
            if self.nodes[at].terminal {
                best = Some(i + 1);
            }
        }
        best
    }
}

/// Curated multi-character terms (company names and other entities) that the
/// merged tokenizer can emit whole.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityDictionary {
    entries: BTreeSet<String>,
    trie: Trie,
    pub source: String,
}

impl EntityDictionary {
    pub fn new<I, S>(entries: I, source: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut dict = Self {
            source: source.into(),
            ..Self::default()
        };
        for e in entries {
            dict.insert(e.as_ref())?;
        }
        Ok(dict)
    }

    /// Adds an entry, trimming surrounding whitespace.
    pub fn insert(&mut self, entry: &str) -> Result<()> {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(Error::Validation("empty dictionary entry".into()));
        }
        if self.entries.insert(entry.to_string()) {
            self.trie.insert(entry);
        }
        Ok(())
    }

    pub fn contains(&self, entry: &str) -> bool {
        self.trie.contains(entry)
    }

    pub fn longest_match(&self, chars: &[char]) -> Option<usize> {
        self.trie.longest_prefix(chars)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One entry per line. Anything after a tab (frequency, tag) is ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries = text
            .lines()
            .map(|l| l.split('\t').next().unwrap_or(""))
            .filter(|l| !l.trim().is_empty());
        Self::new(entries, path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn every_entry_is_found() {
        let d = EntityDictionary::new(["比亚迪", "比亚迪汽车", "new york", "ab"], "test").unwrap();
        for e in d.entries() {
            assert!(d.contains(e));
        }
        assert!(!d.contains("比亚"));
        assert_eq!(d.longest_match(&chars("比亚迪汽车销量")), Some(5));
        assert_eq!(d.longest_match(&chars("比亚迪股份")), Some(3));
        assert_eq!(d.longest_match(&chars("亚迪")), None);
        assert_eq!(d.trie.prefix_lengths(&chars("比亚迪汽车")), [3, 5]);
    }

    #[test]
    fn entries_are_trimmed_and_non_empty() {
        let d = EntityDictionary::new(["  BYD  "], "t").unwrap();
        assert!(d.contains("BYD"));
        assert!(EntityDictionary::new(["  "], "t").is_err());
    }

    #[test]
    fn load_ignores_trailing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        std::fs::write(&p, "宁德时代\t3\tnt\n\nnew york\n").unwrap();
        let d = EntityDictionary::load(&p).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.contains("宁德时代"));
        assert!(d.contains("new york"));
    }
}
