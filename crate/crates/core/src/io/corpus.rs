use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single corpus record: a report, an announcement, a news item or a title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("document id is empty".into()));
        }
        if self.text.is_empty() && self.meta.is_empty() {
            return Err(Error::Validation(format!(
                "document {:?} has neither text nor metadata",
                self.id
            )));
        }
        Ok(())
    }
}

/// Reads a JSON-lines corpus. Blank lines are ignored.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        doc.validate()
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate document id {:?} at {}:{}",
                doc.id,
                path.display(),
                lineno + 1
            )));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    for doc in docs {
        doc.validate()?;
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::Validation(format!("duplicate document id {:?}", doc.id)));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.jsonl", "");
        assert!(load_corpus(&p).unwrap().is_empty());
    }

    #[test]
    fn preserves_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n{\"id\":\"c\",\"text\":\"z\",\"meta\":{\"k\":\"v\"}}\n",
        );
        let docs = load_corpus(&p).unwrap();
        let ids: Vec<_> = docs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(docs[2].meta["k"], "v");
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n",
        );
        let err = load_corpus(&p).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("\"a\""));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{not json\n");
        match load_corpus(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_text_needs_meta() {
        assert!(Document::new("a", "").validate().is_err());
        assert!(Document::new("a", "").with_meta("src", "x").validate().is_ok());
        assert!(Document::new("", "t").validate().is_err());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let docs = vec![
            Document::new("d1", "比亚迪 三季度 销量\t\"quoted\""),
            Document::new("d2", "").with_meta("title", "t"),
        ];
        write_corpus(&docs, &p).unwrap();
        assert_eq!(load_corpus(&p).unwrap(), docs);
    }
}
