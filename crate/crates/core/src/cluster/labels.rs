use std::fs;
use std::path::Path;

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::io::write_atomic;

const HEADER: &str = "id\tlabel\tprobability";

/// One row of a tab-separated assignment file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub id: String,
    pub label: i64,
    pub probability: f64,
}

pub fn format_labels(ids: &[String], a: &ClusterAssignment) -> Result<String> {
    if ids.len() != a.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: a.labels.len(),
            actual: ids.len(),
        });
    }
    let mut out = format!("{HEADER}\n");
    for ((id, l), p) in ids.iter().zip(&a.labels).zip(&a.probabilities) {
        out.push_str(&format!("{id}\t{l}\t{p}\n"));
    }
    Ok(out)
}

pub fn write_labels(ids: &[String], a: &ClusterAssignment, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_labels(ids, a)?.as_bytes())
}

/// Reads `id<TAB>label<TAB>probability` rows. The header line is optional.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabeledPoint>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line == HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, label, prob] = fields[..] else {
            return Err(Error::parse(path, i + 1, format!("expected 3 fields, found {}", fields.len())));
        };
        let label = label
            .parse()
            .map_err(|e| Error::parse(path, i + 1, format!("label {label:?}: {e}")))?;
        let probability = prob
            .parse()
            .map_err(|e| Error::parse(path, i + 1, format!("probability {prob:?}: {e}")))?;
        out.push(LabeledPoint {
            id: id.to_string(),
            label,
            probability,
        });
    }
    Ok(out)
}
