use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::retrieval::TrainingTriplet;

/// Reads JSON-lines triplets, checking positives and negatives are disjoint.
pub fn load_triplets(path: impl AsRef<Path>) -> Result<Vec<TrainingTriplet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrainingTriplet = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        t.validate()
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_triplets(triplets: &[TrainingTriplet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triplets {
        t.validate()?;
        let line = serde_json::to_string(t).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
