//! Balanced high/low quality dataset built from externally rated texts.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: Quality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub train: Vec<LabeledText>,
    pub test: Vec<LabeledText>,
    pub seed: u64,
}

impl LabeledSplit {
    pub fn count(&self, part: &[LabeledText], label: Quality) -> usize {
        part.iter().filter(|t| t.label == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualitySplitConfig {
    /// Items scored strictly above this are high quality.
    pub high_threshold: u8,
    /// Items scored strictly below this are low quality.
    pub low_threshold: u8,
    pub per_class: usize,
    pub test_fraction: f64,
}

impl Default for QualitySplitConfig {
    fn default() -> Self {
        Self {
            high_threshold: 8,
            low_threshold: 4,
            per_class: 2000,
            test_fraction: 0.10,
        }
    }
}

/// Samples `per_class` texts per quality class and splits each class into
/// train and test by `test_fraction`.
pub fn build_quality_split(
    rated: &[(String, u8)],
    cfg: &QualitySplitConfig,
    seed: u64,
) -> Result<LabeledSplit> {
    if rated.is_empty() {
        return Err(Error::Validation("no rated items".into()));
    }
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::Parameter(format!(
            "test fraction {} outside [0, 1)",
            cfg.test_fraction
        )));
    }
    if let Some((_, s)) = rated.iter().find(|(_, s)| !(1..=10).contains(s)) {
        return Err(Error::Validation(format!("score {s} outside 1..=10")));
    }
    let high: Vec<&str> = rated
        .iter()
        .filter(|(_, s)| *s > cfg.high_threshold)
        .map(|(t, _)| t.as_str())
        .collect();
    let low: Vec<&str> = rated
        .iter()
        .filter(|(_, s)| *s < cfg.low_threshold)
        .map(|(t, _)| t.as_str())
        .collect();
    if high.len() < cfg.per_class || low.len() < cfg.per_class {
        return Err(Error::Capacity {
            required: cfg.per_class,
            high_available: high.len(),
            low_available: low.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_test = (cfg.per_class as f64 * cfg.test_fraction).round() as usize;
    let mut train = Vec::with_capacity(2 * (cfg.per_class - n_test));
    let mut test = Vec::with_capacity(2 * n_test);
    for (pool, label) in [(&high, Quality::High), (&low, Quality::Low)] {
        let picked = index::sample(&mut rng, pool.len(), cfg.per_class);
        for (i, idx) in picked.into_iter().enumerate() {
            let item = LabeledText {
                text: pool[idx].to_string(),
                label,
            };
            if i < n_test {
                test.push(item);
            } else {
                train.push(item);
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(LabeledSplit { train, test, seed })
}
