//! Topic descriptors by c-TF-IDF and label-free topic model evaluation.

mod ctfidf;
mod judge;
mod metrics;

use serde::{Deserialize, Serialize};

pub use ctfidf::{
    build_topics, ctfidf, format_topics, load_topics, top_terms, write_topics, Descriptor, TermCounts, TermWeights,
    Topic,
};
pub use judge::{
    judge_topics, parse_scores, render_prompt, JudgeConfig, JudgeOutcome, JudgeScores, TranscriptEntry, CRITERIA,
};
pub use metrics::{
    calinski_harabasz, davies_bouldin, outlier_rate, silhouette, topic_diversity, topic_stats, TopicStats,
};

use crate::error::{Error, Result};
use crate::io::EmbeddingMatrix;

pub const DEFAULT_TOP_K: usize = 10;

/// Every label-free evaluation figure for one clustering. The three
/// clustering indices are `None` when undefined for the labels (fewer than
/// two clusters, or zero within-cluster dispersion for Calinski–Harabasz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEvalReport {
    pub silhouette: Option<f64>,
    pub calinski_harabasz: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub topic_diversity: f64,
    pub outlier_rate: f64,
    pub topic_count: usize,
    pub avg_docs_per_topic: f64,
    pub sd_docs_per_topic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_scores: Option<JudgeScores>,
}

fn defined(r: Result<f64>, name: &str) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::MetricUndefined(why)) => {
            log::warn!("{name} undefined: {why}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Computes the report from the clustered points, their labels and the
/// topics built from them. Outlier topics do not count towards diversity.
pub fn evaluate_topics(x: &EmbeddingMatrix, labels: &[i64], topics: &[Topic], k: usize) -> Result<TopicEvalReport> {
    let stats = topic_stats(labels)?;
    let clusters: Vec<Topic> = topics.iter().filter(|t| !t.is_outlier()).cloned().collect();
    let diversity = if clusters.is_empty() {
        log::warn!("no clusters; topic diversity reported as 0");
        0.0
    } else {
        topic_diversity(&clusters, k)?
    };
    Ok(TopicEvalReport {
        silhouette: defined(silhouette(x, labels), "silhouette")?,
        calinski_harabasz: defined(calinski_harabasz(x, labels), "Calinski-Harabasz")?,
        davies_bouldin: defined(davies_bouldin(x, labels), "Davies-Bouldin")?,
        topic_diversity: diversity,
        outlier_rate: outlier_rate(labels)?,
        topic_count: stats.count,
        avg_docs_per_topic: stats.avg_docs,
        sd_docs_per_topic: stats.sd_docs,
        judge_scores: None,
    })
}
