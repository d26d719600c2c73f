use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Topic;
use crate::error::{Error, Result};
use crate::io::EmbeddingMatrix;

/// Row indices per cluster, outliers dropped, clusters in label order.
fn groups(x: &EmbeddingMatrix, labels: &[i64]) -> Result<Vec<Vec<usize>>> {
    if labels.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: labels.len(),
        });
    }
    let mut by_label: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            by_label.entry(l).or_default().push(i);
        }
    }
    if by_label.len() < 2 {
        return Err(Error::MetricUndefined(format!(
            "{} cluster(s) after excluding outliers; at least 2 required",
            by_label.len()
        )));
    }
    Ok(by_label.into_values().collect())
}

fn euclid(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn centroid(x: &EmbeddingMatrix, rows: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.dim()];
    for &i in rows {
        for (s, &v) in c.iter_mut().zip(x.row(i)) {
            *s += v as f64;
        }
    }
    c.iter_mut().for_each(|s| *s /= rows.len() as f64);
    c
}

fn row64(x: &EmbeddingMatrix, i: usize) -> Vec<f64> {
    x.row(i).iter().map(|&v| v as f64).collect()
}

/// Mean silhouette over non-outlier points under Euclidean distance. Points
/// in singleton clusters score 0.
pub fn silhouette(x: &EmbeddingMatrix, labels: &[i64]) -> Result<f64> {
    let groups = groups(x, labels)?;
    let members: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, rows)| rows.iter().map(move |&i| (g, i)))
        .collect();
    let total: f64 = members
        .par_iter()
        .map(|&(g, i)| {
            if groups[g].len() == 1 {
                return 0.0;
            }
            let mean_to = |rows: &[usize]| rows.iter().map(|&j| euclid(x.row(i), x.row(j))).sum::<f64>();
            let a = mean_to(&groups[g]) / (groups[g].len() - 1) as f64;
            let b = groups
                .iter()
                .enumerate()
                .filter(|&(h, _)| h != g)
                .map(|(_, rows)| mean_to(rows) / rows.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / members.len() as f64)
}

/// Ratio of between- to within-cluster dispersion, each divided by its
/// degrees of freedom. Outliers are excluded.
pub fn calinski_harabasz(x: &EmbeddingMatrix, labels: &[i64]) -> Result<f64> {
    let groups = groups(x, labels)?;
    let all: Vec<usize> = groups.iter().flatten().copied().collect();
    let (n, t) = (all.len(), groups.len());
    if n == t {
        return Err(Error::MetricUndefined("every cluster is a singleton".into()));
    }
    let mean = centroid(x, &all);
    let mut between = 0.0;
    let mut within = 0.0;
    for rows in &groups {
        let c = centroid(x, rows);
        between += rows.len() as f64 * sq_dist(&c, &mean);
        within += rows.iter().map(|&i| sq_dist(&row64(x, i), &c)).sum::<f64>();
    }
    if within == 0.0 {
        return Err(Error::MetricUndefined("within-cluster dispersion is zero".into()));
    }
    Ok(between * (n - t) as f64 / (within * (t - 1) as f64))
}

/// Mean over clusters of the worst (s_i + s_j) / d_ij, where s is the mean
/// distance to the centroid and d the distance between centroids. Pairs of
/// coincident centroids are skipped.
pub fn davies_bouldin(x: &EmbeddingMatrix, labels: &[i64]) -> Result<f64> {
    let groups = groups(x, labels)?;
    let centroids: Vec<Vec<f64>> = groups.iter().map(|rows| centroid(x, rows)).collect();
    let scatter: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(rows, c)| rows.iter().map(|&i| sq_dist(&row64(x, i), c).sqrt()).sum::<f64>() / rows.len() as f64)
        .collect();
    let t = groups.len();
    let worst = (0..t).map(|i| {
        (0..t)
            .filter(|&j| j != i)
            .filter_map(|j| {
                let d = sq_dist(&centroids[i], &centroids[j]).sqrt();
                (d > 0.0).then(|| (scatter[i] + scatter[j]) / d)
            })
            .fold(0.0, f64::max)
    });
    Ok(worst.sum::<f64>() / t as f64)
}

/// Unique terms over the top-`k` descriptors of every topic, divided by the
/// number of descriptors considered.
pub fn topic_diversity(topics: &[Topic], k: usize) -> Result<f64> {
    let mut unique = HashSet::new();
    let mut total = 0usize;
    for t in topics {
        for term in t.terms().take(k) {
            unique.insert(term);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::MetricUndefined("no topic descriptors".into()));
    }
    Ok(unique.len() as f64 / total as f64)
}

pub fn outlier_rate(labels: &[i64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Parameter("no labels".into()));
    }
    Ok(labels.iter().filter(|&&l| l < 0).count() as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub count: usize,
    pub avg_docs: f64,
    /// Population standard deviation.
    pub sd_docs: f64,
}

/// Topic count and per-topic document count moments, outliers excluded.
pub fn topic_stats(labels: &[i64]) -> Result<TopicStats> {
    if labels.is_empty() {
        return Err(Error::Parameter("no labels".into()));
    }
    let mut sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l >= 0) {
        *sizes.entry(l).or_default() += 1;
    }
    let count = sizes.len();
    if count == 0 {
        return Ok(TopicStats {
            count: 0,
            avg_docs: 0.0,
            sd_docs: 0.0,
        });
    }
    let avg = sizes.values().sum::<usize>() as f64 / count as f64;
    let var = sizes.values().map(|&s| (s as f64 - avg).powi(2)).sum::<f64>() / count as f64;
    Ok(TopicStats {
        count,
        avg_docs: avg,
        sd_docs: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::Descriptor;

    fn points(rows: &[[f32; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            (0..rows.len()).map(|i| i.to_string()).collect(),
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn topic(label: i64, terms: &[&str]) -> Topic {
        Topic {
            label,
            doc_count: 2,
            descriptors: terms
                .iter()
                .map(|t| Descriptor {
                    term: t.to_string(),
                    weight: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn coincident_pairs_far_apart() {
        let x = points(&[[0.0, 0.0], [0.0, 0.0], [9.0, 9.0], [9.0, 9.0]]);
        let labels = [0, 0, 1, 1];
        assert_eq!(silhouette(&x, &labels).unwrap(), 1.0);
        assert_eq!(davies_bouldin(&x, &labels).unwrap(), 0.0);
        assert!(matches!(calinski_harabasz(&x, &labels), Err(Error::MetricUndefined(_))));
    }

    #[test]
    fn one_cluster_is_undefined() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]);
        for f in [silhouette, calinski_harabasz, davies_bouldin] {
            assert!(matches!(f(&x, &[0, 0, -1]), Err(Error::MetricUndefined(_))));
        }
    }

    #[test]
    fn outliers_are_ignored() {
        let x = points(&[[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0], [100.0, 100.0]]);
        let with = silhouette(&x, &[0, 0, 1, 1, -1]).unwrap();
        let without = silhouette(&points(&[[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0]]), &[0, 0, 1, 1]).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn calinski_harabasz_by_hand() {
        // centroids (0, 0.5) and (4, 0.5), grand mean (2, 0.5)
        let x = points(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]]);
        // between = 4 · 4 = 16, within = 4 · 0.25 = 1, ratio 16 · 2 / 1
        assert!((calinski_harabasz(&x, &[0, 0, 1, 1]).unwrap() - 32.0).abs() < 1e-12);
        // s = 0.5 each, d = 4
        assert!((davies_bouldin(&x, &[0, 0, 1, 1]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn diversity_cases() {
        let same = [topic(0, &["a", "b"]), topic(1, &["a", "b"]), topic(2, &["a", "b"])];
        assert!((topic_diversity(&same, 10).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let disjoint = [topic(0, &["a", "b"]), topic(1, &["c"])];
        assert_eq!(topic_diversity(&disjoint, 10).unwrap(), 1.0);
        assert_eq!(topic_diversity(&same[..1], 10).unwrap(), 1.0);
        // truncation to k
        assert_eq!(topic_diversity(&[topic(0, &["a", "b"]), topic(1, &["a", "c"])], 1).unwrap(), 0.5);
    }

    #[test]
    fn stats_by_hand() {
        let labels = [-1, 0, 0, 1];
        assert_eq!(outlier_rate(&labels).unwrap(), 0.25);
        let s = topic_stats(&labels).unwrap();
        assert_eq!((s.count, s.avg_docs, s.sd_docs), (2, 1.5, 0.5));
        assert_eq!(outlier_rate(&[0, 1]).unwrap(), 0.0);
        assert_eq!(outlier_rate(&[-1, -1]).unwrap(), 1.0);
        assert_eq!(topic_stats(&[-1, -1]).unwrap().count, 0);
    }
}
