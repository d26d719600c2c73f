use serde::{Deserialize, Serialize};

use super::{HdbscanConfig, MstEdge};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// −1 for outliers, otherwise 0.. numbered by descending cluster size.
    pub labels: Vec<i64>,
    /// Membership strength in [0, 1]; 0 for outliers.
    pub probabilities: Vec<f64>,
    /// Excess-of-mass stability of each cluster, indexed by label. Clusters
    /// containing coincident points have infinite stability, stored in JSON
    /// as the string "inf".
    #[serde(with = "extended_floats")]
    pub stabilities: Vec<f64>,
}

mod extended_floats {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| match x {
                x if x.is_finite() => Repr::Number(x),
                x if x.is_nan() => Repr::Text("nan".into()),
                x if x > 0.0 => Repr::Text("inf".into()),
                _ => Repr::Text("-inf".into()),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Number(x) => Ok(x),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(serde::de::Error::custom(format!("invalid float {t:?}"))),
                },
            })
            .collect()
    }
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.stabilities.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count()];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Merge `n + i` joins `left` and `right` at `distance`.
#[derive(Debug, Clone, Copy)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut order: Vec<usize> = (0..mst.len()).collect();
    order.sort_by(|&a, &b| mst[a].weight.total_cmp(&mst[b].weight).then(a.cmp(&b)));
    let mut uf = UnionFind::new(2 * n);
    let mut node_of: Vec<usize> = (0..2 * n).collect();
    let mut sizes = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in order.into_iter().map(|i| mst[i]) {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let (left, right) = (node_of[ra], node_of[rb]);
        let node = n + merges.len();
        let size = sizes[left] + sizes[right];
        merges.push(Merge {
            left,
            right,
            distance: e.weight,
            size,
        });
        sizes[node] = size;
        uf.parent[rb] = ra;
        node_of[ra] = node;
    }
    merges
}

/// One row of the condensed tree: `child` (a point below `n`, or a cluster)
/// leaves `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Row {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

/// Walks the dendrogram top-down keeping only splits where both sides have
/// at least `min_size` points. Merges at distance zero are never split: the
/// points below them leave the current cluster at λ = ∞. Cluster ids start
/// at `n` (the root).
fn condense(n: usize, merges: &[Merge], min_size: usize) -> Vec<Row> {
    let size = |x: usize| if x < n { 1 } else { merges[x - n].size };
    let root = n + merges.len() - 1;
    let mut rows = Vec::new();
    let mut next_label = n + 1;
    let mut stack = vec![(root, n)];
    let mut buf = Vec::new();
    while let Some((node, cluster)) = stack.pop() {
        let m = merges[node - n];
        let fall_out = |x: usize, lambda: f64, rows: &mut Vec<Row>, buf: &mut Vec<usize>| {
            buf.clear();
            leaves(n, merges, x, buf);
            rows.extend(buf.iter().map(|&p| Row {
                parent: cluster,
                child: p,
                lambda,
                size: 1,
            }));
        };
        if m.distance <= 0.0 {
            fall_out(node, f64::INFINITY, &mut rows, &mut buf);
            continue;
        }
        let lambda = 1.0 / m.distance;
        let (l, r) = (m.left, m.right);
        let (big_l, big_r) = (size(l) >= min_size, size(r) >= min_size);
        match (big_l, big_r) {
            (true, true) => {
                for child in [l, r] {
                    let label = next_label;
                    next_label += 1;
                    rows.push(Row {
                        parent: cluster,
                        child: label,
                        lambda,
                        size: size(child),
                    });
                    stack.push((child, label));
                }
            }
            (false, false) => {
                fall_out(l, lambda, &mut rows, &mut buf);
                fall_out(r, lambda, &mut rows, &mut buf);
            }
            (true, false) | (false, true) => {
                let (keep, drop) = if big_l { (l, r) } else { (r, l) };
                fall_out(drop, lambda, &mut rows, &mut buf);
                if keep < n {
                    rows.push(Row {
                        parent: cluster,
                        child: keep,
                        lambda,
                        size: 1,
                    });
                } else {
                    stack.push((keep, cluster));
                }
            }
        }
    }
    rows
}

fn check_tree(n: usize, mst: &[MstEdge]) -> Result<()> {
    if n > 0 && mst.len() != n - 1 {
        return Err(Error::Validation(format!(
            "spanning tree over {n} points has {} edges",
            mst.len()
        )));
    }
    Ok(())
}

/// Parent links of the condensed tree, indexed by cluster id minus `n`.
struct Links {
    birth: Vec<f64>,
    parent_of: Vec<usize>,
    children: Vec<Vec<usize>>,
    point_parent: Vec<usize>,
    point_lambda: Vec<f64>,
}

fn links(n: usize, rows: &[Row]) -> Links {
    let n_clusters = 1 + rows.iter().filter(|r| r.child >= n).count();
    let mut l = Links {
        birth: vec![0.0; n_clusters],
        parent_of: vec![usize::MAX; n_clusters],
        children: vec![Vec::new(); n_clusters],
        point_parent: vec![usize::MAX; n],
        point_lambda: vec![0.0; n],
    };
    for r in rows {
        if r.child >= n {
            l.birth[r.child - n] = r.lambda;
            l.parent_of[r.child - n] = r.parent;
            l.children[r.parent - n].push(r.child);
        } else {
            l.point_parent[r.child] = r.parent;
            l.point_lambda[r.child] = r.lambda;
        }
    }
    l
}

/// Member sets of every non-root cluster in the condensed tree, each sorted
/// and listed in lexicographic order. Depends only on the rank order of the
/// edge weights.
pub fn condensed_clusters(n: usize, mst: &[MstEdge], min_cluster_size: usize) -> Result<Vec<Vec<usize>>> {
    check_tree(n, mst)?;
    if n < min_cluster_size.max(2) {
        return Ok(Vec::new());
    }
    let rows = condense(n, &single_linkage(n, mst), min_cluster_size);
    let l = links(n, &rows);
    let mut members = vec![Vec::new(); l.birth.len()];
    for p in 0..n {
        let mut c = l.point_parent[p];
        while c != n {
            members[c - n].push(p);
            c = l.parent_of[c - n];
        }
    }
    let mut out: Vec<Vec<usize>> = members.into_iter().skip(1).collect();
    out.sort();
    Ok(out)
}

/// Clusters the spanning tree of `n` points.
pub fn condense_and_extract(n: usize, mst: &[MstEdge], cfg: &HdbscanConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    check_tree(n, mst)?;
    if n < cfg.min_cluster_size.max(2) {
        return Ok(ClusterAssignment {
            labels: vec![-1; n],
            probabilities: vec![0.0; n],
            stabilities: Vec::new(),
        });
    }
    let merges = single_linkage(n, mst);
    let rows = condense(n, &merges, cfg.min_cluster_size);
    let Links {
        birth,
        parent_of,
        children,
        point_parent,
        point_lambda,
    } = links(n, &rows);
    let n_clusters = birth.len();
    let idx = |c: usize| c - n;

    let mut stability = vec![0.0f64; n_clusters];
    for r in &rows {
        stability[idx(r.parent)] += (r.lambda - birth[idx(r.parent)]) * r.size as f64;
    }

    // Children always carry larger ids than their parents.
    let mut selected = vec![false; n_clusters];
    let mut subtree = stability.clone();
    for c in (1..n_clusters).rev() {
        let child_sum: f64 = children[c].iter().map(|&k| subtree[idx(k)]).sum();
        if !children[c].is_empty() && child_sum > stability[c] {
            subtree[c] = child_sum;
        } else {
            selected[c] = true;
            let mut stack = children[c].clone();
            while let Some(k) = stack.pop() {
                selected[idx(k)] = false;
                stack.extend(children[idx(k)].iter().copied());
            }
        }
    }

    // Highest λ among the rows leaving each cluster directly.
    let mut max_lambda = vec![0.0f64; n_clusters];
    for r in &rows {
        let m = &mut max_lambda[idx(r.parent)];
        *m = m.max(r.lambda);
    }

    let root_only = n_clusters == 1;
    let root_max = rows
        .iter()
        .filter(|r| r.parent == n)
        .map(|r| r.lambda)
        .fold(0.0, f64::max);
    let mut cluster_of = vec![usize::MAX; n];
    for p in 0..n {
        if root_only {
            if point_lambda[p] >= root_max {
                cluster_of[p] = n;
            }
            continue;
        }
        let mut c = point_parent[p];
        while c != n {
            if selected[idx(c)] {
                cluster_of[p] = c;
                break;
            }
            c = parent_of[idx(c)];
        }
    }

    // (cluster, size, first member), ordered by size then first member
    let mut found: Vec<(usize, usize, usize)> = (0..n_clusters).map(|c| (c + n, 0, usize::MAX)).collect();
    for (p, &c) in cluster_of.iter().enumerate() {
        if c != usize::MAX {
            let f = &mut found[idx(c)];
            f.1 += 1;
            f.2 = f.2.min(p);
        }
    }
    found.retain(|f| f.1 > 0);
    found.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut label_of = vec![-1i64; n_clusters];
    let mut stabilities = Vec::with_capacity(found.len());
    for (label, &(c, _, _)) in found.iter().enumerate() {
        label_of[idx(c)] = label as i64;
        stabilities.push(stability[idx(c)]);
    }
    let mut labels = vec![-1i64; n];
    let mut probabilities = vec![0.0; n];
    for p in 0..n {
        let c = cluster_of[p];
        if c == usize::MAX {
            continue;
        }
        labels[p] = label_of[idx(c)];
        let (lp, lm) = (point_lambda[p], max_lambda[idx(c)]);
        probabilities[p] = if lm == 0.0 || !lp.is_finite() || lp >= lm {
            1.0
        } else {
            lp / lm
        };
    }
    Ok(ClusterAssignment {
        labels,
        probabilities,
        stabilities,
    })
}
