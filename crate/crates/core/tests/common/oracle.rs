//! Straight-from-the-definition reference implementations. They favour
//! brute force over speed and share no code with the library beyond
//! character classes and the cosine arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use finkit_core::io::EmbeddingMatrix;
use finkit_core::tokenize::{is_cjk, is_punctuation, TokenKind};

pub fn recall(ranking: &[&str], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let relevant: Vec<&String> = judged.iter().filter(|(_, &r)| r > 0).map(|(d, _)| d).collect();
    let mut hits = 0;
    for d in &relevant {
        if ranking.iter().take(k).any(|r| r == d) {
            hits += 1;
        }
    }
    hits as f64 / relevant.len() as f64
}

fn dcg(gains: &[u32]) -> f64 {
    let mut s = 0.0;
    for (i, &g) in gains.iter().enumerate() {
        s += g as f64 / ((i + 2) as f64).log2();
    }
    s
}

/// Visits every ordering of `items` (Heap's algorithm).
fn permutations(items: &mut Vec<u32>, n: usize, visit: &mut impl FnMut(&[u32])) {
    if n <= 1 {
        visit(items);
        return;
    }
    for i in 0..n - 1 {
        permutations(items, n - 1, visit);
        if n % 2 == 0 {
            items.swap(i, n - 1);
        } else {
            items.swap(0, n - 1);
        }
    }
    permutations(items, n - 1, visit);
}

/// nDCG@k with linear gain; the ideal DCG is the best over every ordering
/// of the judged documents.
pub fn ndcg(ranking: &[&str], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let gains: Vec<u32> = ranking.iter().take(k).map(|d| judged.get(*d).copied().unwrap_or(0)).collect();
    let mut all: Vec<u32> = judged.values().copied().collect();
    let mut ideal: f64 = 0.0;
    let n = all.len();
    permutations(&mut all, n, &mut |p| {
        let take = &p[..k.min(p.len())];
        ideal = ideal.max(dcg(take));
    });
    dcg(&gains) / ideal
}

/// Every document scored, then the whole list sorted by descending score
/// and ascending id.
pub fn topk(queries: &EmbeddingMatrix, docs: &EmbeddingMatrix, k: usize) -> Vec<(String, Vec<(String, f64)>)> {
    let norm = |v: &[f32]| v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for (qid, q) in queries.ids().iter().zip(queries.rows()) {
        let mut all: Vec<(String, f64)> = docs
            .ids()
            .iter()
            .zip(docs.rows())
            .map(|(id, d)| {
                let dot: f64 = q.iter().zip(d).map(|(&a, &b)| a as f64 * b as f64).sum();
                (id.clone(), (dot / (norm(q) * norm(d))).clamp(-1.0, 1.0))
            })
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        out.push((qid.clone(), all));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

/// Greedy longest-first WordPiece pieces of `s` found by scanning the whole
/// vocabulary at every step. `None` when some step has no match.
fn greedy_pieces(s: &[char], continued: bool, vocab: &[String]) -> Option<Vec<(usize, String)>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < s.len() {
        let marked = at > 0 || continued;
        let mut best: Option<(usize, &String)> = None;
        for t in vocab {
            let body = match (marked, t.strip_prefix("##")) {
                (true, Some(b)) => b,
                (false, None) => t.as_str(),
                _ => continue,
            };
            let body: Vec<char> = body.chars().collect();
            if !body.is_empty() && s[at..].starts_with(&body) && best.is_none_or(|(l, _)| body.len() > l) {
                best = Some((body.len(), t));
            }
        }
        let (len, t) = best?;
        out.push((len, t.clone()));
        at += len;
    }
    Some(out)
}

fn unit_end(chars: &[char], p: usize) -> usize {
    let alone = |c: char| is_cjk(c) || is_punctuation(c);
    if alone(chars[p]) {
        return p + 1;
    }
    let mut e = p;
    while e < chars.len() && !chars[e].is_whitespace() && !alone(chars[e]) {
        e += 1;
    }
    e
}

fn unit_start(chars: &[char], p: usize) -> usize {
    let alone = |c: char| is_cjk(c) || is_punctuation(c);
    if alone(chars[p]) {
        return p;
    }
    let mut s = p;
    while s > 0 && !chars[s - 1].is_whitespace() && !alone(chars[s - 1]) {
        s -= 1;
    }
    s
}

/// (char length, kind, token text) candidates available at `p`.
fn candidates(chars: &[char], p: usize, dict: &[String], vocab: &[String], unk: &str) -> Vec<(usize, TokenKind, String)> {
    let mut out = Vec::new();
    let longest = dict
        .iter()
        .map(|e| e.chars().collect::<Vec<_>>())
        .filter(|e| chars[p..].starts_with(e))
        .map(|e| e.len())
        .max();
    if let Some(l) = longest {
        out.push((l, TokenKind::Dictionary, chars[p..p + l].iter().collect()));
    }
    let (us, ue) = (unit_start(chars, p), unit_end(chars, p));
    match greedy_pieces(&chars[p..ue], p > us, vocab) {
        Some(pieces) => out.push((pieces[0].0, TokenKind::Subword, pieces[0].1.clone())),
        None if longest.is_none() => out.push((ue - p, TokenKind::Unknown, unk.to_string())),
        None => {}
    }
    out
}

fn rank(kind: TokenKind) -> u8 {
    match kind {
        TokenKind::Dictionary => 2,
        TokenKind::Subword => 1,
        TokenKind::Unknown => 0,
    }
}

/// Enumerates every cut sequence built from the candidates available at
/// each cut and returns the one that is lexicographically greatest by
/// (coverage, dictionary preference) at each successive cut.
pub fn merged_tokens(text: &str, dict: &[String], vocab: &[String], unk: &str) -> Vec<OracleToken> {
    let chars: Vec<char> = text.chars().collect();
    let offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let mut sequences: Vec<Vec<(usize, usize, TokenKind, String)>> = Vec::new();
    let mut stack: Vec<(usize, Vec<(usize, usize, TokenKind, String)>)> = vec![(0, Vec::new())];
    while let Some((mut p, seq)) = stack.pop() {
        while p < chars.len() && chars[p].is_whitespace() {
            p += 1;
        }
        if p == chars.len() {
            sequences.push(seq);
            continue;
        }
        for (len, kind, t) in candidates(&chars, p, dict, vocab, unk) {
            let mut next = seq.clone();
            next.push((p, len, kind, t));
            stack.push((p + len, next));
        }
    }
    let key = |s: &Vec<(usize, usize, TokenKind, String)>| -> Vec<(usize, u8)> {
        s.iter().map(|(_, l, k, _)| (*l, rank(*k))).collect()
    };
    let best = sequences.into_iter().max_by(|a, b| key(a).cmp(&key(b))).unwrap_or_default();
    best.into_iter()
        .map(|(p, len, kind, text)| OracleToken {
            text,
            start: offsets[p],
            end: offsets[p + len],
            kind,
        })
        .collect()
}

/// Points as f64 rows, keeping only labels ≥ 0.
fn clusters(x: &[Vec<f64>], labels: &[i64]) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut px = Vec::new();
    let mut pl = Vec::new();
    for (r, &l) in x.iter().zip(labels) {
        if l >= 0 {
            px.push(r.clone());
            pl.push(l);
        }
    }
    (px, pl)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub fn silhouette(x: &[Vec<f64>], labels: &[i64]) -> f64 {
    let (x, labels) = clusters(x, labels);
    let names: BTreeSet<i64> = labels.iter().copied().collect();
    let mut total = 0.0;
    for i in 0..x.len() {
        let mean_to = |c: i64, skip_self: bool| {
            let mut s = 0.0;
            let mut n = 0;
            for j in 0..x.len() {
                if labels[j] == c && !(skip_self && j == i) {
                    s += dist(&x[i], &x[j]);
                    n += 1;
                }
            }
            (s, n)
        };
        let (sa, na) = mean_to(labels[i], true);
        if na == 0 {
            continue;
        }
        let a = sa / na as f64;
        let b = names
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let (s, n) = mean_to(c, false);
                s / n as f64
            })
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / x.len() as f64
}

/// Dispersions from pairwise squared distances: Σ_c (1 / 2n_c) Σ_{i,j∈c} d²
/// for the within part, the same over all points for the total.
pub fn calinski_harabasz(x: &[Vec<f64>], labels: &[i64]) -> f64 {
    let (x, labels) = clusters(x, labels);
    let names: BTreeSet<i64> = labels.iter().copied().collect();
    let sq = |i: usize, j: usize| dist(&x[i], &x[j]).powi(2);
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += sq(i, j);
        }
    }
    total /= 2.0 * n as f64;
    let mut within = 0.0;
    for &c in &names {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let mut s = 0.0;
        for &i in &members {
            for &j in &members {
                s += sq(i, j);
            }
        }
        within += s / (2.0 * members.len() as f64);
    }
    let t = names.len() as f64;
    ((total - within) / (t - 1.0)) / (within / (n as f64 - t))
}

pub fn davies_bouldin(x: &[Vec<f64>], labels: &[i64]) -> f64 {
    let (x, labels) = clusters(x, labels);
    let names: Vec<i64> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let dim = x[0].len();
    let mut cent = Vec::new();
    let mut scatter = Vec::new();
    for &c in &names {
        let members: Vec<&Vec<f64>> = x.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        let m: Vec<f64> = (0..dim).map(|d| members.iter().map(|r| r[d]).sum::<f64>() / members.len() as f64).collect();
        scatter.push(members.iter().map(|r| dist(r, &m)).sum::<f64>() / members.len() as f64);
        cent.push(m);
    }
    let mut sum = 0.0;
    for i in 0..names.len() {
        let mut worst: f64 = 0.0;
        for j in 0..names.len() {
            let d = dist(&cent[i], &cent[j]);
            if i != j && d > 0.0 {
                worst = worst.max((scatter[i] + scatter[j]) / d);
            }
        }
        sum += worst;
    }
    sum / names.len() as f64
}
