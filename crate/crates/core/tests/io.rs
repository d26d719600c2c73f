use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use finkit_core::io::{
    build_quality_split, decode_embeddings, encode_embeddings, format_qrels, format_run, load_corpus,
    load_embeddings, load_qrels, load_run, load_triplets, manifest_path, parse_qrels, parse_run, write_corpus,
    write_embeddings, write_qrels, write_run, write_triplets, Document, EmbeddingMatrix, QRels, Quality,
    QualitySplitConfig, RetrievalRun, ScoredDoc,
};
use finkit_core::retrieval::TrainingTriplet;
use proptest::collection::{btree_map, btree_set, vec};
use proptest::prelude::*;
use tempfile::TempDir;

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_#.-]{1,10}"
}

fn documents() -> impl Strategy<Value = Vec<Document>> {
    btree_map(ident(), ("\\PC{1,40}", btree_map("[a-z]{1,5}", "\\PC{0,8}", 0..3)), 0..12).prop_map(|m| {
        m.into_iter()
            .map(|(id, (text, meta))| Document { id, text, meta })
            .collect()
    })
}

fn matrix() -> impl Strategy<Value = EmbeddingMatrix> {
    (1usize..6, 0usize..8).prop_flat_map(|(dim, n)| {
        vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), dim * n).prop_map(move |data| {
            let ids = (0..n).map(|i| format!("row{i}")).collect();
            EmbeddingMatrix::new(ids, dim, data).unwrap()
        })
    })
}

fn qrels() -> impl Strategy<Value = QRels> {
    btree_map(ident(), btree_map(ident(), 0u32..4, 1..6), 0..6).prop_map(|m| {
        let mut q = QRels::new();
        for (query, docs) in m {
            for (d, r) in docs {
                q.insert(&query, d, r).unwrap();
            }
        }
        q
    })
}

fn run() -> impl Strategy<Value = RetrievalRun> {
    btree_map(ident(), btree_map(ident(), -1e6f64..1e6, 1..8), 0..5).prop_map(|m| {
        let mut r = RetrievalRun::new();
        for (query, scores) in m {
            r.insert_scores(query, scores.into_iter().map(|(d, s)| ScoredDoc::new(d, s)).collect())
                .unwrap();
        }
        r
    })
}

fn triplets() -> impl Strategy<Value = Vec<TrainingTriplet>> {
    vec((ident(), "\\PC{1,30}", btree_set(ident(), 1..4), btree_set(ident(), 0..6)), 0..6).prop_map(|rows| {
        rows.into_iter()
            .map(|(query_id, query_text, pos, neg)| TrainingTriplet {
                query_id,
                query_text,
                negatives: neg.difference(&pos).cloned().collect(),
                positives: pos.into_iter().collect(),
            })
            .collect()
    })
}

fn bits(m: &EmbeddingMatrix) -> Vec<u32> {
    m.data().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn corpus_round_trip(docs in documents()) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&docs, &path).unwrap();
        prop_assert_eq!(load_corpus(&path).unwrap(), docs);
    }

    #[test]
    fn embeddings_round_trip_bit_exact(m in matrix()) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("e.fkem");
        write_embeddings(&m, &path).unwrap();
        let back = load_embeddings(&path).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        prop_assert_eq!(back.dim(), m.dim());
        prop_assert_eq!(bits(&back), bits(&m));
        prop_assert_eq!(encode_embeddings(&back), fs::read(&path).unwrap());
    }

    #[test]
    fn qrels_round_trip(q in qrels()) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("q.tsv");
        write_qrels(&q, &path).unwrap();
        let back = load_qrels(&path).unwrap();
        prop_assert_eq!(format_qrels(&back), format_qrels(&q));
        prop_assert_eq!(back.iter().collect::<Vec<_>>(), q.iter().collect::<Vec<_>>());
    }

    #[test]
    fn run_round_trip_bit_exact(r in run()) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("r.tsv");
        write_run(&r, &path).unwrap();
        let back = load_run(&path).unwrap();
        prop_assert_eq!(back.len(), r.len());
        for (q, ranked) in r.iter() {
            let got = back.ranking(q).unwrap();
            prop_assert_eq!(got.len(), ranked.len());
            for (a, b) in got.iter().zip(ranked) {
                prop_assert_eq!(&a.doc_id, &b.doc_id);
                prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
            }
        }
        prop_assert_eq!(format_run(&back), format_run(&r));
    }

    #[test]
    fn triplets_round_trip(ts in triplets()) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("t.jsonl");
        write_triplets(&ts, &path).unwrap();
        prop_assert_eq!(load_triplets(&path).unwrap(), ts);
    }

    #[test]
    fn quality_split_is_deterministic_and_balanced(
        scores in vec(1u8..=10, 40..200),
        per_class in 1usize..15,
        frac in 0.0f64..0.9,
        seed in any::<u64>(),
    ) {
        let rated: Vec<(String, u8)> = scores.iter().enumerate().map(|(i, &s)| (format!("t{i}"), s)).collect();
        let cfg = QualitySplitConfig { per_class, test_fraction: frac, ..Default::default() };
        let high = scores.iter().filter(|&&s| s > cfg.high_threshold).count();
        let low = scores.iter().filter(|&&s| s < cfg.low_threshold).count();
        match build_quality_split(&rated, &cfg, seed) {
            Ok(a) => {
                prop_assert!(high >= per_class && low >= per_class);
                let b = build_quality_split(&rated, &cfg, seed).unwrap();
                prop_assert_eq!(&a, &b);
                for part in [&a.train, &a.test] {
                    prop_assert_eq!(a.count(part, Quality::High), a.count(part, Quality::Low));
                }
                prop_assert_eq!(a.train.len() + a.test.len(), 2 * per_class);
                let texts: BTreeSet<&str> = a.train.iter().chain(&a.test).map(|t| t.text.as_str()).collect();
                prop_assert_eq!(texts.len(), 2 * per_class);
                let by_text: BTreeMap<&str, u8> = rated.iter().map(|(t, s)| (t.as_str(), *s)).collect();
                for t in a.train.iter().chain(&a.test) {
                    let s = by_text[t.text.as_str()];
                    prop_assert_eq!(t.label == Quality::High, s > cfg.high_threshold);
                }
            }
            Err(_) => prop_assert!(high < per_class || low < per_class),
        }
    }

    #[test]
    fn malformed_text_formats_give_errors_not_panics(text in "(\\PC|\t|\n){0,200}") {
        let origin = Path::new("<fuzz>");
        let _ = parse_qrels(&text, origin);
        let _ = parse_run(&text, origin);
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f");
        fs::write(&path, &text).unwrap();
        let _ = load_corpus(&path);
        let _ = load_triplets(&path);
    }

    #[test]
    fn malformed_embedding_bytes_give_errors_not_panics(
        m in matrix(),
        cut in any::<prop::sample::Index>(),
        flips in vec((any::<prop::sample::Index>(), any::<u8>()), 1..4),
        extra_ids in 0usize..3,
    ) {
        let good = encode_embeddings(&m);
        let truncated = &good[..cut.index(good.len())];
        prop_assert!(decode_embeddings(truncated, m.ids().to_vec()).is_err());
        let mut bad = good.clone();
        for (at, b) in &flips {
            let i = at.index(bad.len());
            bad[i] ^= b;
        }
        let _ = decode_embeddings(&bad, m.ids().to_vec());
        let mut ids = m.ids().to_vec();
        ids.extend((0..extra_ids).map(|i| format!("extra{i}")));
        if extra_ids > 0 {
            prop_assert!(decode_embeddings(&good, ids).is_err());
        }
    }

    #[test]
    fn random_bytes_never_panic_the_embedding_loader(bytes in vec(any::<u8>(), 0..200), ids in vec(ident(), 0..4)) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("e.fkem");
        fs::write(&path, &bytes).unwrap();
        fs::write(manifest_path(&path), ids.join("\n")).unwrap();
        let _ = load_embeddings(&path);
    }
}
