mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use finkit_core::error::Error;
use finkit_core::pipeline::{run_pipeline, PipelineConfig};
use finkit_core::topics::load_topics;

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn fixture_run_is_reproducible() {
    let a = common::fixture_copy();
    let b = common::fixture_copy();
    let t0 = Instant::now();
    let cfg = PipelineConfig::load(a.path().join("pipeline.toml")).unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    eprintln!("fixture run {:.2?}: {:?}", t0.elapsed(), outcome.report);
    let r = &outcome.report;
    assert!((0.0..=1.0).contains(&r.topic_diversity));
    assert!(r.topic_count >= 2);

    let cfg_b = PipelineConfig::load(b.path().join("pipeline.toml")).unwrap();
    run_pipeline(&cfg_b).unwrap();
    let (ta, tb) = (tree(&a.path().join("out")), tree(&b.path().join("out")));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{k} differs");
    }

    let topics_file = ta.keys().find(|k| k.ends_with("topics.jsonl")).unwrap();
    let topics = load_topics(a.path().join("out").join(topics_file)).unwrap();
    for t in topics.iter().filter(|t| !t.is_outlier()).take(12) {
        eprintln!("{:>3} {:>4} {:?}", t.label, t.doc_count, t.terms().take(6).collect::<Vec<_>>());
    }
}

#[test]
fn second_run_reuses_every_stage() {
    let dir = common::fixture_copy();
    let cfg = PipelineConfig::load(dir.path().join("pipeline.toml")).unwrap();
    let first = run_pipeline(&cfg).unwrap();
    assert!(first.stages.iter().all(|s| !s.reused));
    let second = run_pipeline(&cfg).unwrap();
    assert!(second.stages.iter().all(|s| s.reused));
    assert_eq!(first.report, second.report);

    let mut changed = cfg.clone();
    changed.topics.top_k = 5;
    let third = run_pipeline(&changed).unwrap();
    let reused: Vec<bool> = third.stages.iter().map(|s| s.reused).collect();
    assert_eq!(reused, [true, true, false, false]);
}

#[test]
fn stage_failure_names_the_stage_and_keeps_earlier_artifacts() {
    let dir = common::fixture_copy();
    let mut cfg = PipelineConfig::load(dir.path().join("pipeline.toml")).unwrap();
    // an id missing from the corpus breaks the topics stage
    let corpus = fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    let trimmed: String = corpus.lines().skip(1).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("short.jsonl"), trimmed).unwrap();
    cfg.corpus = "short.jsonl".into();
    let err = run_pipeline(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(stage, "topics"),
        e => panic!("unexpected error {e}"),
    }
    let out = tree(&dir.path().join("out"));
    assert!(out.keys().any(|k| k.ends_with("embedding.fkem")));
    assert!(out.keys().any(|k| k.ends_with("assignment.json")));
    assert!(!out.keys().any(|k| k.ends_with("topics.jsonl")));
}

#[test]
fn judge_stub_scores_land_in_the_report() {
    let dir = common::fixture_copy();
    let reply = r#"{"Evaluation": {"Coherence": {"Score": 3, "Explanation": "x"}, "Conciseness": {"Score": 2, "Explanation": "x"}, "Informativity": {"Score": 1, "Explanation": "x"}}}"#;
    fs::write(dir.path().join("replies.txt"), format!("{reply}\n")).unwrap();
    let mut cfg = PipelineConfig::load(dir.path().join("pipeline.toml")).unwrap();
    cfg.judge = Some(
        toml::from_str(
            "stub = \"replies.txt\"\nsample = 200\nseed = 1\nattempts = 1\nconcurrency = 2\n",
        )
        .unwrap(),
    );
    let out = run_pipeline(&cfg).unwrap();
    let s = out.report.judge_scores.unwrap();
    assert_eq!((s.coherence, s.conciseness, s.informativity), (3.0, 2.0, 1.0));
    let files = tree(&dir.path().join("out"));
    assert!(files.keys().any(|k| k.ends_with("judge_transcript.jsonl")));
}
