use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Topic;
use crate::error::{Error, Result};
use crate::judge::{PromptRequest, TopicJudge};

pub const CRITERIA: [&str; 3] = ["Coherence", "Conciseness", "Informativity"];

/// Renders the evaluation prompt for one descriptor list.
pub fn render_prompt<S: AsRef<str>>(terms: &[S]) -> String {
    let list: Vec<&str> = terms.iter().map(AsRef::as_ref).collect();
    let list = serde_json::to_string(&list).expect("strings serialize");
    format!(
        r#"Evaluate the topic keyword list below against three topic quality criteria. For each criterion give a score from 1 to 3 and a short explanation of the score.

Criteria:
1. Coherence
   The keywords are semantically related and together describe one topic or a few closely related topics.
2. Conciseness
   The topic contains no irrelevant or meaningless words, such as noise words or semantically redundant terms.
3. Informativity
   The topic gives sufficient, specific and meaningful information, covering different aspects of the same subject.

Scoring:
1 point: poor, does not meet the criterion.
2 points: average, partially meets the criterion.
3 points: excellent, fully meets the criterion.

Input: {list}

Reply with JSON in exactly this shape:
{{
  "Topic Keyword List": ["strategy", "market", "investment", "risk", "return"],
  "Evaluation": {{
    "Coherence": {{"Score": 3, "Explanation": "..."}},
    "Conciseness": {{"Score": 3, "Explanation": "..."}},
    "Informativity": {{"Score": 2, "Explanation": "..."}}
  }}
}}"#
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub coherence: f64,
    pub conciseness: f64,
    pub informativity: f64,
}

impl JudgeScores {
    pub fn overall(&self) -> f64 {
        (self.coherence + self.conciseness + self.informativity) / 3.0
    }
}

/// Extracts the three integer scores from a reply. The JSON object is taken
/// from the first `{` to the last `}` so surrounding prose is tolerated.
/// Every criterion needs a score in 1..=3 and a string explanation.
pub fn parse_scores(reply: &str) -> Result<[u8; 3]> {
    let bad = |m: String| Error::Judge(format!("malformed judge reply: {m}"));
    let (start, end) = match (reply.find('{'), reply.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(bad("no JSON object".into())),
    };
    let v: Value = serde_json::from_str(&reply[start..=end]).map_err(|e| bad(e.to_string()))?;
    let eval = v.get("Evaluation").ok_or_else(|| bad("missing \"Evaluation\"".into()))?;
    let mut out = [0u8; 3];
    for (slot, name) in out.iter_mut().zip(CRITERIA) {
        let c = eval.get(name).ok_or_else(|| bad(format!("missing {name:?}")))?;
        let score = c
            .get("Score")
            .and_then(Value::as_u64)
            .filter(|s| (1..=3).contains(s))
            .ok_or_else(|| bad(format!("{name} score missing or outside 1..=3")))?;
        if !c.get("Explanation").is_some_and(Value::is_string) {
            return Err(bad(format!("{name} explanation missing")));
        }
        *slot = score as u8;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub sample: usize,
    pub seed: u64,
    /// Calls per topic, including the first.
    pub attempts: usize,
    pub concurrency: usize,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            sample: 200,
            seed: 42,
            attempts: 2,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub label: i64,
    pub attempt: usize,
    pub prompt: String,
    /// Raw reply, or the transport error.
    pub reply: std::result::Result<String, String>,
    pub scores: Option<[u8; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub scores: JudgeScores,
    pub judged: usize,
    pub skipped: usize,
    pub transcript: Vec<TranscriptEntry>,
}

/// Sample indices without replacement, returned in ascending order.
fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Scores a seeded sample of non-outlier topics. Each topic is tried up to
/// `cfg.attempts` times; topics whose replies never parse are skipped and
/// counted. Fails when no topic could be scored.
pub fn judge_topics(topics: &[Topic], cfg: &JudgeConfig, judge: &dyn TopicJudge) -> Result<JudgeOutcome> {
    if cfg.concurrency == 0 || cfg.attempts == 0 {
        return Err(Error::Parameter("judge concurrency and attempts must be positive".into()));
    }
    let pool: Vec<&Topic> = topics.iter().filter(|t| !t.is_outlier()).collect();
    if pool.is_empty() {
        return Err(Error::Parameter("no topics to judge".into()));
    }
    let picked = sample_indices(pool.len(), cfg.sample, cfg.seed);
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let transcript = Mutex::new(Vec::new());
    let results: Vec<Option<[u8; 3]>> = threads.install(|| {
        picked
            .par_iter()
            .enumerate()
            .map(|(index, &i)| {
                let topic = pool[i];
                let terms: Vec<&str> = topic.terms().collect();
                let prompt = render_prompt(&terms);
                let mut entries = Vec::new();
                let mut scores = None;
                for attempt in 0..cfg.attempts {
                    let reply = judge.complete(&PromptRequest {
                        index,
                        attempt,
                        prompt: &prompt,
                    });
                    let parsed = reply.as_ref().ok().and_then(|r| parse_scores(r).ok());
                    entries.push(TranscriptEntry {
                        label: topic.label,
                        attempt,
                        prompt: prompt.clone(),
                        reply: reply.map_err(|e| e.to_string()),
                        scores: parsed,
                    });
                    if parsed.is_some() {
                        scores = parsed;
                        break;
                    }
                }
                if scores.is_none() {
                    log::warn!("judge gave no usable reply for topic {}", topic.label);
                }
                transcript.lock().unwrap().push((index, entries));
                scores
            })
            .collect()
    });
    let mut log = transcript.into_inner().unwrap();
    log.sort_by_key(|(i, _)| *i);
    let transcript: Vec<TranscriptEntry> = log.into_iter().flat_map(|(_, e)| e).collect();

    let ok: Vec<[u8; 3]> = results.iter().flatten().copied().collect();
    let skipped = results.len() - ok.len();
    if ok.is_empty() {
        let detail: Vec<String> = transcript
            .iter()
            .map(|e| format!("topic {} attempt {}: {:?}", e.label, e.attempt, e.reply))
            .collect();
        return Err(Error::Judge(format!(
            "all {} judge replies were unusable:\n{}",
            results.len(),
            detail.join("\n")
        )));
    }
    let mean = |c: usize| ok.iter().map(|s| s[c] as f64).sum::<f64>() / ok.len() as f64;
    Ok(JudgeOutcome {
        scores: JudgeScores {
            coherence: mean(0),
            conciseness: mean(1),
            informativity: mean(2),
        },
        judged: ok.len(),
        skipped,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::StubTopicJudge;
    use crate::topics::Descriptor;

    fn reply(c: u8, s: u8, i: u8) -> String {
        format!(
            r#"Here you go: {{"Topic Keyword List": [], "Evaluation": {{"Coherence": {{"Score": {c}, "Explanation": "x"}}, "Conciseness": {{"Score": {s}, "Explanation": "y"}}, "Informativity": {{"Score": {i}, "Explanation": "z"}}}}}} done"#
        )
    }

    fn topics(n: usize) -> Vec<Topic> {
        (0..n as i64)
            .map(|l| Topic {
                label: l,
                doc_count: 3,
                descriptors: vec![Descriptor {
                    term: format!("t{l}"),
                    weight: 1.0,
                }],
            })
            .collect()
    }

    #[test]
    fn prompt_embeds_terms_as_json() {
        let p = render_prompt(&["利率", "bond \"A\""]);
        assert!(p.contains(r#"Input: ["利率","bond \"A\""]"#));
        for c in CRITERIA {
            assert!(p.contains(c));
        }
    }

    #[test]
    fn parses_embedded_json() {
        assert_eq!(parse_scores(&reply(1, 2, 3)).unwrap(), [1, 2, 3]);
        assert!(parse_scores(&reply(4, 2, 3)).is_err());
        assert!(parse_scores("no json").is_err());
        let missing = r#"{"Evaluation": {"Coherence": {"Score": 2, "Explanation": ""}, "Conciseness": {"Score": 2}}}"#;
        assert!(parse_scores(missing).is_err());
    }

    #[test]
    fn constant_judge() {
        let judge = StubTopicJudge::new(vec![reply(3, 3, 3)]).unwrap();
        let out = judge_topics(&topics(5), &JudgeConfig::default(), &judge).unwrap();
        assert_eq!((out.scores.coherence, out.scores.conciseness, out.scores.informativity), (3.0, 3.0, 3.0));
        assert_eq!((out.judged, out.skipped), (5, 0));
    }

    #[test]
    fn alternating_judge_averages_to_two() {
        let judge = StubTopicJudge::new(vec![reply(1, 2, 2), reply(3, 2, 2)]).unwrap();
        let out = judge_topics(&topics(10), &JudgeConfig::default(), &judge).unwrap();
        assert_eq!(out.scores.coherence, 2.0);
    }

    #[test]
    fn malformed_reply_is_retried_then_skipped() {
        let judge = |r: &PromptRequest<'_>| -> Result<String> {
            Ok(match (r.index, r.attempt) {
                (0, 0) => "{}".to_string(),
                (1, _) => "garbage".to_string(),
                _ => reply(2, 2, 2),
            })
        };
        let out = judge_topics(&topics(3), &JudgeConfig::default(), &judge).unwrap();
        assert_eq!((out.judged, out.skipped), (2, 1));
        // topic 0 twice, topic 1 twice, topic 2 once
        assert_eq!(out.transcript.len(), 5);
    }

    #[test]
    fn all_malformed_is_an_error() {
        let judge = StubTopicJudge::new(vec!["nope".into()]).unwrap();
        let err = judge_topics(&topics(2), &JudgeConfig::default(), &judge).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn sample_is_seeded_and_bounded() {
        let seen = Mutex::new(Vec::new());
        let judge = |r: &PromptRequest<'_>| -> Result<String> {
            seen.lock().unwrap().push(r.prompt.to_string());
            Ok(reply(2, 2, 2))
        };
        let cfg = JudgeConfig {
            sample: 4,
            ..JudgeConfig::default()
        };
        let out = judge_topics(&topics(20), &cfg, &judge).unwrap();
        assert_eq!(out.judged, 4);
        let first: Vec<i64> = out.transcript.iter().map(|e| e.label).collect();
        let again: Vec<i64> = judge_topics(&topics(20), &cfg, &judge).unwrap().transcript.iter().map(|e| e.label).collect();
        assert_eq!(first, again);
        assert!(first.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn outlier_topic_is_never_judged() {
        let mut ts = topics(2);
        ts[0].label = -1;
        let out = judge_topics(&ts, &JudgeConfig::default(), &StubTopicJudge::new(vec![reply(1, 1, 1)]).unwrap()).unwrap();
        assert_eq!(out.judged, 1);
        assert_eq!(out.transcript[0].label, 1);
    }
}
