//! External LLM judges.
//!
//! Two wire contracts, both JSON over HTTP POST:
//!
//! * pair checks: request `{"query_text", "doc_text", "check_type"}` with
//!   `check_type` one of `"sufficiency"` / `"answerability"`; response
//!   `{"verdict": bool, "rationale": string}`.
//! * topic scoring: request `{"prompt": string}`; response
//!   `{"content": string}` holding the model's reply to the prompt.
//!
//! When the environment variable [`TOKEN_ENV`] is set, its value is sent as a
//! bearer token.
//!
//! File-backed stubs replay canned answers so that everything downstream of a
//! judge can be exercised offline.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOKEN_ENV: &str = "FINKIT_JUDGE_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckType {
    /// Does the document hold enough information to answer the query?
    Sufficiency,
    /// Could the document answer the query at all?
    Answerability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJudgeRequest {
    pub query_text: String,
    pub doc_text: String,
    pub check_type: CheckType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub verdict: bool,
    #[serde(default)]
    pub rationale: String,
}

pub trait PairJudge: Sync {
    fn judge(&self, request: &PairJudgeRequest) -> Result<PairVerdict>;
}

impl<F> PairJudge for F
where
    F: Fn(&PairJudgeRequest) -> Result<PairVerdict> + Sync,
{
    fn judge(&self, request: &PairJudgeRequest) -> Result<PairVerdict> {
        self(request)
    }
}

/// A prompt sent to a topic judge. `index` is the position of the topic in
/// the evaluated sample and `attempt` counts retries from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRequest<'a> {
    pub index: usize,
    pub attempt: usize,
    pub prompt: &'a str,
}

pub trait TopicJudge: Sync {
    /// Returns the raw text of the judge's reply.
    fn complete(&self, request: &PromptRequest<'_>) -> Result<String>;
}

impl<F> TopicJudge for F
where
    F: Fn(&PromptRequest<'_>) -> Result<String> + Sync,
{
    fn complete(&self, request: &PromptRequest<'_>) -> Result<String> {
        self(request)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PromptBody<'a> {
    prompt: &'a str,
}

#[derive(Debug, Clone, Deserialize)]
struct ContentBody {
    content: String,
}

/// Blocking HTTP client for either wire contract.
#[derive(Debug, Clone)]
pub struct HttpJudge {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpJudge {
    pub fn new(endpoint: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Judge(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            client,
        })
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, body: &B) -> Result<R> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::Judge(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Judge(format!("{} returned {status}", self.endpoint)));
        }
        resp.json::<R>().map_err(|e| Error::Judge(e.to_string()))
    }
}

impl PairJudge for HttpJudge {
    fn judge(&self, request: &PairJudgeRequest) -> Result<PairVerdict> {
        self.post(request)
    }
}

impl TopicJudge for HttpJudge {
    fn complete(&self, request: &PromptRequest<'_>) -> Result<String> {
        self.post::<_, ContentBody>(&PromptBody {
            prompt: request.prompt,
        })
        .map(|b| b.content)
    }
}

/// Calls `f` with attempt numbers `0..attempts` until it succeeds, returning
/// the last error otherwise.
pub fn with_retries<T>(attempts: usize, mut f: impl FnMut(usize) -> Result<T>) -> Result<T> {
    let mut last = Error::Judge("no attempts made".into());
    for attempt in 0..attempts.max(1) {
        match f(attempt) {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::debug!("judge attempt {} failed: {e}", attempt + 1);
                last = e;
            }
        }
    }
    Err(last)
}

/// One scripted rule of a [`StubPairJudge`]. Missing selectors match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubRule {
    #[serde(default)]
    pub check_type: Option<CheckType>,
    #[serde(default)]
    pub query_text: Option<String>,
    #[serde(default)]
    pub doc_text: Option<String>,
    pub verdict: bool,
    #[serde(default)]
    pub rationale: String,
}

/// Scripted pair judge. The first matching rule decides; without a match
/// every positive is sufficient and no negative is answerable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StubPairJudge {
    pub rules: Vec<StubRule>,
}

impl StubPairJudge {
    /// Reads JSON-lines rules.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rules.push(
                serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?,
            );
        }
        Ok(Self { rules })
    }
}

impl PairJudge for StubPairJudge {
    fn judge(&self, request: &PairJudgeRequest) -> Result<PairVerdict> {
        let hit = self.rules.iter().find(|r| {
            r.check_type.is_none_or(|c| c == request.check_type)
                && r.query_text.as_ref().is_none_or(|q| *q == request.query_text)
                && r.doc_text.as_ref().is_none_or(|d| *d == request.doc_text)
        });
        Ok(match hit {
            Some(rule) => PairVerdict {
                verdict: rule.verdict,
                rationale: rule.rationale.clone(),
            },
            None => PairVerdict {
                verdict: request.check_type == CheckType::Sufficiency,
                rationale: "stub default".into(),
            },
        })
    }
}

/// Replays canned replies: sample position `i` receives reply `i mod n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubTopicJudge {
    pub replies: Vec<String>,
}

impl StubTopicJudge {
    pub fn new(replies: Vec<String>) -> Result<Self> {
        if replies.is_empty() {
            return Err(Error::Judge("stub judge has no replies".into()));
        }
        Ok(Self { replies })
    }

    /// One reply per line. A line holding a JSON string is unquoted; any other
    /// line (typically a JSON object) is replayed verbatim.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let replies = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<String>(l).unwrap_or_else(|_| l.to_string()))
            .collect();
        Self::new(replies)
    }
}

impl TopicJudge for StubTopicJudge {
    fn complete(&self, request: &PromptRequest<'_>) -> Result<String> {
        Ok(self.replies[request.index % self.replies.len()].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(check: CheckType, doc: &str) -> PairJudgeRequest {
        PairJudgeRequest {
            query_text: "q".into(),
            doc_text: doc.into(),
            check_type: check,
        }
    }

    #[test]
    fn stub_defaults_accept_everything() {
        let j = StubPairJudge::default();
        assert!(j.judge(&req(CheckType::Sufficiency, "d")).unwrap().verdict);
        assert!(!j.judge(&req(CheckType::Answerability, "d")).unwrap().verdict);
    }

    #[test]
    fn stub_rules_load_and_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rules.jsonl");
        std::fs::write(
            &p,
            "{\"check_type\":\"sufficiency\",\"doc_text\":\"thin\",\"verdict\":false,\"rationale\":\"too short\"}\n",
        )
        .unwrap();
        let j = StubPairJudge::load(&p).unwrap();
        let v = j.judge(&req(CheckType::Sufficiency, "thin")).unwrap();
        assert!(!v.verdict);
        assert_eq!(v.rationale, "too short");
        assert!(j.judge(&req(CheckType::Sufficiency, "rich")).unwrap().verdict);
        assert!(!j.judge(&req(CheckType::Answerability, "thin")).unwrap().verdict);
    }

    #[test]
    fn wire_format_field_names() {
        let json = serde_json::to_value(req(CheckType::Answerability, "d")).unwrap();
        assert_eq!(json["check_type"], "answerability");
        assert_eq!(json["query_text"], "q");
        let v: PairVerdict = serde_json::from_str("{\"verdict\":true}").unwrap();
        assert!(v.verdict);
    }

    #[test]
    fn topic_stub_cycles_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("replies.jsonl");
        std::fs::write(&p, "\"one\"\n{\"raw\": 2}\n").unwrap();
        let j = StubTopicJudge::load(&p).unwrap();
        let ask = |index| {
            j.complete(&PromptRequest {
                index,
                attempt: 0,
                prompt: "p",
            })
            .unwrap()
        };
        assert_eq!(ask(0), "one");
        assert_eq!(ask(1), "{\"raw\": 2}");
        assert_eq!(ask(2), "one");
    }

    #[test]
    fn retries_until_success() {
        let mut calls = 0;
        let v = with_retries(3, |a| {
            calls += 1;
            if a < 2 {
                Err(Error::Judge("flaky".into()))
            } else {
                Ok(a)
            }
        });
        assert_eq!(v.unwrap(), 2);
        assert_eq!(calls, 3);
        assert!(with_retries(2, |_| Err::<(), _>(Error::Judge("down".into()))).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_judge_error() {
        let j = HttpJudge::new("http://127.0.0.1:9/judge").unwrap();
        let err = PairJudge::judge(&j, &req(CheckType::Sufficiency, "d")).unwrap_err();
        assert!(matches!(err, Error::Judge(_)));
    }
}
