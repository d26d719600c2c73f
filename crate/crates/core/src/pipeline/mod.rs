//! The topic pipeline: reduce → cluster → topics → evaluate over
//! precomputed embeddings, driven by one TOML configuration.
//!
//! Each stage writes into `<output>/<stage>/<key>/`, where the key hashes
//! the stage's input and configuration, so re-runs skip unchanged stages.

mod diff;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use diff::{tokenizer_diff, DiffReport, TermDiff};

use crate::cluster::{hdbscan, write_labels, ClusterAssignment, HdbscanConfig, MetricSpace};
use crate::error::{Error, Result};
use crate::io::{load_corpus, load_embeddings, manifest_path, write_atomic, write_embeddings, EmbeddingMatrix};
use crate::judge::{HttpJudge, StubTopicJudge, TopicJudge};
use crate::reduce::{umap, Metric, UmapConfig};
use crate::tokenize::{is_punctuation, load_stopwords, EntityDictionary, MergedTokenizer, SubwordVocabulary, DEFAULT_UNK};
use crate::topics::{
    build_topics, evaluate_topics, format_topics, judge_topics, load_topics, JudgeConfig, Topic, TopicEvalReport,
    DEFAULT_TOP_K,
};

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn default_unk() -> String {
    DEFAULT_UNK.to_string()
}

fn yes() -> bool {
    true
}

/// Files making up a merged tokenizer. With neither a dictionary nor a
/// vocabulary every pre-tokenized unit is a term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_unk")]
    pub unk: String,
    /// Lower-case terms before stopword filtering.
    #[serde(default = "yes")]
    pub lowercase: bool,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        Self {
            dictionary: None,
            vocab: None,
            stopwords: None,
            unk: default_unk(),
            lowercase: true,
        }
    }
}

impl TokenizerSpec {
    fn files(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.dictionary, &self.vocab, &self.stopwords].into_iter().flatten()
    }

    pub fn load(&self, base: &Path) -> Result<MergedTokenizer> {
        let dictionary = match &self.dictionary {
            Some(p) => EntityDictionary::load(resolve(base, p))?,
            None => EntityDictionary::default(),
        };
        let subwords = match &self.vocab {
            Some(p) => SubwordVocabulary::load(resolve(base, p), &self.unk)?,
            None => SubwordVocabulary::new(Vec::new(), &self.unk)?,
        };
        let stopwords = match &self.stopwords {
            Some(p) => load_stopwords(resolve(base, p))?,
            None => Default::default(),
        };
        Ok(MergedTokenizer::new(dictionary, subwords, stopwords))
    }

    /// Topic terms of one text: segments, optionally lower-cased, without
    /// stopwords or bare punctuation.
    pub fn terms(&self, t: &MergedTokenizer, text: &str) -> Vec<String> {
        t.segment(text)
            .into_iter()
            .map(|s| if self.lowercase { s.to_lowercase() } else { s.to_owned() })
            .filter(|s| !s.chars().all(is_punctuation) && !t.stopwords.contains(s))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsConfig {
    /// Descriptors kept per topic and used for diversity.
    pub top_k: usize,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self { top_k: DEFAULT_TOP_K }
    }
}

/// Where topic judgments come from: an HTTP endpoint or a file of canned
/// replies. Exactly one must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<PathBuf>,
    #[serde(flatten)]
    pub config: JudgeConfig,
}

impl JudgeSpec {
    fn validate(&self) -> Result<()> {
        match (&self.endpoint, &self.stub) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Parameter("judge needs exactly one of `endpoint` and `stub`".into())),
        }
        if self.config.attempts == 0 || self.config.concurrency == 0 {
            return Err(Error::Parameter("judge attempts and concurrency must be positive".into()));
        }
        Ok(())
    }

    pub fn connect(&self, base: &Path) -> Result<Box<dyn TopicJudge>> {
        self.validate()?;
        Ok(match (&self.endpoint, &self.stub) {
            (Some(url), _) => Box::new(HttpJudge::new(url.clone())?),
            (_, Some(p)) => Box::new(StubTopicJudge::load(resolve(base, p))?),
            _ => unreachable!(),
        })
    }
}

fn default_seed() -> u64 {
    42
}

/// Relative paths resolve against the directory of the configuration file.
/// The top-level `seed` replaces the seeds of the UMAP and judge sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub embeddings: PathBuf,
    pub corpus: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub umap: UmapConfig,
    #[serde(default)]
    pub hdbscan: HdbscanConfig,
    #[serde(default)]
    pub topics: TopicsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(embeddings: impl Into<PathBuf>, corpus: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            seed: default_seed(),
            threads: 0,
            embeddings: embeddings.into(),
            corpus: corpus.into(),
            output: output.into(),
            tokenizer: TokenizerSpec::default(),
            umap: UmapConfig::default(),
            hdbscan: HdbscanConfig::default(),
            topics: TopicsConfig::default(),
            judge: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("pipeline config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Format(m) => Error::parse(path, 0, m),
            e => e,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parameter checks that need no file system access.
    pub fn validate(&self) -> Result<()> {
        self.umap.validate()?;
        self.hdbscan.validate()?;
        if self.topics.top_k == 0 {
            return Err(Error::Parameter("topics.top_k must be at least 1".into()));
        }
        if let Some(j) = &self.judge {
            j.validate()?;
        }
        Ok(())
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        resolve(&self.base_dir, p)
    }

    fn effective_umap(&self) -> UmapConfig {
        UmapConfig {
            seed: self.seed,
            ..self.umap
        }
    }

    fn effective_judge(&self) -> Option<JudgeSpec> {
        self.judge.clone().map(|mut j| {
            j.config.seed = self.seed;
            j
        })
    }

    /// Validates parameters and checks every input file exists.
    pub fn preflight(&self) -> Result<()> {
        self.validate()?;
        let emb = self.path(&self.embeddings);
        let mut required = vec![emb.clone(), manifest_path(&emb), self.path(&self.corpus)];
        required.extend(self.tokenizer.files().map(|p| self.path(p)));
        if let Some(stub) = self.judge.as_ref().and_then(|j| j.stub.as_ref()) {
            required.push(self.path(stub));
        }
        for p in required {
            if !p.is_file() {
                return Err(Error::Validation(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub key: String,
    /// Relative to the output directory.
    pub dir: PathBuf,
    #[serde(skip)]
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub report: TopicEvalReport,
    pub stages: Vec<StageRecord>,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("artifact serializes");
    s.push(b'\n');
    s
}

struct Stage<'a> {
    name: &'static str,
    key: String,
    dir: PathBuf,
    out: &'a Path,
}

impl<'a> Stage<'a> {
    fn new<C: Serialize>(out: &'a Path, name: &'static str, parent: &str, config: &C) -> Self {
        let cfg = serde_json::to_vec(config).expect("stage config serializes");
        let key = sha256_hex(&[name.as_bytes(), parent.as_bytes(), &cfg]);
        let dir = out.join(name).join(&key[..16]);
        Self { name, key, dir, out }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&self, reused: bool) -> StageRecord {
        StageRecord {
            stage: self.name.to_string(),
            key: self.key.clone(),
            dir: self.dir.strip_prefix(self.out).unwrap_or(&self.dir).to_path_buf(),
            reused,
        }
    }

    /// Runs `body` unless `marker` already exists; errors carry the stage name.
    fn run(&self, marker: &str, body: impl FnOnce(&Self) -> Result<()>) -> Result<StageRecord> {
        let reused = self.file(marker).is_file();
        if reused {
            log::info!("{}: reusing {}", self.name, self.dir.display());
        } else {
            let t0 = Instant::now();
            fs::create_dir_all(&self.dir)
                .map_err(|e| Error::io(&self.dir, e))
                .and_then(|_| body(self))
                .map_err(|e| e.in_stage(self.name))?;
            log::info!("{}: done in {:.2?}", self.name, t0.elapsed());
        }
        Ok(self.record(reused))
    }
}

/// Runs reduce → cluster → topics → evaluate and writes `report.json` and
/// `run.json` into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.preflight()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Parameter(e.to_string()))?;
        pool.install(|| run_stages(cfg))
    } else {
        run_stages(cfg)
    }
}

fn run_stages(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let out = cfg.path(&cfg.output);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let emb_path = cfg.path(&cfg.embeddings);
    let input_key = sha256_hex(&[&read(&emb_path)?, &read(&manifest_path(&emb_path))?]);
    let mut stages = Vec::new();

    let umap_cfg = cfg.effective_umap();
    let reduce = Stage::new(&out, "reduce", &input_key, &umap_cfg);
    let reduced_path = reduce.file("embedding.fkem");
    stages.push(reduce.run("embedding.fkem", |_| {
        let x = load_embeddings(&emb_path)?;
        let r = umap(&x, &umap_cfg)?;
        if r.sigma_fallbacks > 0 {
            log::warn!("reduce: σ search fell back for {} points", r.sigma_fallbacks);
        }
        write_embeddings(&r.embedding, &reduced_path)
    })?);
    let reduced = load_embeddings(&reduced_path).map_err(|e| e.in_stage("reduce"))?;

    let cluster = Stage::new(&out, "cluster", &reduce.key, &cfg.hdbscan);
    let assignment_path = cluster.file("assignment.json");
    stages.push(cluster.run("assignment.json", |s| {
        let d = MetricSpace::new(&reduced, Metric::Euclidean)?;
        let a = hdbscan(&d, &cfg.hdbscan)?;
        write_labels(reduced.ids(), &a, s.file("labels.tsv"))?;
        write_atomic(&assignment_path, &json_bytes(&a))
    })?);
    let assignment: ClusterAssignment = serde_json::from_slice(&read(&assignment_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", assignment_path.display())).in_stage("cluster"))?;

    let corpus_path = cfg.path(&cfg.corpus);
    let mut topic_parent = vec![cluster.key.clone().into_bytes(), read(&corpus_path)?];
    for p in cfg.tokenizer.files() {
        topic_parent.push(read(&cfg.path(p))?);
    }
    let topic_parent = sha256_hex(&topic_parent.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let topics_stage = Stage::new(&out, "topics", &topic_parent, &(&cfg.tokenizer, &cfg.topics));
    let topics_path = topics_stage.file("topics.jsonl");
    stages.push(topics_stage.run("topics.jsonl", |_| {
        let docs = load_corpus(&corpus_path)?;
        let texts: HashMap<&str, &str> = docs.iter().map(|d| (d.id.as_str(), d.text.as_str())).collect();
        let tokenizer = cfg.tokenizer.load(&cfg.base_dir)?;
        let terms = reduced
            .ids()
            .iter()
            .map(|id| {
                texts
                    .get(id.as_str())
                    .map(|t| cfg.tokenizer.terms(&tokenizer, t))
                    .ok_or_else(|| Error::Validation(format!("embedding id {id:?} is not in the corpus")))
            })
            .collect::<Result<Vec<_>>>()?;
        let topics = build_topics(&assignment.labels, &terms, cfg.topics.top_k)?;
        write_atomic(&topics_path, format_topics(&topics).as_bytes())
    })?);
    let topics: Vec<Topic> = load_topics(&topics_path).map_err(|e| e.in_stage("topics"))?;

    let judge = cfg.effective_judge();
    let eval = Stage::new(&out, "evaluate", &topics_stage.key, &(cfg.topics.top_k, &judge));
    let report_path = eval.file("report.json");
    stages.push(eval.run("report.json", |s| {
        let mut report = evaluate_topics(&reduced, &assignment.labels, &topics, cfg.topics.top_k)?;
        if let Some(spec) = &judge {
            let client = spec.connect(&cfg.base_dir)?;
            let outcome = judge_topics(&topics, &spec.config, client.as_ref())?;
            if outcome.skipped > 0 {
                log::warn!("evaluate: {} topic(s) skipped after unusable judge replies", outcome.skipped);
            }
            let mut lines = String::new();
            for e in &outcome.transcript {
                lines.push_str(&serde_json::to_string(e).expect("transcript serializes"));
                lines.push('\n');
            }
            write_atomic(&s.file("judge_transcript.jsonl"), lines.as_bytes())?;
            report.judge_scores = Some(outcome.scores);
        }
        write_atomic(&report_path, &json_bytes(&report))
    })?);
    let report_bytes = read(&report_path)?;
    let report: TopicEvalReport = serde_json::from_slice(&report_bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", report_path.display())).in_stage("evaluate"))?;

    write_atomic(&out.join("report.json"), &report_bytes)?;
    write_atomic(&out.join("run.json"), &json_bytes(&stages))?;
    Ok(PipelineOutcome { report, stages })
}

/// Loads a reduced embedding written by the pipeline.
pub fn load_stage_embedding(dir: &Path) -> Result<EmbeddingMatrix> {
    load_embeddings(dir.join("embedding.fkem"))
}
