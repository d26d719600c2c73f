//! `finkit`: every toolkit stage as a subcommand, plus the full topic
//! pipeline. Data goes to stdout or the named output file; logs and
//! summaries go to stderr.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use finkit_core::chunking::{aggregate_chunk_scores, chunk_document, split_chunk_id, Aggregation};
use finkit_core::cluster::{hdbscan, load_labels, write_labels, HdbscanConfig, MetricSpace};
use finkit_core::io::{
    load_corpus, load_embeddings, load_qrels, load_run, load_triplets, write_atomic, write_corpus,
    write_embeddings, write_run, write_triplets, RetrievalRun, ScoredDoc,
};
use finkit_core::judge::{HttpJudge, PairJudge, StubPairJudge, TopicJudge, TOKEN_ENV};
use finkit_core::pipeline::{run_pipeline, tokenizer_diff, PipelineConfig, TokenizerSpec, TopicsConfig};
use finkit_core::reduce::{umap, Metric, SgdMode, UmapConfig};
use finkit_core::retrieval::{
    build_training_pairs, candidate_triplets, cosine_topk, filter_pairs_with_judge, mine_all, ndcg_at_k, recall_at_k,
    sample_training_pairs, score_all, ContrastiveConfig, FilterConfig,
};
use finkit_core::tokenize::{train_wordpiece_expansion, SubwordVocabulary, WordPieceConfig};
use finkit_core::topics::{build_topics, evaluate_topics, format_topics, judge_topics, load_topics, JudgeConfig};

#[derive(Parser)]
#[command(name = "finkit", version, about = "Retrieval evaluation, pair construction, tokenization and topic modeling")]
struct Cli {
    /// Seed for every randomized stage (UMAP, pair sampling, judge sampling).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// TOML configuration. Required by run-pipeline; other subcommands read
    /// their defaults from its [umap], [hdbscan], [tokenizer], [topics] and
    /// [judge] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split documents into overlapping windows of words.
    Chunk(ChunkArgs),
    /// Rank documents by cosine similarity and report recall and nDCG.
    RetrieveEval(RetrieveEvalArgs),
    /// Most similar non-relevant documents per query, as a run file.
    MineNegatives(MineArgs),
    /// Training triplets from qrels and mined negatives.
    BuildPairs(BuildPairsArgs),
    /// Drop triplet members rejected by an LLM judge.
    FilterPairs(FilterPairsArgs),
    /// Expand a WordPiece vocabulary from a corpus.
    TrainVocab(TrainVocabArgs),
    /// Tokenize text lines with the merged dictionary + subword tokenizer.
    Tokenize(TokenizeArgs),
    /// Compare two tokenizers over a term list.
    TokenizerDiff(TokenizerDiffArgs),
    /// UMAP dimensionality reduction.
    Reduce(ReduceArgs),
    /// HDBSCAN clustering.
    Cluster(ClusterArgs),
    /// c-TF-IDF topic descriptors for clustered documents.
    Topics(TopicsArgs),
    /// Label-free topic evaluation, optionally with an LLM judge.
    EvalTopics(EvalTopicsArgs),
    /// reduce → cluster → topics → evaluate as configured by --config.
    RunPipeline,
}

#[derive(Args)]
struct ChunkArgs {
    /// Corpus JSONL.
    input: PathBuf,
    /// Chunk corpus JSONL; ids are `<doc-id>#<index>`.
    output: PathBuf,
    #[arg(long, default_value_t = finkit_core::chunking::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = finkit_core::chunking::DEFAULT_OVERLAP)]
    overlap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Max,
    Mean,
}

#[derive(Args)]
struct RetrieveEvalArgs {
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    docs: Option<PathBuf>,
    #[arg(long)]
    qrels: PathBuf,
    /// Cutoffs to report.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    k: Vec<usize>,
    /// Evaluate an existing run file instead of retrieving.
    #[arg(long, conflicts_with_all = ["queries", "docs"], required_unless_present_all = ["queries", "docs"])]
    run: Option<PathBuf>,
    /// Write the retrieval run here.
    #[arg(long)]
    run_out: Option<PathBuf>,
    /// Treat `--docs` rows as chunks (`<doc-id>#<n>`) and score documents
    /// by aggregating their chunks.
    #[arg(long)]
    aggregate: Option<AggregateArg>,
    /// Ranking depth kept in the run; defaults to the largest cutoff.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    /// Also print per-query values.
    #[arg(long)]
    per_query: bool,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 50)]
    max: usize,
    /// Run file of mined negatives.
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Base,
    Large,
}

impl Preset {
    fn config(self) -> ContrastiveConfig {
        match self {
            Preset::Base => ContrastiveConfig::base(),
            Preset::Large => ContrastiveConfig::large(),
        }
    }
}

#[derive(Args)]
struct BuildPairsArgs {
    #[arg(long)]
    qrels: PathBuf,
    /// Run file written by mine-negatives.
    #[arg(long)]
    mined: PathBuf,
    /// Corpus JSONL holding the query texts.
    #[arg(long)]
    query_texts: PathBuf,
    #[arg(long, value_enum, default_value = "base")]
    preset: Preset,
    /// Emit every positive and mined negative without sampling, for
    /// judge filtering ahead of `filter-pairs --sample`.
    #[arg(long)]
    candidates: bool,
    /// Triplet file.
    output: PathBuf,
}

#[derive(Args)]
struct JudgeArgs {
    /// HTTP judge; the bearer token is read from FINKIT_JUDGE_TOKEN.
    #[arg(long, conflicts_with = "judge_stub")]
    judge_endpoint: Option<String>,
    /// Canned judge replies.
    #[arg(long)]
    judge_stub: Option<PathBuf>,
}

#[derive(Args)]
struct FilterPairsArgs {
    input: PathBuf,
    output: PathBuf,
    /// Corpus JSONL with the text of every referenced document.
    #[arg(long)]
    docs: PathBuf,
    #[command(flatten)]
    judge: JudgeArgs,
    #[arg(long, value_enum, default_value = "base")]
    preset: Preset,
    /// Sample the preset's counts from the surviving documents.
    #[arg(long)]
    sample: bool,
    #[arg(long, default_value_t = 3)]
    attempts: usize,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Write the judge report (drops, removals, failures) as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrainVocabArgs {
    /// Corpus JSONL, or plain text lines with --plain.
    input: PathBuf,
    output: PathBuf,
    #[arg(long)]
    plain: bool,
    /// Vocabulary to expand; by default the corpus alphabet.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, default_value_t = 14_000)]
    new_tokens: usize,
    #[arg(long, default_value_t = 2)]
    min_freq: u64,
    #[arg(long, default_value = finkit_core::tokenize::DEFAULT_UNK)]
    unk: String,
}

#[derive(Args, Clone, Default)]
struct TokenizerArgs {
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    unk: Option<String>,
}

impl TokenizerArgs {
    fn spec(&self, defaults: &TokenizerSpec) -> TokenizerSpec {
        let mut spec = defaults.clone();
        if self.dict.is_some() {
            spec.dictionary = self.dict.clone();
        }
        if self.vocab.is_some() {
            spec.vocab = self.vocab.clone();
        }
        if self.stopwords.is_some() {
            spec.stopwords = self.stopwords.clone();
        }
        if let Some(u) = &self.unk {
            spec.unk = u.clone();
        }
        spec
    }
}

#[derive(Args)]
struct TokenizeArgs {
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    /// Print surface strings instead of vocabulary forms.
    #[arg(long)]
    surface: bool,
    /// Text lines; stdin when absent.
    input: Option<PathBuf>,
}

#[derive(Args)]
struct TokenizerDiffArgs {
    /// Term list, one per line.
    terms: PathBuf,
    #[arg(long)]
    a_dict: Option<PathBuf>,
    #[arg(long)]
    a_vocab: Option<PathBuf>,
    #[arg(long)]
    b_dict: Option<PathBuf>,
    #[arg(long)]
    b_vocab: Option<PathBuf>,
    #[arg(long, default_value = finkit_core::tokenize::DEFAULT_UNK)]
    unk: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    n_epochs: Option<usize>,
    #[arg(long)]
    negative_sample_rate: Option<usize>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Multi-threaded SGD; faster but not reproducible.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ClusterArgs {
    input: PathBuf,
    /// Tab-separated id, label, probability.
    output: PathBuf,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    /// Also write the full assignment (probabilities, stabilities) as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TopicsArgs {
    /// Assignment file written by `cluster`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[arg(long)]
    top_k: Option<usize>,
    /// Topics JSONL.
    output: PathBuf,
}

#[derive(Args)]
struct EvalTopicsArgs {
    /// The embedding that was clustered.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    judge: JudgeArgs,
    /// Topics sent to the judge.
    #[arg(long)]
    judge_sample: Option<usize>,
    /// Write every judge prompt and reply as JSONL.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

/// Stage tables of a configuration file; anything else is ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct Defaults {
    seed: Option<u64>,
    tokenizer: TokenizerSpec,
    umap: UmapConfig,
    hdbscan: HdbscanConfig,
    topics: TopicsConfig,
    judge: Option<JudgeConfig>,
}

struct Ctx {
    seed: u64,
    defaults: Defaults,
}

fn write_stdout(s: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn chunk(a: &ChunkArgs) -> Result<()> {
    let docs = load_corpus(&a.input)?;
    let mut chunks = Vec::new();
    for d in &docs {
        chunks.extend(chunk_document(d, a.window, a.overlap).with_context(|| format!("document {:?}", d.id))?);
    }
    write_corpus(&chunks, &a.output)?;
    eprintln!("{} documents → {} chunks", docs.len(), chunks.len());
    Ok(())
}

fn aggregated_run(
    queries: &finkit_core::io::EmbeddingMatrix,
    chunks: &finkit_core::io::EmbeddingMatrix,
    mode: Aggregation,
    depth: usize,
) -> Result<RetrievalRun> {
    let scores = score_all(queries, chunks)?;
    let mut run = RetrievalRun::new();
    for (q, row) in queries.ids().iter().zip(scores) {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (id, s) in chunks.ids().iter().zip(row) {
            let doc = split_chunk_id(id).map_or(id.as_str(), |(d, _)| d);
            groups.entry(doc.to_string()).or_default().push(s);
        }
        let mut ranked: Vec<ScoredDoc> = aggregate_chunk_scores(&groups, mode)?
            .into_iter()
            .map(|(d, s)| ScoredDoc::new(d, s))
            .collect();
        ranked.sort_by(finkit_core::io::rank_order);
        ranked.truncate(depth);
        run.insert_ranked(q.clone(), ranked)?;
    }
    Ok(run)
}

fn retrieve_eval(a: &RetrieveEvalArgs) -> Result<()> {
    if a.k.is_empty() || a.k.contains(&0) {
        bail!("--k needs positive cutoffs");
    }
    let qrels = load_qrels(&a.qrels)?;
    let depth = a.depth.unwrap_or_else(|| a.k.iter().copied().max().unwrap_or(10));
    let run = match &a.run {
        Some(p) => load_run(p)?,
        None => {
            let queries = load_embeddings(a.queries.as_ref().unwrap())?;
            let docs = load_embeddings(a.docs.as_ref().unwrap())?;
            let judged: Vec<String> =
                queries.ids().iter().filter(|q| qrels.judgments(q).is_some()).cloned().collect();
            if judged.len() < queries.len() {
                log::warn!("{} queries have no judgments and are not evaluated", queries.len() - judged.len());
            }
            let queries = queries.select(&judged)?;
            match a.aggregate {
                None => cosine_topk(&queries, &docs, depth)?,
                Some(m) => {
                    let mode = match m {
                        AggregateArg::Max => Aggregation::Max,
                        AggregateArg::Mean => Aggregation::Mean,
                    };
                    aggregated_run(&queries, &docs, mode, depth)?
                }
            }
        }
    };
    if let Some(p) = &a.run_out {
        write_run(&run, p)?;
    }
    let mut rows = Vec::new();
    for &k in &a.k {
        rows.push(("recall", recall_at_k(&run, &qrels, k)?));
        rows.push(("ndcg", ndcg_at_k(&run, &qrels, k)?));
    }
    let mut out = String::new();
    match a.format {
        Format::Tsv => {
            out.push_str("metric\tk\tquery\tvalue\n");
            for (name, r) in &rows {
                out.push_str(&format!("{name}\t{}\tall\t{}\n", r.k, r.mean));
                if a.per_query {
                    for (q, v) in &r.per_query {
                        out.push_str(&format!("{name}\t{}\t{q}\t{v}\n", r.k));
                    }
                }
            }
        }
        Format::Table => {
            out.push_str(&format!("{:<8} {:>5} {:>10}\n", "metric", "k", "mean"));
            for (name, r) in &rows {
                out.push_str(&format!("{:<8} {:>5} {:>10.4}\n", name, r.k, r.mean));
            }
            out.push_str(&format!("{} queries\n", run.len()));
            if a.per_query {
                for (name, r) in &rows {
                    for (q, v) in &r.per_query {
                        out.push_str(&format!("{:<8} {:>5} {:>10.4}  {q}\n", name, r.k, v));
                    }
                }
            }
        }
    }
    write_stdout(&out)
}

fn mine_negatives(a: &MineArgs) -> Result<()> {
    let qrels = load_qrels(&a.qrels)?;
    let queries = load_embeddings(&a.queries)?;
    let docs = load_embeddings(&a.docs)?;
    let mined = mine_all(&queries, &qrels, &docs, a.max)?;
    let mut run = RetrievalRun::new();
    for (q, list) in mined {
        run.insert_ranked(q, list)?;
    }
    write_run(&run, &a.output)?;
    eprintln!("mined negatives for {} queries", run.len());
    Ok(())
}

fn query_texts(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(load_corpus(path)?.into_iter().map(|d| (d.id, d.text)).collect())
}

fn build_pairs(a: &BuildPairsArgs, ctx: &Ctx) -> Result<()> {
    let qrels = load_qrels(&a.qrels)?;
    let mined: BTreeMap<String, Vec<ScoredDoc>> =
        load_run(&a.mined)?.iter().map(|(q, r)| (q.to_string(), r.to_vec())).collect();
    let texts = query_texts(&a.query_texts)?;
    let cfg = a.preset.config();
    let triplets = if a.candidates {
        candidate_triplets(&qrels, &mined, &texts, &cfg)
    } else {
        let (t, report) = build_training_pairs(&qrels, &mined, &texts, &cfg, ctx.seed)?;
        for s in &report.skipped {
            log::warn!("skipped {}: {:?}", s.query_id, s.reason);
        }
        t
    };
    write_triplets(&triplets, &a.output)?;
    eprintln!("{} triplets written", triplets.len());
    Ok(())
}

fn pair_judge(a: &JudgeArgs) -> Result<Box<dyn PairJudge>> {
    match (&a.judge_endpoint, &a.judge_stub) {
        (Some(url), _) => {
            if std::env::var(TOKEN_ENV).is_err() {
                log::warn!("{TOKEN_ENV} is not set; calling the judge without credentials");
            }
            Ok(Box::new(HttpJudge::new(url.clone())?))
        }
        (None, Some(p)) => Ok(Box::new(StubPairJudge::load(p)?)),
        (None, None) => bail!("one of --judge-endpoint and --judge-stub is required"),
    }
}

fn filter_pairs(a: &FilterPairsArgs, ctx: &Ctx) -> Result<()> {
    let triplets = load_triplets(&a.input)?;
    let texts: HashMap<String, String> = load_corpus(&a.docs)?.into_iter().map(|d| (d.id, d.text)).collect();
    let judge = pair_judge(&a.judge)?;
    let preset = a.preset.config();
    let cfg = FilterConfig {
        attempts: a.attempts,
        concurrency: a.concurrency,
        ..FilterConfig::from_contrastive(&preset)
    };
    let outcome = filter_pairs_with_judge(&triplets, &texts, judge.as_ref(), &cfg)?;
    eprintln!(
        "dropped {} positives and {} negatives, removed {} triplets, {} judge failures",
        outcome.dropped_positives,
        outcome.dropped_negatives,
        outcome.removed.len(),
        outcome.failures.len()
    );
    if let Some(p) = &a.report {
        let report = serde_json::json!({
            "dropped_positives": outcome.dropped_positives,
            "dropped_negatives": outcome.dropped_negatives,
            "removed": outcome.removed,
            "failures": outcome.failures,
        });
        write_atomic(p, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    let kept = if a.sample {
        let (t, report) = sample_training_pairs(&outcome.triplets, &preset, ctx.seed)?;
        for s in &report.skipped {
            log::warn!("skipped {}: {:?}", s.query_id, s.reason);
        }
        t
    } else {
        outcome.triplets
    };
    write_triplets(&kept, &a.output)?;
    Ok(())
}

fn read_lines(path: &Path, plain: bool) -> Result<Vec<String>> {
    if plain {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(text.lines().map(str::to_owned).collect())
    } else {
        Ok(load_corpus(path)?.into_iter().map(|d| d.text).collect())
    }
}

fn train_vocab(a: &TrainVocabArgs) -> Result<()> {
    let lines = read_lines(&a.input, a.plain)?;
    let base = match &a.base {
        Some(p) => SubwordVocabulary::load(p, &a.unk)?,
        None => {
            let mut alphabet = std::collections::BTreeSet::new();
            for l in &lines {
                for unit in finkit_core::tokenize::pre_tokenize(l) {
                    for (i, c) in unit.text.chars().enumerate() {
                        alphabet.insert(if i == 0 { c.to_string() } else { format!("##{c}") });
                    }
                }
            }
            SubwordVocabulary::new(std::iter::once(a.unk.clone()).chain(alphabet).collect(), &a.unk)?
        }
    };
    let cfg = WordPieceConfig {
        new_tokens: a.new_tokens,
        min_freq: a.min_freq,
    };
    let (vocab, report) = train_wordpiece_expansion(lines.iter().map(String::as_str), &base, &cfg)?;
    vocab.write(&a.output)?;
    eprintln!("base {} + {} new tokens = {}", vocab.base_size(), report.added, vocab.len());
    if report.shortfall > 0 {
        log::warn!("{} requested tokens could not be produced at min_freq {}", report.shortfall, a.min_freq);
    }
    if !report.missing_alphabet.is_empty() {
        log::warn!("{} corpus symbols are missing from the base vocabulary", report.missing_alphabet.len());
    }
    Ok(())
}

fn tokenize(a: &TokenizeArgs, ctx: &Ctx) -> Result<()> {
    let spec = a.tokenizer.spec(&ctx.defaults.tokenizer);
    let t = spec.load(Path::new(""))?;
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(io::BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::BufReader::new(io::stdin())),
    };
    let mut out = io::BufWriter::new(io::stdout().lock());
    for line in reader.lines() {
        let line = line?;
        let tokens: Vec<String> = t
            .tokenize(&line)
            .into_iter()
            .filter(|tok| !t.stopwords.contains(tok.surface(&line)))
            .map(|tok| if a.surface { tok.surface(&line).to_string() } else { tok.text })
            .collect();
        writeln!(out, "{}", tokens.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn diff_tokenizers(a: &TokenizerDiffArgs) -> Result<()> {
    let spec = |dict: &Option<PathBuf>, vocab: &Option<PathBuf>| TokenizerSpec {
        dictionary: dict.clone(),
        vocab: vocab.clone(),
        unk: a.unk.clone(),
        ..TokenizerSpec::default()
    };
    let ta = spec(&a.a_dict, &a.a_vocab).load(Path::new(""))?;
    let tb = spec(&a.b_dict, &a.b_vocab).load(Path::new(""))?;
    let text = fs::read_to_string(&a.terms).with_context(|| format!("reading {}", a.terms.display()))?;
    let terms: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let report = tokenizer_diff(
        &terms,
        |s: &str| ta.segment(s).into_iter().map(str::to_owned).collect(),
        |s: &str| tb.segment(s).into_iter().map(str::to_owned).collect(),
    );
    eprintln!("{} of {} terms segment differently", report.inconsistencies, report.terms);
    for (len, n) in &report.by_char_length {
        eprintln!("  length {len:>3}: {n}");
    }
    write_stdout(&(serde_json::to_string_pretty(&report)? + "\n"))
}

fn reduce(a: &ReduceArgs, ctx: &Ctx) -> Result<()> {
    let mut cfg = ctx.defaults.umap;
    cfg.seed = ctx.seed;
    if let Some(v) = a.n_neighbors {
        cfg.n_neighbors = v;
    }
    if let Some(v) = a.out_dim {
        cfg.out_dim = v;
    }
    if let Some(v) = a.min_dist {
        cfg.min_dist = v;
    }
    if a.n_epochs.is_some() {
        cfg.n_epochs = a.n_epochs;
    }
    if let Some(v) = a.negative_sample_rate {
        cfg.negative_sample_rate = v;
    }
    if let Some(m) = a.metric {
        cfg.metric = m.into();
    }
    if a.parallel {
        cfg.mode = SgdMode::Parallel;
    }
    let x = load_embeddings(&a.input)?;
    let r = umap(&x, &cfg)?;
    if r.sigma_fallbacks > 0 {
        log::warn!("σ search fell back for {} points", r.sigma_fallbacks);
    }
    write_embeddings(&r.embedding, &a.output)?;
    eprintln!("{} × {} → {} × {}", x.len(), x.dim(), r.embedding.len(), r.embedding.dim());
    Ok(())
}

fn cluster(a: &ClusterArgs, ctx: &Ctx) -> Result<()> {
    let mut cfg = ctx.defaults.hdbscan;
    if let Some(v) = a.min_cluster_size {
        cfg.min_cluster_size = v;
    }
    if let Some(v) = a.min_samples {
        cfg.min_samples = v;
    }
    let x = load_embeddings(&a.input)?;
    let d = MetricSpace::new(&x, a.metric.into())?;
    let assignment = hdbscan(&d, &cfg)?;
    write_labels(x.ids(), &assignment, &a.output)?;
    if let Some(p) = &a.json {
        write_atomic(p, serde_json::to_string_pretty(&assignment)?.as_bytes())?;
    }
    let noise = assignment.labels.iter().filter(|&&l| l < 0).count();
    eprintln!("{} clusters, {} of {} points are noise", assignment.cluster_count(), noise, x.len());
    Ok(())
}

fn topics(a: &TopicsArgs, ctx: &Ctx) -> Result<()> {
    let spec = a.tokenizer.spec(&ctx.defaults.tokenizer);
    let t = spec.load(Path::new(""))?;
    let texts: HashMap<String, String> = load_corpus(&a.corpus)?.into_iter().map(|d| (d.id, d.text)).collect();
    let rows = load_labels(&a.labels)?;
    let mut labels = Vec::with_capacity(rows.len());
    let mut terms = Vec::with_capacity(rows.len());
    for r in &rows {
        let text = texts.get(&r.id).with_context(|| format!("{:?} is not in the corpus", r.id))?;
        labels.push(r.label);
        terms.push(spec.terms(&t, text));
    }
    let k = a.top_k.unwrap_or(ctx.defaults.topics.top_k);
    let topics = build_topics(&labels, &terms, k)?;
    write_atomic(&a.output, format_topics(&topics).as_bytes())?;
    eprintln!("{} topics", topics.iter().filter(|t| !t.is_outlier()).count());
    Ok(())
}

fn topic_judge(a: &JudgeArgs) -> Result<Option<Box<dyn TopicJudge>>> {
    Ok(match (&a.judge_endpoint, &a.judge_stub) {
        (Some(url), _) => Some(Box::new(HttpJudge::new(url.clone())?)),
        (None, Some(p)) => Some(Box::new(finkit_core::judge::StubTopicJudge::load(p)?)),
        (None, None) => None,
    })
}

fn eval_topics(a: &EvalTopicsArgs, ctx: &Ctx) -> Result<()> {
    let x = load_embeddings(&a.embeddings)?;
    let rows = load_labels(&a.labels)?;
    let by_id: HashMap<&str, i64> = rows.iter().map(|r| (r.id.as_str(), r.label)).collect();
    let labels = x
        .ids()
        .iter()
        .map(|id| by_id.get(id.as_str()).copied().with_context(|| format!("no label for {id:?}")))
        .collect::<Result<Vec<_>>>()?;
    let topics = load_topics(&a.topics)?;
    let k = a.top_k.unwrap_or(ctx.defaults.topics.top_k);
    let mut report = evaluate_topics(&x, &labels, &topics, k)?;
    if let Some(judge) = topic_judge(&a.judge)? {
        let mut cfg = ctx.defaults.judge.unwrap_or_default();
        cfg.seed = ctx.seed;
        if let Some(n) = a.judge_sample {
            cfg.sample = n;
        }
        let outcome = judge_topics(&topics, &cfg, judge.as_ref())?;
        if let Some(p) = &a.transcript {
            let mut lines = String::new();
            for e in &outcome.transcript {
                lines.push_str(&serde_json::to_string(e)?);
                lines.push('\n');
            }
            write_atomic(p, lines.as_bytes())?;
        }
        eprintln!("judged {} topics, skipped {}", outcome.judged, outcome.skipped);
        report.judge_scores = Some(outcome.scores);
    }
    write_stdout(&(serde_json::to_string_pretty(&report)? + "\n"))
}

fn pipeline(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().context("run-pipeline needs --config")?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads > 0 {
        cfg.threads = cli.threads;
    }
    let outcome = run_pipeline(&cfg)?;
    for s in &outcome.stages {
        eprintln!("{:<9} {} {}", s.stage, if s.reused { "reused " } else { "computed" }, s.dir.display());
    }
    write_stdout(&(serde_json::to_string_pretty(&outcome.report)? + "\n"))
}

fn load_defaults(path: Option<&PathBuf>) -> Result<Defaults> {
    let Some(p) = path else {
        return Ok(Defaults::default());
    };
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let d: Defaults = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    d.umap.validate()?;
    d.hdbscan.validate()?;
    Ok(d)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let defaults = load_defaults(cli.config.as_ref())?;
    let ctx = Ctx {
        seed: cli.seed.or(defaults.seed).unwrap_or(42),
        defaults,
    };
    match &cli.command {
        Command::Chunk(a) => chunk(a),
        Command::RetrieveEval(a) => retrieve_eval(a),
        Command::MineNegatives(a) => mine_negatives(a),
        Command::BuildPairs(a) => build_pairs(a, &ctx),
        Command::FilterPairs(a) => filter_pairs(a, &ctx),
        Command::TrainVocab(a) => train_vocab(a),
        Command::Tokenize(a) => tokenize(a, &ctx),
        Command::TokenizerDiff(a) => diff_tokenizers(a),
        Command::Reduce(a) => reduce(a, &ctx),
        Command::Cluster(a) => cluster(a, &ctx),
        Command::Topics(a) => topics(a, &ctx),
        Command::EvalTopics(a) => eval_topics(a, &ctx),
        Command::RunPipeline => pipeline(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
