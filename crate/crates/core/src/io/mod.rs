//! Persistent formats: corpora, embeddings, judgments, runs and training triplets.

mod corpus;
mod embeddings;
mod judgments;
mod split;
mod triplets;

pub use corpus::{load_corpus, write_corpus, Document};
pub use embeddings::{
    decode_embeddings, encode_embeddings, load_embeddings, manifest_path, write_embeddings,
    EmbeddingMatrix, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use embeddings::write_atomic;
pub use judgments::{
    format_qrels, format_run, load_qrels, load_run, parse_qrels, parse_run, rank_order,
    write_qrels, write_run, QRels, RetrievalRun, ScoredDoc,
};
pub use split::{build_quality_split, LabeledSplit, LabeledText, Quality, QualitySplitConfig};
pub use triplets::{load_triplets, write_triplets};
