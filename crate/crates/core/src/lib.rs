//! Non-neural machinery for financial text retrieval and topic modeling:
//! data formats, chunking, retrieval metrics and contrastive pair
//! construction, domain tokenization, UMAP, HDBSCAN and c-TF-IDF topics.

pub mod chunking;
pub mod cluster;
pub mod error;
pub mod io;
pub mod judge;
pub mod pipeline;
pub mod reduce;
pub mod retrieval;
pub mod tokenize;
pub mod topics;

pub use error::{Error, Result};
