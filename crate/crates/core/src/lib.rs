//! Literature-mining toolkit for ranking candidate replacement materials.
//!
//! The pipeline ingests bibliographic abstract records, cleans and filters
//! them into a line-oriented corpus, tokenizes the text with chemistry-aware
//! rules, and trains two model families over the result: word-level skip-gram
//! embeddings queried by cosine similarity, and a small bidirectional
//! transformer encoder trained from scratch with masked language modeling and
//! queried by mask filling. Ranked model outputs are screened for relevance
//! and scored against a 20-category benchmark lexicon of known alternatives.

pub mod chemtok;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod evalrank;
pub mod mlm;
pub mod seed;
pub mod subword;
pub mod tune;

/// Artifact version reported by `--version` and embedded in file headers.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// On-disk format version shared by the embedding and checkpoint containers.
pub const FORMAT_VERSION: u32 = 1;
