//! Word-level embeddings: vocabulary construction, skip-gram training with
//! negative sampling, cosine-similarity queries and analogy evaluation.

pub mod io;
pub mod trainer;

pub use trainer::{evaluate_loss, train_skipgram, W2VHyper};

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no words survive min_count {0}")]
    EmptyVocab(u64),
    #[error("word not in vocabulary: {0}")]
    OutOfVocabulary(String),
    #[error("cosine of zero vector")]
    ZeroVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("analogy pair list is empty")]
    EmptyPairs,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("non-finite weight at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Vocabulary over a tokenized corpus: ids dense, assigned by descending
/// count with lexicographic tie-break, words below `min_count` dropped.
#[derive(Debug, Clone)]
pub struct WordVocab {
    word_to_id: HashMap<String, usize>,
    id_to_word: Vec<String>,
    counts: Vec<u64>,
    pub min_count: u64,
    total_tokens: u64,
}

impl WordVocab {
    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.id_to_word[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    /// Total corpus tokens kept by the vocabulary (sum of counts).
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.id_to_word.iter().map(String::as_str)
    }

    fn from_words(id_to_word: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let word_to_id = id_to_word
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let total_tokens = counts.iter().sum();
        Self {
            word_to_id,
            id_to_word,
            counts,
            min_count,
            total_tokens,
        }
    }
}

/// Build the vocabulary from tokenized sentences.
pub fn build_vocab<S: AsRef<str>>(
    sentences: &[Vec<S>],
    min_count: u64,
) -> Result<WordVocab, EmbedError> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sentence in sentences {
        for token in sentence {
            *freq.entry(token.as_ref()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    if kept.is_empty() {
        return Err(EmbedError::EmptyVocab(min_count));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (words, counts): (Vec<String>, Vec<u64>) =
        kept.into_iter().map(|(w, c)| (w.to_string(), c)).unzip();
    Ok(WordVocab::from_words(words, counts, min_count))
}

/// Word vectors: input (center) and output (context) matrices, row per word.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub vocab: WordVocab,
    pub dim: usize,
    /// |V| x dim, row-major. The rows served by queries.
    pub input: Vec<f64>,
    /// |V| x dim, row-major. Context-side weights used during training.
    pub output: Vec<f64>,
    pub normalized: bool,
}

impl EmbeddingModel {
    pub fn input_row(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_row(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }
}

/// Divide every input row by its L2 norm. Zero rows stay zero with a warning.
pub fn normalize(mut model: EmbeddingModel) -> EmbeddingModel {
    for id in 0..model.vocab.len() {
        let row = &mut model.input[id * model.dim..(id + 1) * model.dim];
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            log::warn!("zero embedding row for {:?} left unnormalized", model.vocab.word(id));
            continue;
        }
        for x in row.iter_mut() {
            *x /= norm;
        }
    }
    model.normalized = true;
    model
}

/// Cosine similarity, symmetric, in [-1, 1]. Errors on zero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Top-k nearest words by cosine, query excluded, ties by ascending id.
/// Ranks in the returned list are the 1-based positions of the full ordering.
pub fn most_similar(
    model: &EmbeddingModel,
    word: &str,
    k: usize,
) -> Result<Vec<(String, f64)>, EmbedError> {
    let query_id = model
        .vocab
        .id_of(word)
        .ok_or_else(|| EmbedError::OutOfVocabulary(word.to_string()))?;
    let query = model.input_row(query_id).to_vec();
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(model.vocab.len().saturating_sub(1));
    for id in 0..model.vocab.len() {
        if id == query_id {
            continue;
        }
        let score = cosine(&query, model.input_row(id))?;
        scored.push((id, score));
    }
    sort_by_score_then_id(&mut scored);
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(id, s)| (model.vocab.word(id).to_string(), s))
        .collect())
}

fn sort_by_score_then_id(scored: &mut [(usize, f64)]) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("cosine scores are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// Vector-offset analogy: argmax over vocab \ {a, b, c} of
/// cosine(v, v_b - v_a + v_c) on normalized vectors.
pub fn analogy(
    model: &EmbeddingModel,
    a: &str,
    b: &str,
    c: &str,
) -> Result<String, EmbedError> {
    let lookup = |w: &str| {
        model
            .vocab
            .id_of(w)
            .ok_or_else(|| EmbedError::OutOfVocabulary(w.to_string()))
    };
    let (ia, ib, ic) = (lookup(a)?, lookup(b)?, lookup(c)?);
    let unit = |id: usize| {
        let row = model.input_row(id);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter().map(|x| x / norm.max(1e-300)).collect::<Vec<f64>>()
    };
    let (va, vb, vc) = (unit(ia), unit(ib), unit(ic));
    let target: Vec<f64> = (0..model.dim).map(|d| vb[d] - va[d] + vc[d]).collect();
    let mut best: Option<(usize, f64)> = None;
    for id in 0..model.vocab.len() {
        if id == ia || id == ib || id == ic {
            continue;
        }
        let score = cosine(&target, model.input_row(id))?;
        let better = match best {
            None => true,
            Some((_, s)) => score > s,
        };
        if better {
            best = Some((id, score));
        }
    }
    best.map(|(id, _)| model.vocab.word(id).to_string())
        .ok_or_else(|| EmbedError::OutOfVocabulary("vocabulary too small for analogy".into()))
}

/// Fraction of quadruples (a, b, c, d) answered with d.
pub fn analogy_score(
    model: &EmbeddingModel,
    quadruples: &[(String, String, String, String)],
) -> Result<f64, EmbedError> {
    if quadruples.is_empty() {
        return Err(EmbedError::EmptyPairs);
    }
    let mut correct = 0usize;
    for (a, b, c, d) in quadruples {
        if analogy(model, a, b, c)? == *d {
            correct += 1;
        }
    }
    Ok(correct as f64 / quadruples.len() as f64)
}

/// Bundled 20-quadruple element-symbol/name analogy set.
pub const ANALOGY_QUADRUPLES_DATA: &str = include_str!("../../data/analogy_quadruples.txt");

pub fn bundled_quadruples() -> Vec<(String, String, String, String)> {
    ANALOGY_QUADRUPLES_DATA
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(str::to_string);
            (
                it.next().expect("a"),
                it.next().expect("b"),
                it.next().expect("c"),
                it.next().expect("d"),
            )
        })
        .collect()
}
