//! Corpus acquisition and preparation: fetch bibliographic records, filter
//! them by topic/substrate/language/content-type, clean the text, deduplicate
//! by id and persist one record per line.

pub mod client;

pub use client::{fetch_records, SourceConfig};

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemtok::Lexicons;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("live mode requires credential in environment variable {0}")]
    MissingCredential(String),
    #[error("invalid filter spec: {0}")]
    InvalidFilterSpec(String),
    #[error("http request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Article,
    Review,
    Conference,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    LiveApi,
    Fixture,
}

/// One bibliographic record flowing through the filters into the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default = "unknown_language")]
    pub language: String,
    #[serde(default = "default_content_type")]
    pub content_type: ContentType,
    #[serde(default = "default_source", skip_serializing)]
    pub source: RecordSource,
}

fn unknown_language() -> String {
    "unknown".to_string()
}
fn default_content_type() -> ContentType {
    ContentType::Other
}
fn default_source() -> RecordSource {
    RecordSource::Fixture
}

/// Wildcard pattern: literal token match, or prefix match when the pattern
/// ends in `*`. The wildcard is only valid in terminal position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern(String);

impl Pattern {
    pub fn new(raw: &str) -> Result<Self, CorpusError> {
        if raw.is_empty() {
            return Err(CorpusError::InvalidFilterSpec("empty pattern".into()));
        }
        let inner = raw.strip_suffix('*').unwrap_or(raw);
        if inner.contains('*') {
            return Err(CorpusError::InvalidFilterSpec(format!(
                "wildcard only allowed in terminal position: {raw}"
            )));
        }
        if inner.is_empty() {
            return Err(CorpusError::InvalidFilterSpec("bare wildcard".into()));
        }
        Ok(Self(raw.to_lowercase()))
    }

    /// Case-insensitive match against one token.
    pub fn matches_token(&self, token: &str) -> bool {
        let token = token.to_lowercase();
        match self.0.strip_suffix('*') {
            Some(prefix) => token.starts_with(prefix),
            None => token == self.0,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Filter specification: AND-groups of OR patterns over title/abstract/
/// keywords, at least one substrate pattern, a single allowed language and a
/// set of allowed content types.
#[derive(Debug, Clone)]
pub struct FilterSpec {
    pub title_or_abstract_terms: Vec<Vec<Pattern>>,
    pub substrate_terms: Vec<Pattern>,
    pub allowed_language: String,
    pub allowed_content_types: HashSet<ContentType>,
}

impl FilterSpec {
    /// The query the toolkit was built around: ("chrom*") AND ("replace*" OR
    /// "substitute"), substrates alumin*/zinc/magnesium/alloy/steel/iron,
    /// English articles and reviews.
    pub fn chromate_default() -> Self {
        let group = |pats: &[&str]| pats.iter().map(|p| Pattern::new(p).unwrap()).collect();
        Self {
            title_or_abstract_terms: vec![
                group(&["chrom*"]),
                group(&["replace*", "substitute"]),
            ],
            substrate_terms: group(&["alumin*", "zinc", "magnesium", "alloy", "steel", "iron"]),
            allowed_language: "en".to_string(),
            allowed_content_types: [ContentType::Article, ContentType::Review]
                .into_iter()
                .collect(),
        }
    }
}

fn record_tokens(record: &DocumentRecord) -> Vec<String> {
    let mut text = String::new();
    text.push_str(&record.title);
    text.push(' ');
    text.push_str(&record.abstract_text);
    for kw in &record.keywords {
        text.push(' ');
        text.push_str(kw);
    }
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Effective language of a record: the record's own tag when present,
/// otherwise a stopword-ratio heuristic (fraction of tokens in the English
/// function-word list >= 0.05 and ASCII-letter ratio >= 0.9).
pub fn effective_language(record: &DocumentRecord, lex: &Lexicons) -> String {
    if record.language != "unknown" && !record.language.is_empty() {
        return record.language.to_lowercase();
    }
    let tokens = record_tokens(record);
    if tokens.is_empty() {
        return "unknown".to_string();
    }
    let stop = tokens.iter().filter(|t| lex.is_function_word(t)).count();
    let stop_ratio = stop as f64 / tokens.len() as f64;
    let letters: Vec<char> = record
        .abstract_text
        .chars()
        .chain(record.title.chars())
        .filter(|c| c.is_alphabetic())
        .collect();
    let ascii = letters.iter().filter(|c| c.is_ascii_alphabetic()).count();
    let ascii_ratio = if letters.is_empty() {
        0.0
    } else {
        ascii as f64 / letters.len() as f64
    };
    if stop_ratio >= 0.05 && ascii_ratio >= 0.9 {
        "en".to_string()
    } else {
        "other".to_string()
    }
}

/// A record passes iff every AND-group has a matching pattern, some substrate
/// pattern matches, the effective language equals the allowed one and its
/// content type is allowed. Pure per record, so filtering is monotone in the
/// input.
pub fn filter_records(
    records: &[DocumentRecord],
    spec: &FilterSpec,
    lex: &Lexicons,
) -> Vec<DocumentRecord> {
    records
        .iter()
        .filter(|r| record_passes(r, spec, lex))
        .cloned()
        .collect()
}

pub fn record_passes(record: &DocumentRecord, spec: &FilterSpec, lex: &Lexicons) -> bool {
    let tokens = record_tokens(record);
    let group_hits = |group: &[Pattern]| {
        group
            .iter()
            .any(|p| tokens.iter().any(|t| p.matches_token(t)))
    };
    spec.title_or_abstract_terms.iter().all(|g| group_hits(g))
        && group_hits(&spec.substrate_terms)
        && effective_language(record, lex) == spec.allowed_language
        && spec.allowed_content_types.contains(&record.content_type)
}

/// Remove angle-bracket markup, resolve the five standard XML entities, strip
/// leading "Abstract" heading words and collapse whitespace. Idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut out: String = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for ch in raw.chars() {
        match ch {
            '<' => depth += 1,
            '>' => {
                if depth > 0 {
                    depth -= 1;
                } else {
                    out.push(' ');
                }
            }
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    // decode to a fixpoint so nested escapes ("&amp;quot;") cannot survive a
    // single pass and break idempotence; lt/gt become spaces, not markup
    loop {
        let next = out
            .replace("&lt;", " ")
            .replace("&gt;", " ")
            .replace("&quot;", "\"")
            .replace("&apos;", "'")
            .replace("&amp;", "&");
        if next == out {
            break;
        }
        out = next;
    }
    let mut words: Vec<&str> = out.split_whitespace().collect();
    while let Some(first) = words.first() {
        if matches!(*first, "Abstract" | "Abstract:" | "Abstract." | "ABSTRACT" | "ABSTRACT:") {
            words.remove(0);
        } else {
            break;
        }
    }
    words.join(" ")
}

/// Content screening applied after cleaning: very short abstracts and
/// blocklist phrases drop the record.
#[derive(Debug, Clone)]
pub struct ScreenRules {
    pub min_abstract_chars: usize,
    pub blocklist: Vec<String>,
}

impl Default for ScreenRules {
    fn default() -> Self {
        Self {
            min_abstract_chars: 200,
            blocklist: vec!["copyright".into(), "no abstract available".into()],
        }
    }
}

impl ScreenRules {
    pub fn keeps(&self, cleaned_abstract: &str) -> bool {
        if cleaned_abstract.chars().count() < self.min_abstract_chars {
            return false;
        }
        let lower = cleaned_abstract.to_lowercase();
        !self.blocklist.iter().any(|p| lower.contains(p))
    }
}

/// One persisted corpus line. Field order is fixed (id, text) so identical
/// input serializes to identical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub id: String,
    pub text: String,
}

/// A written corpus file plus the duplicate count reported by dedup.
#[derive(Debug)]
pub struct CorpusFile {
    pub path: PathBuf,
    pub records: usize,
    pub duplicates_dropped: usize,
}

/// Write records one JSON object per line (UTF-8, LF), deduplicating by id
/// with the later duplicate dropped.
pub fn write_corpus(records: &[CorpusLine], path: &Path) -> Result<CorpusFile, CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let mut seen = HashSet::new();
    let mut written = 0usize;
    let mut duplicates = 0usize;
    for record in records {
        if !seen.insert(record.id.clone()) {
            duplicates += 1;
            continue;
        }
        let line = serde_json::to_string(record).expect("corpus line serializes");
        w.write_all(line.as_bytes()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        w.write_all(b"\n").map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written += 1;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(CorpusFile {
        path: path.to_path_buf(),
        records: written,
        duplicates_dropped: duplicates,
    })
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusLine>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusLine =
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
