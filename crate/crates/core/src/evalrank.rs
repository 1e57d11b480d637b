//! Evaluation of ranked model outputs against the 20-category benchmark of
//! known chromate alternatives: relevance screening, category matching,
//! rates, inter-model overlap, corpus frequencies and figure-ready CSVs.
//!
//! Two relevance modes exist. The curated mode replays the shipped
//! per-model relevant-term lists so the reference evaluation reproduces
//! exactly; the heuristic mode screens new model output with allow/stop
//! lexicons. Term identity uses the normalized form: the formula
//! normalization of the term when it parses as a chemical formula, otherwise
//! the surface itself; the union keeps case (element-symbol case is
//! meaningful) while overlap comparison case-folds.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemtok::normalized_form;

pub const BENCHMARK_LEXICON_DATA: &str = include_str!("../data/benchmark_lexicon.txt");
pub const CURATED_RELEVANCE_DATA: &str = include_str!("../data/curated_relevance.txt");
pub const APPENDIX_BERT_DATA: &str = include_str!("../data/fixtures/appendix_bert.txt");
pub const APPENDIX_W2V_DATA: &str = include_str!("../data/fixtures/appendix_w2v.txt");

pub const CATEGORY_COUNT: usize = 20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{context}:{line}: {message}")]
    Format {
        context: String,
        line: usize,
        message: String,
    },
    #[error("benchmark lexicon invalid: {0}")]
    BadLexicon(String),
    #[error("candidate ranks not strictly increasing for {0}")]
    BadRanks(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Model labels: the word-embedding run and the six mask templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelLabel {
    W2v,
    Can,
    May,
    Chromate,
    Inhibitor,
    Perform,
    Coating,
}

impl ModelLabel {
    pub const ALL: [ModelLabel; 7] = [
        ModelLabel::W2v,
        ModelLabel::Can,
        ModelLabel::May,
        ModelLabel::Chromate,
        ModelLabel::Inhibitor,
        ModelLabel::Perform,
        ModelLabel::Coating,
    ];

    pub const BERT_FAMILY: [ModelLabel; 6] = [
        ModelLabel::Can,
        ModelLabel::May,
        ModelLabel::Chromate,
        ModelLabel::Inhibitor,
        ModelLabel::Perform,
        ModelLabel::Coating,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLabel::W2v => "w2v",
            ModelLabel::Can => "can",
            ModelLabel::May => "may",
            ModelLabel::Chromate => "chromate",
            ModelLabel::Inhibitor => "inhibitor",
            ModelLabel::Perform => "perform",
            ModelLabel::Coating => "coating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn is_bert(&self) -> bool {
        *self != ModelLabel::W2v
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ranked candidate list of one model; ranks strictly increasing.
#[derive(Debug, Clone)]
pub struct CandidateList {
    pub label: ModelLabel,
    pub entries: Vec<(u32, String)>,
}

impl CandidateList {
    pub fn new(label: ModelLabel, entries: Vec<(u32, String)>) -> Result<Self, EvalError> {
        let mut prev: Option<u32> = None;
        for (rank, term) in &entries {
            if term.trim().is_empty() {
                return Err(EvalError::Format {
                    context: label.as_str().into(),
                    line: *rank as usize,
                    message: "empty term".into(),
                });
            }
            if let Some(p) = prev {
                if *rank <= p {
                    return Err(EvalError::BadRanks(label.as_str().into()));
                }
            }
            prev = Some(*rank);
        }
        Ok(Self { label, entries })
    }
}

/// Normalized term identity, case preserved: the alphabetical formula form
/// for parseable formulas, the surface otherwise.
pub fn normalized_term(term: &str) -> String {
    normalized_form(term).unwrap_or_else(|| term.to_string())
}

/// Case-folded normalized identity, used for overlap and lexicon lookups.
pub fn folded_term(term: &str) -> String {
    normalized_term(term).to_lowercase()
}

/// Benchmark lexicon: 20 categories of known alternatives, each with
/// case-insensitive aliases; every alias belongs to exactly one category.
#[derive(Debug, Clone)]
pub struct BenchmarkLexicon {
    pub names: BTreeMap<u32, String>,
    alias_to_category: HashMap<String, u32>,
}

impl BenchmarkLexicon {
    pub fn bundled() -> Self {
        Self::parse(BENCHMARK_LEXICON_DATA, "bundled benchmark lexicon")
            .expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Lines of `category_id,category_name,alias`.
    pub fn parse(text: &str, context: &str) -> Result<Self, EvalError> {
        let mut names = BTreeMap::new();
        let mut alias_to_category = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let bad = |message: &str| EvalError::Format {
                context: context.to_string(),
                line: idx + 1,
                message: message.to_string(),
            };
            let id: u32 = parts
                .next()
                .ok_or_else(|| bad("missing id"))?
                .trim()
                .parse()
                .map_err(|_| bad("bad category id"))?;
            let name = parts.next().ok_or_else(|| bad("missing name"))?.trim();
            let alias = parts.next().ok_or_else(|| bad("missing alias"))?.trim();
            if !(1..=CATEGORY_COUNT as u32).contains(&id) {
                return Err(bad("category id outside 1..=20"));
            }
            match names.get(&id) {
                None => {
                    names.insert(id, name.to_string());
                }
                Some(existing) if existing != name => {
                    return Err(bad("conflicting category name"));
                }
                _ => {}
            }
            let key = alias.to_lowercase();
            if let Some(owner) = alias_to_category.insert(key, id) {
                if owner != id {
                    return Err(EvalError::BadLexicon(format!(
                        "alias {alias} belongs to categories {owner} and {id}"
                    )));
                }
            }
        }
        if names.len() != CATEGORY_COUNT {
            return Err(EvalError::BadLexicon(format!(
                "expected {CATEGORY_COUNT} categories, found {}",
                names.len()
            )));
        }
        Ok(Self {
            names,
            alias_to_category,
        })
    }

    /// Case-insensitive match of the term and, when it parses as a formula,
    /// of its normalized formula form.
    pub fn match_term(&self, term: &str) -> Option<u32> {
        if let Some(&c) = self.alias_to_category.get(&term.to_lowercase()) {
            return Some(c);
        }
        if let Some(normalized) = normalized_form(term) {
            if let Some(&c) = self.alias_to_category.get(&normalized.to_lowercase()) {
                return Some(c);
            }
        }
        None
    }
}

/// Heuristic relevance lexicons for new model output: allow terms, allow
/// suffixes, allow parseable multi-element formulas; stop terms always drop.
#[derive(Debug, Clone)]
pub struct RelevanceLexicons {
    pub allow_terms: HashSet<String>,
    pub allow_suffixes: Vec<String>,
    pub stop_terms: HashSet<String>,
}

impl RelevanceLexicons {
    pub fn new(
        allow_terms: HashSet<String>,
        allow_suffixes: Vec<String>,
        stop_terms: HashSet<String>,
    ) -> Result<Self, EvalError> {
        if let Some(bad) = allow_terms.intersection(&stop_terms).next() {
            return Err(EvalError::BadLexicon(format!(
                "term {bad} is in both the allowlist and the stoplist"
            )));
        }
        Ok(Self {
            allow_terms,
            allow_suffixes,
            stop_terms,
        })
    }

    pub fn default_heuristic() -> Self {
        let allow_terms: HashSet<String> = crate::chemtok::lexicon::ELEMENT_NAMES_DATA
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .chain(
                [
                    "coating", "coatings", "inhibitor", "inhibitors", "primer", "primers",
                    "pigment", "pigments", "anodising", "anodizing", "electroplating", "plating",
                    "sol-gel", "graphene", "epoxy", "polyaniline", "polypyrrole", "silane",
                    "silanes", "silica", "ldh", "ldhs", "clay", "clays",
                ]
                .into_iter()
                .map(str::to_string),
            )
            .collect();
        let allow_suffixes = [
            "ate", "ates", "ide", "ides", "ite", "ites", "ium", "oxide", "oxides", "amine",
            "amines", "acid", "ic", "ane", "anes", "ene", "enes", "ol", "phosphate",
        ]
        .into_iter()
        .map(str::to_string)
        .collect();
        let stop_terms: HashSet<String> = [
            "steel", "steels", "iron", "alloy", "alloys", "metal", "metals", "obtained",
            "needed", "available", "possible", "used", "using", "shown", "observed",
            "prepared", "studied", "tested", "reported", "stable", "pretreated", "inhibited",
            "inhibiting", "inhibition", "crystalline", "amorphous", "hybrid", "organic",
            "inorganic", "alkaline", "alkali", "steam", "clad",
        ]
        .into_iter()
        .map(str::to_string)
        .collect();
        // the allowlist inherits element names; keep the stoplist disjoint
        Self::new(
            allow_terms
                .into_iter()
                .filter(|t| !["iron"].contains(&t.as_str()))
                .collect(),
            allow_suffixes,
            stop_terms,
        )
        .expect("default lexicons are disjoint")
    }

    pub fn is_relevant(&self, term: &str) -> bool {
        let t = term.to_lowercase();
        if self.stop_terms.contains(&t) {
            return false;
        }
        if self.allow_terms.contains(&t) {
            return true;
        }
        if self
            .allow_suffixes
            .iter()
            .any(|suffix| t.len() > suffix.len() && t.ends_with(suffix))
        {
            return true;
        }
        // formula shape: parses and is not a bare single atom of prose;
        // multi-character chemistry like BiVO4, ZrO2, Ni-P fails or passes
        // the parse as a whole
        if let Some(ast) = crate::chemtok::parse_formula(term) {
            return ast.distinct_elements() >= 2 || ast.total_atoms() >= 2 || term.len() <= 2;
        }
        false
    }
}

/// Relevance screening mode.
#[derive(Debug, Clone)]
pub enum RelevanceMode {
    /// Per-model curated relevant (label, term) pairs: replays the shipped
    /// reference judgments exactly.
    Curated(HashSet<(ModelLabel, String)>),
    Heuristic(RelevanceLexicons),
}

impl RelevanceMode {
    pub fn bundled_curated() -> Self {
        Self::parse_curated(CURATED_RELEVANCE_DATA, "bundled curated relevance")
            .expect("bundled curation is valid")
    }

    pub fn parse_curated(text: &str, context: &str) -> Result<Self, EvalError> {
        let mut set = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label_str, term) = line.split_once(',').ok_or_else(|| EvalError::Format {
                context: context.to_string(),
                line: idx + 1,
                message: "expected label,term".into(),
            })?;
            let label = ModelLabel::parse(label_str.trim()).ok_or_else(|| EvalError::Format {
                context: context.to_string(),
                line: idx + 1,
                message: format!("unknown model label {label_str}"),
            })?;
            set.insert((label, term.trim().to_lowercase()));
        }
        Ok(Self::Curated(set))
    }

    pub fn load_curated(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_curated(&text, &path.display().to_string())
    }

    fn keeps(&self, label: ModelLabel, term: &str) -> bool {
        match self {
            RelevanceMode::Curated(set) => set.contains(&(label, term.to_lowercase())),
            RelevanceMode::Heuristic(lex) => lex.is_relevant(term),
        }
    }
}

/// First k entries with their original ranks preserved.
pub fn take_top_k(list: &CandidateList, k: usize) -> CandidateList {
    CandidateList {
        label: list.label,
        entries: list.entries.iter().take(k).cloned().collect(),
    }
}

/// Keep entries the relevance mode accepts.
pub fn relevance_filter(list: &CandidateList, mode: &RelevanceMode) -> CandidateList {
    CandidateList {
        label: list.label,
        entries: list
            .entries
            .iter()
            .filter(|(_, term)| mode.keeps(list.label, term))
            .cloned()
            .collect(),
    }
}

/// Category of a term under the lexicon, or `None`.
pub fn match_benchmark(term: &str, lexicon: &BenchmarkLexicon) -> Option<u32> {
    lexicon.match_term(term)
}

/// Token occurrences whose normalized form equals the term,
/// case-insensitive.
pub fn corpus_frequency<S: AsRef<str>>(sentences: &[Vec<S>], term: &str) -> u64 {
    let target = folded_term(term);
    sentences
        .iter()
        .flat_map(|s| s.iter())
        .filter(|tok| folded_term(tok.as_ref()) == target)
        .count() as u64
}

/// Overlap denominator choice; the numerator is always the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapDefinition {
    /// |w2v intersect bert| / |w2v| (default).
    IntersectionOverW2v,
    /// |w2v intersect bert| / |w2v union bert|.
    IntersectionOverUnion,
}

impl OverlapDefinition {
    pub fn describe(&self) -> &'static str {
        match self {
            OverlapDefinition::IntersectionOverW2v => {
                "overlap = |relevant(w2v) ∩ relevant(bert union)| / |relevant(w2v)|, case-insensitive normalized terms"
            }
            OverlapDefinition::IntersectionOverUnion => {
                "overlap = |relevant(w2v) ∩ relevant(bert union)| / |relevant(w2v) ∪ relevant(bert union)|, case-insensitive normalized terms"
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: ModelLabel,
    pub total: usize,
    pub relevant: usize,
    pub benchmark_related: usize,
    pub benchmark_related_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryReport {
    pub id: u32,
    pub name: String,
    pub w2v_count: usize,
    pub bert_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub term: String,
    pub count: u64,
    pub in_corpus: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelReport>,
    pub categories: Vec<CategoryReport>,
    /// Distinct relevant terms in the bert union (case-preserved normalized).
    pub bert_union_distinct: usize,
    pub overlap_rate: f64,
    pub overlap_definition: OverlapDefinition,
    pub frequencies: Vec<FrequencyEntry>,
}

impl EvalReport {
    pub fn model(&self, label: ModelLabel) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.label == label)
    }

    pub fn categories_covered_by_w2v(&self) -> Vec<u32> {
        self.categories
            .iter()
            .filter(|c| c.w2v_count > 0)
            .map(|c| c.id)
            .collect()
    }

    pub fn categories_covered_by_bert(&self) -> Vec<u32> {
        self.categories
            .iter()
            .filter(|c| c.bert_count > 0)
            .map(|c| c.id)
            .collect()
    }
}

/// Compute the full evaluation report over candidate lists.
pub fn compute_report<S: AsRef<str>>(
    lists: &[CandidateList],
    lexicon: &BenchmarkLexicon,
    relevance: &RelevanceMode,
    overlap_definition: OverlapDefinition,
    corpus: Option<&[Vec<S>]>,
    frequency_terms: &[String],
) -> EvalReport {
    let mut models = Vec::new();
    // family term sets keyed by case-preserved normalized term with a
    // representative surface for category matching
    let mut w2v_terms: BTreeMap<String, String> = BTreeMap::new();
    let mut bert_terms: BTreeMap<String, String> = BTreeMap::new();
    for list in lists {
        let relevant = relevance_filter(list, relevance);
        let benchmark_related = relevant
            .entries
            .iter()
            .filter(|(_, term)| lexicon.match_term(term).is_some())
            .count();
        let rate = if relevant.entries.is_empty() {
            0.0
        } else {
            benchmark_related as f64 / relevant.entries.len() as f64
        };
        models.push(ModelReport {
            label: list.label,
            total: list.entries.len(),
            relevant: relevant.entries.len(),
            benchmark_related,
            benchmark_related_rate: rate,
        });
        let target = if list.label.is_bert() {
            &mut bert_terms
        } else {
            &mut w2v_terms
        };
        for (_, term) in &relevant.entries {
            target.entry(normalized_term(term)).or_insert_with(|| term.clone());
        }
    }

    // per-category distinct-term counts per family
    let mut categories: Vec<CategoryReport> = lexicon
        .names
        .iter()
        .map(|(&id, name)| CategoryReport {
            id,
            name: name.clone(),
            w2v_count: 0,
            bert_count: 0,
        })
        .collect();
    for surface in w2v_terms.values() {
        if let Some(c) = lexicon.match_term(surface) {
            categories[(c - 1) as usize].w2v_count += 1;
        }
    }
    for surface in bert_terms.values() {
        if let Some(c) = lexicon.match_term(surface) {
            categories[(c - 1) as usize].bert_count += 1;
        }
    }

    // overlap over case-folded normalized term sets
    let w2v_folded: HashSet<String> = w2v_terms.keys().map(|t| t.to_lowercase()).collect();
    let bert_folded: HashSet<String> = bert_terms.keys().map(|t| t.to_lowercase()).collect();
    let intersection = w2v_folded.intersection(&bert_folded).count();
    let overlap_rate = match overlap_definition {
        OverlapDefinition::IntersectionOverW2v => {
            if w2v_folded.is_empty() {
                0.0
            } else {
                intersection as f64 / w2v_folded.len() as f64
            }
        }
        OverlapDefinition::IntersectionOverUnion => {
            let union = w2v_folded.union(&bert_folded).count();
            if union == 0 {
                0.0
            } else {
                intersection as f64 / union as f64
            }
        }
    };

    let frequencies = match corpus {
        Some(sentences) => frequency_terms
            .iter()
            .map(|term| {
                let count = corpus_frequency(sentences, term);
                FrequencyEntry {
                    term: term.clone(),
                    count,
                    in_corpus: count > 0,
                }
            })
            .collect(),
        None => Vec::new(),
    };

    EvalReport {
        models,
        categories,
        bert_union_distinct: bert_terms.len(),
        overlap_rate,
        overlap_definition,
        frequencies,
    }
}

/// Parse candidate-list fixture text: `model_label,rank,term` per line,
/// grouped by label in order of first appearance.
pub fn parse_candidate_lists(text: &str, context: &str) -> Result<Vec<CandidateList>, EvalError> {
    let mut order: Vec<ModelLabel> = Vec::new();
    let mut by_label: HashMap<ModelLabel, Vec<(u32, String)>> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| EvalError::Format {
            context: context.to_string(),
            line: idx + 1,
            message,
        };
        let mut parts = line.splitn(3, ',');
        let label_str = parts.next().ok_or_else(|| bad("missing label".into()))?;
        let rank_str = parts.next().ok_or_else(|| bad("missing rank".into()))?;
        let term = parts.next().ok_or_else(|| bad("missing term".into()))?;
        let label = ModelLabel::parse(label_str.trim())
            .ok_or_else(|| bad(format!("unknown model label {label_str}")))?;
        let rank: u32 = rank_str
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad rank {rank_str}")))?;
        if !by_label.contains_key(&label) {
            order.push(label);
        }
        by_label
            .entry(label)
            .or_default()
            .push((rank, term.trim().to_string()));
    }
    order
        .into_iter()
        .map(|label| CandidateList::new(label, by_label.remove(&label).unwrap()))
        .collect()
}

pub fn load_candidate_lists(path: &Path) -> Result<Vec<CandidateList>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_candidate_lists(&text, &path.display().to_string())
}

/// Bundled reference fixtures: the word-embedding list and the six mask
/// lists.
pub fn bundled_fixture_lists() -> Vec<CandidateList> {
    let mut lists = parse_candidate_lists(APPENDIX_W2V_DATA, "bundled w2v fixture")
        .expect("bundled w2v fixture is valid");
    lists.extend(
        parse_candidate_lists(APPENDIX_BERT_DATA, "bundled bert fixture")
            .expect("bundled bert fixture is valid"),
    );
    lists
}

/// Write figure4.csv, figure5.csv, figure6.csv and summary.csv. Output is
/// byte-stable for identical reports.
pub fn export_report(report: &EvalReport, out_dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let write_file = |name: &str, content: String| -> Result<(), EvalError> {
        let path = out_dir.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?);
        w.write_all(content.as_bytes()).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })
    };

    let mut fig4 = String::from("model,count\n");
    for m in &report.models {
        fig4.push_str(&format!("{},{}\n", m.label, m.relevant));
    }
    write_file("figure4.csv", fig4)?;

    let mut fig5 = String::from("model,benchmark_count\n");
    for m in &report.models {
        fig5.push_str(&format!("{},{}\n", m.label, m.benchmark_related));
    }
    write_file("figure5.csv", fig5)?;

    let mut fig6 = String::from("category_id,category_name,w2v_count,bert_count\n");
    for c in &report.categories {
        fig6.push_str(&format!(
            "{},{},{},{}\n",
            c.id, c.name, c.w2v_count, c.bert_count
        ));
    }
    write_file("figure6.csv", fig6)?;

    let mut summary = String::from("metric,value\n");
    for m in &report.models {
        summary.push_str(&format!(
            "benchmark_related_rate_{},{:.6}\n",
            m.label, m.benchmark_related_rate
        ));
    }
    summary.push_str(&format!("bert_union_distinct,{}\n", report.bert_union_distinct));
    summary.push_str(&format!("overlap_rate,{:.6}\n", report.overlap_rate));
    summary.push_str(&format!(
        "overlap_definition,{}\n",
        match report.overlap_definition {
            OverlapDefinition::IntersectionOverW2v => "intersection_over_w2v",
            OverlapDefinition::IntersectionOverUnion => "intersection_over_union",
        }
    ));
    for f in &report.frequencies {
        summary.push_str(&format!(
            "frequency_{},{} ({})\n",
            f.term,
            f.count,
            if f.in_corpus { "in_corpus" } else { "out_of_corpus" }
        ));
    }
    write_file("summary.csv", summary)
}
