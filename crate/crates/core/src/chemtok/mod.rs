//! Chemistry-aware word-level tokenization: sentence splitting, token
//! classification, formula normalization, placeholder substitution and casing
//! rules. Classification precedence is Formula > Element > Number/Unit >
//! Abbreviation > Word and every token gets exactly one kind.

pub mod formula;
pub mod lexicon;

pub use formula::{normalize_formula, normalized_form, parse_formula, FormulaAst};
pub use lexicon::Lexicons;

use thiserror::Error;

/// Placeholder emitted for element symbols and names when the policy is on.
pub const ELEMENT_TOKEN: &str = "#element";
/// Placeholder emitted for numeric literals when the policy is on.
pub const NUMBER_TOKEN: &str = "#nUm";
/// Placeholder emitted for measurement units when the policy is on.
pub const UNIT_TOKEN: &str = "#unit";

#[derive(Debug, Error)]
pub enum ChemtokError {
    #[error("failed to read lexicon file {path}: {source}")]
    LexiconIo {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Formula,
    Element,
    Number,
    Unit,
    Abbreviation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    pub normalized: String,
}

/// Ordered, nonempty token container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

/// Placeholder substitution policy for [`apply_word_pipeline`].
///
/// `On` is the word-embedding path: elements, numbers and units collapse to
/// placeholder tokens, formulas are normalized, plain words are lowercased
/// and abbreviations pass through.
///
/// `Off` is the subword path: formulas are still normalized and plain words
/// lowercased, but there is no placeholder substitution and no lowercasing of
/// formulas, abbreviations, elements, numbers or units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceholderPolicy {
    On,
    Off,
}

/// Split cleaned text into sentences. A boundary sits at `.`, `!` or `?`
/// followed by whitespace and an uppercase letter, never inside a
/// parenthesized group and never immediately after a single lowercase letter
/// standing alone (an abbreviation like "p. 5"). Text without a terminator is
/// one sentence; empty text is none.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut depth = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        match chars[i] {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            '.' | '!' | '?' if depth == 0 => {
                let followed = next_nonspace_is_upper(&chars, i + 1);
                let after_abbrev = chars[i] == '.' && is_single_lowercase_before(&chars, i);
                if followed && !after_abbrev {
                    push_trimmed(&mut sentences, &chars[start..=i]);
                    start = i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if start < chars.len() {
        push_trimmed(&mut sentences, &chars[start..]);
    }
    sentences
}

fn next_nonspace_is_upper(chars: &[char], mut i: usize) -> bool {
    if i >= chars.len() || !chars[i].is_whitespace() {
        return false;
    }
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    i < chars.len() && chars[i].is_uppercase()
}

fn is_single_lowercase_before(chars: &[char], dot: usize) -> bool {
    if dot == 0 || !chars[dot - 1].is_ascii_lowercase() {
        return false;
    }
    dot == 1 || chars[dot - 2].is_whitespace()
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// Position of a token within its sentence; sentence-initial single capitals
/// stay words instead of becoming element symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentencePosition {
    Initial,
    Internal,
}

/// Classify one whitespace-free surface. Pure in the surface, position and
/// lexicons; Word is the fallback so classification never fails.
pub fn classify_token(surface: &str, position: SentencePosition, lex: &Lexicons) -> TokenKind {
    debug_assert!(!surface.is_empty() && !surface.chars().any(char::is_whitespace));
    if let Some(ast) = parse_formula(surface) {
        if is_bare_element_symbol(surface, &ast) {
            if element_symbol_allowed(surface, position) {
                return TokenKind::Element;
            }
        } else {
            return TokenKind::Formula;
        }
    }
    if lex.is_element_name(surface) {
        return TokenKind::Element;
    }
    if is_number(surface) {
        return TokenKind::Number;
    }
    if lex.is_unit(surface) {
        return TokenKind::Unit;
    }
    if has_noninitial_uppercase(surface) {
        return TokenKind::Abbreviation;
    }
    TokenKind::Word
}

/// A surface that parses to a single element with count 1 and is literally
/// the symbol (no digits, charge or parens).
fn is_bare_element_symbol(surface: &str, ast: &FormulaAst) -> bool {
    ast.distinct_elements() == 1 && ast.total_atoms() == 1 && formula::is_element_symbol(surface)
}

/// Single-capital disambiguation: two-letter symbols count only
/// sentence-internal, one-letter symbols only sentence-internal and only from
/// the allowlist. "In the coating" keeps "In" a word; "alloyed with In" does
/// not.
fn element_symbol_allowed(surface: &str, position: SentencePosition) -> bool {
    if position == SentencePosition::Initial {
        return false;
    }
    surface.len() >= 2 || lexicon::SINGLE_LETTER_ELEMENTS.contains(&surface)
}

/// Integer, decimal or scientific literal with optional sign.
pub fn is_number(surface: &str) -> bool {
    let s = surface.as_bytes();
    let mut i = 0;
    if i < s.len() && (s[i] == b'+' || s[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < s.len() && s[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < s.len() && s[i] == b'.' {
        i += 1;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return false;
    }
    if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
        i += 1;
        if i < s.len() && (s[i] == b'+' || s[i] == b'-') {
            i += 1;
        }
        let mut exp = 0;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            exp += 1;
        }
        if exp == 0 {
            return false;
        }
    }
    i == s.len()
}

fn has_noninitial_uppercase(surface: &str) -> bool {
    surface.chars().skip(1).any(char::is_uppercase)
}

/// Tokenize one sentence string: whitespace split, punctuation trim,
/// classification.
pub fn tokenize_sentence(sentence: &str, lex: &Lexicons) -> Option<Sentence> {
    let mut tokens = Vec::new();
    for raw in sentence.split_whitespace() {
        let surface = trim_punctuation(raw);
        if surface.is_empty() {
            continue;
        }
        let position = if tokens.is_empty() {
            SentencePosition::Initial
        } else {
            SentencePosition::Internal
        };
        let kind = classify_token(surface, position, lex);
        tokens.push(Token {
            surface: surface.to_string(),
            kind,
            normalized: surface.to_string(),
        });
    }
    if tokens.is_empty() {
        None
    } else {
        Some(Sentence { tokens })
    }
}

/// Strip sentence punctuation from token edges while keeping chemistry
/// punctuation ("Ce(NO3)3", "Ni-P", "wt.%") intact.
fn trim_punctuation(raw: &str) -> &str {
    let strip = |c: char| matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}');
    let mut s = raw.trim_matches(strip);
    // unbalanced enclosing parens/brackets from prose, e.g. "(zinc" or "zinc)"
    loop {
        let before = s;
        if s.starts_with('(') && !s.contains(')') {
            s = &s[1..];
        }
        if s.ends_with(')') && !s.contains('(') {
            s = &s[..s.len() - 1];
        }
        if s.starts_with('[') && !s.ends_with(']') && !s.contains(']') {
            s = &s[1..];
        }
        if s.ends_with(']') && !s.contains('[') {
            s = &s[..s.len() - 1];
        }
        let t = s.trim_matches(strip);
        if t == before {
            return t;
        }
        s = t;
    }
}

/// Apply the normalization policy, filling each token's `normalized` field.
/// Token count never changes.
pub fn apply_word_pipeline(mut sentence: Sentence, policy: PlaceholderPolicy) -> Sentence {
    for token in &mut sentence.tokens {
        token.normalized = match (policy, token.kind) {
            (PlaceholderPolicy::On, TokenKind::Element) => ELEMENT_TOKEN.to_string(),
            (PlaceholderPolicy::On, TokenKind::Number) => NUMBER_TOKEN.to_string(),
            (PlaceholderPolicy::On, TokenKind::Unit) => UNIT_TOKEN.to_string(),
            (_, TokenKind::Formula) => {
                normalized_form(&token.surface).unwrap_or_else(|| token.surface.clone())
            }
            (_, TokenKind::Word) => token.surface.to_lowercase(),
            (_, TokenKind::Abbreviation) => token.surface.clone(),
            (PlaceholderPolicy::Off, _) => token.surface.clone(),
        };
    }
    sentence
}

/// Full text-to-token pipeline: sentences, classification, normalization.
/// Returns one `Vec<String>` of normalized tokens per sentence.
pub fn process_text(text: &str, policy: PlaceholderPolicy, lex: &Lexicons) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .filter_map(|s| tokenize_sentence(s, lex))
        .map(|s| {
            apply_word_pipeline(s, policy)
                .tokens
                .into_iter()
                .map(|t| t.normalized)
                .collect()
        })
        .collect()
}
