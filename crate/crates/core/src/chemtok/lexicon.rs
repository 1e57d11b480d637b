//! Bundled word lists backing token classification: element names, units and
//! the English function words used by the language heuristic. Each list is
//! plain UTF-8, one entry per line, and can be overridden from a file path.

use std::collections::HashSet;
use std::path::Path;

use super::ChemtokError;

pub const ELEMENT_NAMES_DATA: &str = include_str!("../../data/element_names.txt");
pub const UNITS_DATA: &str = include_str!("../../data/units.txt");
pub const FUNCTION_WORDS_DATA: &str = include_str!("../../data/function_words.txt");

/// Length-1 element symbols classified as elements when sentence-internal.
/// Other single capitals ("A", "E", ...) stay words; they are far more often
/// prose than chemistry.
pub const SINGLE_LETTER_ELEMENTS: [&str; 13] =
    ["B", "C", "N", "O", "F", "P", "S", "K", "V", "W", "Y", "I", "U"];

#[derive(Debug, Clone)]
pub struct Lexicons {
    element_names: HashSet<String>,
    units: HashSet<String>,
    function_words: HashSet<String>,
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::bundled()
    }
}

impl Lexicons {
    pub fn bundled() -> Self {
        Self {
            element_names: parse_list(ELEMENT_NAMES_DATA),
            units: UNITS_DATA
                .lines()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
            function_words: parse_list(FUNCTION_WORDS_DATA),
        }
    }

    /// Replace one or more lists from override files.
    pub fn with_overrides(
        element_names: Option<&Path>,
        units: Option<&Path>,
        function_words: Option<&Path>,
    ) -> Result<Self, ChemtokError> {
        let mut lex = Self::bundled();
        if let Some(p) = element_names {
            lex.element_names = parse_list(&read(p)?);
        }
        if let Some(p) = units {
            lex.units = read(p)?
                .lines()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
        }
        if let Some(p) = function_words {
            lex.function_words = parse_list(&read(p)?);
        }
        Ok(lex)
    }

    pub fn is_element_name(&self, word: &str) -> bool {
        self.element_names.contains(&word.to_lowercase())
    }

    /// Units match case-sensitively ("mV" is a unit, "mv" is not).
    pub fn is_unit(&self, word: &str) -> bool {
        self.units.contains(word)
    }

    pub fn is_function_word(&self, word: &str) -> bool {
        self.function_words.contains(&word.to_lowercase())
    }
}

fn parse_list(data: &str) -> HashSet<String> {
    data.lines()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn read(path: &Path) -> Result<String, ChemtokError> {
    std::fs::read_to_string(path).map_err(|source| ChemtokError::LexiconIo {
        path: path.display().to_string(),
        source,
    })
}
