//! Chemical formula parsing and alphabetical normalization.
//!
//! Grammar: `formula := unit+ ; unit := element count? | '(' unit+ ')' count?`.
//! Groups multiply their inner counts, duplicate elements merge by summing,
//! and normalization emits the merged elements in ascending symbol order with
//! the count suffix omitted when it is 1.

use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Element symbols of the 118-entry periodic table, bundled.
pub const ELEMENTS_DATA: &str = include_str!("../../data/elements.txt");

fn element_set() -> &'static std::collections::HashSet<&'static str> {
    static SET: OnceLock<std::collections::HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| ELEMENTS_DATA.lines().map(str::trim).filter(|s| !s.is_empty()).collect())
}

/// Whether `sym` is a standard element symbol (case-sensitive).
pub fn is_element_symbol(sym: &str) -> bool {
    element_set().contains(sym)
}

/// Parsed formula: element symbol -> merged count. BTreeMap keeps the
/// ascending symbol order the normalizer needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaAst {
    items: BTreeMap<String, u32>,
}

impl FormulaAst {
    pub fn from_counts<I: IntoIterator<Item = (String, u32)>>(counts: I) -> Self {
        let mut items = BTreeMap::new();
        for (sym, n) in counts {
            *items.entry(sym).or_insert(0) += n;
        }
        Self { items }
    }

    /// (symbol, count) pairs in ascending symbol order.
    pub fn items(&self) -> impl Iterator<Item = (&str, u32)> {
        self.items.iter().map(|(s, c)| (s.as_str(), *c))
    }

    pub fn count_of(&self, sym: &str) -> u32 {
        self.items.get(sym).copied().unwrap_or(0)
    }

    pub fn distinct_elements(&self) -> usize {
        self.items.len()
    }

    pub fn total_atoms(&self) -> u64 {
        self.items.values().map(|c| u64::from(*c)).sum()
    }
}

/// Map unicode subscript digits to ASCII and strip a trailing charge suffix
/// such as `^2-` or `2+` before parsing. Hydrate dots stay in place and make
/// the parse fail, which callers treat as not-a-formula.
fn prepare(surface: &str) -> String {
    let mut s = String::with_capacity(surface.len());
    for ch in surface.chars() {
        match ch {
            '\u{2080}'..='\u{2089}' => {
                s.push(char::from(b'0' + (ch as u32 - 0x2080) as u8));
            }
            _ => s.push(ch),
        }
    }
    // charge suffixes: "^2-", "^-", "2+", "+", "-" at the very end
    if let Some(caret) = s.find('^') {
        let tail = &s[caret + 1..];
        if tail.chars().all(|c| c.is_ascii_digit() || c == '+' || c == '-') {
            s.truncate(caret);
        }
    } else {
        let keep = s.trim_end_matches(['+', '-']).len();
        s.truncate(keep);
    }
    s
}

/// Parse a candidate surface. Returns `None` when the surface is not a
/// well-formed formula (unknown symbol, dangling parenthesis, stray
/// character); the caller falls back to ordinary token classification.
pub fn parse_formula(surface: &str) -> Option<FormulaAst> {
    let s = prepare(surface);
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'(' || b == b')') {
        return None;
    }
    let bytes = s.as_bytes();
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let (end, any) = parse_units(bytes, 0, 1, &mut counts)?;
    if end != bytes.len() || !any {
        return None;
    }
    Some(FormulaAst { items: counts })
}

/// Parse a run of units at `i`, scaling merged counts by `mult`. Returns the
/// index after the run and whether at least one unit was consumed.
fn parse_units(
    s: &[u8],
    mut i: usize,
    mult: u32,
    counts: &mut BTreeMap<String, u32>,
) -> Option<(usize, bool)> {
    let mut any = false;
    while i < s.len() {
        match s[i] {
            b'(' => {
                let mut inner: BTreeMap<String, u32> = BTreeMap::new();
                let (j, inner_any) = parse_units(s, i + 1, 1, &mut inner)?;
                if j >= s.len() || s[j] != b')' || !inner_any {
                    return None;
                }
                let (k, group_count) = read_count(s, j + 1);
                for (sym, c) in inner {
                    *counts.entry(sym).or_insert(0) +=
                        c.checked_mul(group_count)?.checked_mul(mult)?;
                }
                i = k;
                any = true;
            }
            b')' => break,
            _ => {
                let sym = match_symbol(s, i)?;
                i += sym.len();
                let (j, count) = read_count(s, i);
                if count == 0 {
                    return None;
                }
                *counts.entry(sym.to_string()).or_insert(0) += count.checked_mul(mult)?;
                i = j;
                any = true;
            }
        }
    }
    Some((i, any))
}

/// Longest-match element symbol at `i`, two letters before one, case-sensitive.
fn match_symbol(s: &[u8], i: usize) -> Option<&str> {
    if i + 1 < s.len() {
        let two = std::str::from_utf8(&s[i..i + 2]).ok()?;
        if is_element_symbol(two) {
            return Some(element_set().get(two).copied().unwrap());
        }
    }
    let one = std::str::from_utf8(&s[i..i + 1]).ok()?;
    element_set().get(one).copied()
}

fn read_count(s: &[u8], mut i: usize) -> (usize, u32) {
    let start = i;
    let mut n: u32 = 0;
    while i < s.len() && s[i].is_ascii_digit() {
        n = n.saturating_mul(10).saturating_add(u32::from(s[i] - b'0'));
        i += 1;
    }
    if i == start {
        (i, 1)
    } else {
        (i, n)
    }
}

/// Render the AST with elements in ascending symbol order, omitting count 1.
pub fn normalize_formula(ast: &FormulaAst) -> String {
    let mut out = String::new();
    for (sym, count) in ast.items() {
        out.push_str(sym);
        if count != 1 {
            out.push_str(&count.to_string());
        }
    }
    out
}

/// Parse-then-normalize convenience; `None` when the surface is no formula.
pub fn normalized_form(surface: &str) -> Option<String> {
    parse_formula(surface).map(|ast| normalize_formula(&ast))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_table_has_118_symbols() {
        assert_eq!(element_set().len(), 118);
        assert!(is_element_symbol("Fe"));
        assert!(is_element_symbol("Og"));
        assert!(!is_element_symbol("Xq"));
        assert!(!is_element_symbol("FE"));
    }

    #[test]
    fn parses_grouped_formula() {
        let ast = parse_formula("Ce(NO3)3").unwrap();
        assert_eq!(ast.count_of("Ce"), 1);
        assert_eq!(ast.count_of("N"), 3);
        assert_eq!(ast.count_of("O"), 9);
        assert_eq!(normalize_formula(&ast), "CeN3O9");
    }

    #[test]
    fn parses_single_element() {
        let ast = parse_formula("Fe").unwrap();
        assert_eq!(ast.count_of("Fe"), 1);
        assert_eq!(ast.distinct_elements(), 1);
    }

    #[test]
    fn rejects_unknown_symbol() {
        assert!(parse_formula("Xq2").is_none());
    }

    #[test]
    fn rejects_dangling_parenthesis() {
        assert!(parse_formula("Ce(NO3").is_none());
        assert!(parse_formula("CeNO3)").is_none());
        assert!(parse_formula("()").is_none());
    }

    #[test]
    fn normalizes_table_examples() {
        assert_eq!(normalized_form("BiVO4").unwrap(), "BiO4V");
        assert_eq!(normalized_form("Na2MoO4").unwrap(), "MoNa2O4");
        assert_eq!(normalized_form("Ce(NO3)3").unwrap(), "CeN3O9");
        assert_eq!(normalized_form("H2O").unwrap(), "H2O");
    }

    #[test]
    fn unicode_subscripts_map_to_ascii() {
        assert_eq!(normalized_form("CeN\u{2083}O\u{2089}").unwrap(), "CeN3O9");
    }

    #[test]
    fn charge_suffix_is_stripped() {
        assert_eq!(normalized_form("CrO4^2-").unwrap(), "CrO4");
        assert_eq!(normalized_form("Na+").unwrap(), "Na");
    }

    #[test]
    fn duplicate_elements_merge() {
        assert_eq!(normalized_form("CH3CH2OH").unwrap(), "C2H6O");
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(parse_formula("H0").is_none());
    }

    #[test]
    fn normalization_idempotent_on_own_output() {
        for surface in ["BiVO4", "Na2MoO4", "Ce(NO3)3", "Fe2(SO4)3"] {
            let once = normalized_form(surface).unwrap();
            assert_eq!(normalized_form(&once).unwrap(), once);
        }
    }

    #[test]
    fn normalization_preserves_element_multiset() {
        let ast = parse_formula("Fe2(SO4)3").unwrap();
        let reparsed = parse_formula(&normalize_formula(&ast)).unwrap();
        assert_eq!(ast, reparsed);
    }
}
