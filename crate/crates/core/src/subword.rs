//! WordPiece-style subword vocabulary: frequency-greedy pair-merge training,
//! greedy longest-match-first encoding with special tokens, and decoding.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

/// Special token ids, reserved and fixed.
pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;

pub const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Continuation prefix for non-initial pieces.
pub const CONTINUATION: &str = "##";

/// Vocabulary size of the canonical uncased base tokenizer, kept as a
/// named reference constant.
pub const BERT_BASE_VOCAB_SIZE: usize = 30_000;

/// Words longer than this encode as a single UNK.
pub const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("target size {target} below minimum {minimum} (alphabet + specials)")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("max_len {0} too small, need at least 3 for CLS/SEP plus content")]
    MaxLenTooSmall(usize),
    #[error("token id {id} out of range for vocabulary of {size}")]
    IdOutOfRange { id: u32, size: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct WordPieceVocab {
    entries: Vec<String>,
    piece_to_id: HashMap<String, u32>,
    pub target_size: usize,
}

impl WordPieceVocab {
    fn from_entries(entries: Vec<String>, target_size: usize) -> Self {
        let piece_to_id = entries
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        Self {
            entries,
            piece_to_id,
            target_size,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, piece: &str) -> Option<u32> {
        self.piece_to_id.get(piece).copied()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.piece_to_id.contains_key(piece)
    }

    /// One piece per line, line number = id, specials first.
    pub fn save(&self, path: &Path) -> Result<(), SubwordError> {
        let mut file = File::create(path).map_err(|source| SubwordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        for piece in &self.entries {
            writeln!(file, "{piece}").map_err(|source| SubwordError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SubwordError> {
        let file = File::open(path).map_err(|source| SubwordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|source| SubwordError::Io {
                path: path.display().to_string(),
                source,
            })?;
            entries.push(line);
        }
        while entries.last().is_some_and(|l| l.is_empty()) {
            entries.pop();
        }
        for (i, special) in SPECIALS.iter().enumerate() {
            if entries.get(i).map(String::as_str) != Some(*special) {
                return Err(SubwordError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: format!("expected special token {special}"),
                });
            }
        }
        let size = entries.len();
        Ok(Self::from_entries(entries, size))
    }
}

/// Encoded sequence: ids with segment markers and attention mask, equal
/// lengths, CLS first, SEP closing the segment, PAD only at the tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
}

impl EncodedSequence {
    /// Number of attended (non-padding) positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Train a subword vocabulary by iterative pair merging: start from the
/// corpus characters, repeatedly merge the adjacent pair with maximal corpus
/// frequency (ties by lexicographic pair order) until `target_size` pieces
/// exist or no pair occurs at least twice.
pub fn train_wordpiece<S: AsRef<str>>(
    corpus_words: &[S],
    target_size: usize,
) -> Result<WordPieceVocab, SubwordError> {
    // word frequency table; words over the length cap train nothing
    let mut word_freq: HashMap<&str, u64> = HashMap::new();
    for w in corpus_words {
        let w = w.as_ref();
        if !w.is_empty() && w.chars().count() <= MAX_WORD_CHARS {
            *word_freq.entry(w).or_insert(0) += 1;
        }
    }
    if word_freq.is_empty() {
        return Err(SubwordError::EmptyCorpus);
    }

    // initial alphabet: every character as an initial and continuation piece
    let mut alphabet: Vec<String> = Vec::new();
    {
        let mut seen = std::collections::BTreeSet::new();
        for w in word_freq.keys() {
            for ch in w.chars() {
                seen.insert(ch);
            }
        }
        for ch in seen {
            alphabet.push(ch.to_string());
            alphabet.push(format!("{CONTINUATION}{ch}"));
        }
    }
    let minimum = SPECIALS.len() + alphabet.len();
    if target_size < minimum {
        return Err(SubwordError::TargetTooSmall {
            target: target_size,
            minimum,
        });
    }

    let mut entries: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    entries.extend(alphabet);

    // deterministic word order for stable tie behavior in pair counting
    let mut words: Vec<(&str, u64)> = word_freq.into_iter().collect();
    words.sort_by(|a, b| a.0.cmp(b.0));
    let mut segmented: Vec<(Vec<String>, u64)> = words
        .into_iter()
        .map(|(w, f)| {
            let pieces: Vec<String> = w
                .chars()
                .enumerate()
                .map(|(i, ch)| {
                    if i == 0 {
                        ch.to_string()
                    } else {
                        format!("{CONTINUATION}{ch}")
                    }
                })
                .collect();
            (pieces, f)
        })
        .collect();

    while entries.len() < target_size {
        let mut pair_freq: HashMap<(String, String), u64> = HashMap::new();
        for (pieces, f) in &segmented {
            for window in pieces.windows(2) {
                *pair_freq
                    .entry((window[0].clone(), window[1].clone()))
                    .or_insert(0) += f;
            }
        }
        let best = pair_freq
            .into_iter()
            .filter(|(_, f)| *f >= 2)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let merged = merge_pieces(&left, &right);
        entries.push(merged.clone());
        for (pieces, _) in &mut segmented {
            let mut i = 0;
            while i + 1 < pieces.len() {
                if pieces[i] == left && pieces[i + 1] == right {
                    pieces[i] = merged.clone();
                    pieces.remove(i + 1);
                } else {
                    i += 1;
                }
            }
        }
    }
    Ok(WordPieceVocab::from_entries(entries, target_size))
}

/// Concatenate two pieces; the right side sheds its continuation prefix and
/// the left side decides whether the result is initial or continuation.
fn merge_pieces(left: &str, right: &str) -> String {
    let right_body = right.strip_prefix(CONTINUATION).unwrap_or(right);
    format!("{left}{right_body}")
}

/// Greedy longest-match-first piece split of one word; `None` when some
/// remainder has no matching piece (the caller emits UNK for the whole word).
fn split_word(vocab: &WordPieceVocab, word: &str) -> Option<Vec<u32>> {
    if word.chars().count() > MAX_WORD_CHARS {
        return None;
    }
    let chars: Vec<char> = word.chars().collect();
    let mut ids = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut matched = None;
        for end in (start + 1..=chars.len()).rev() {
            let body: String = chars[start..end].iter().collect();
            let candidate = if start == 0 {
                body
            } else {
                format!("{CONTINUATION}{body}")
            };
            if let Some(id) = vocab.id_of(&candidate) {
                matched = Some((id, end));
                break;
            }
        }
        let (id, end) = matched?;
        ids.push(id);
        start = end;
    }
    Some(ids)
}

/// Encode word tokens into ids: CLS + pieces + SEP, truncated to `max_len`
/// preserving CLS/SEP, padded with PAD. Literal special-token surfaces (the
/// "[MASK]" placeholder in query templates) map to their reserved ids.
pub fn encode<S: AsRef<str>>(
    vocab: &WordPieceVocab,
    word_tokens: &[S],
    max_len: usize,
) -> Result<EncodedSequence, SubwordError> {
    if max_len < 3 {
        return Err(SubwordError::MaxLenTooSmall(max_len));
    }
    let mut ids = vec![CLS];
    for word in word_tokens {
        let word = word.as_ref();
        if let Some(pos) = SPECIALS.iter().position(|s| *s == word) {
            ids.push(pos as u32);
            continue;
        }
        match split_word(vocab, word) {
            Some(piece_ids) => ids.extend(piece_ids),
            None => ids.push(UNK),
        }
    }
    ids.truncate(max_len - 1);
    ids.push(SEP);
    let attended = ids.len();
    ids.resize(max_len, PAD);
    let mut attention_mask = vec![0u8; max_len];
    attention_mask[..attended].fill(1);
    Ok(EncodedSequence {
        type_ids: vec![0; max_len],
        attention_mask,
        ids,
    })
}

/// Decode ids back to text: PAD/CLS/SEP dropped, continuation pieces
/// concatenated to their predecessor, other pieces space-joined. UNK and MASK
/// render as their literal bracketed forms.
pub fn decode(vocab: &WordPieceVocab, ids: &[u32]) -> Result<String, SubwordError> {
    let mut words: Vec<String> = Vec::new();
    for &id in ids {
        let piece = vocab.piece(id).ok_or(SubwordError::IdOutOfRange {
            id,
            size: vocab.len(),
        })?;
        match id {
            PAD | CLS | SEP => continue,
            _ => {}
        }
        if let Some(body) = piece.strip_prefix(CONTINUATION) {
            match words.last_mut() {
                Some(last) => last.push_str(body),
                None => words.push(body.to_string()),
            }
        } else {
            words.push(piece.to_string());
        }
    }
    Ok(words.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(text: &str) -> Vec<String> {
        text.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn merge_loop_builds_repeated_pair() {
        // corpus "aa aa aa": alphabet {a, ##a} + 5 specials = 7, target 11
        let vocab = train_wordpiece(&words("aa aa aa"), 11).unwrap();
        assert!(vocab.contains("aa"), "expected merged piece aa");
    }

    #[test]
    fn empty_corpus_is_error() {
        let empty: Vec<String> = vec![];
        assert!(matches!(
            train_wordpiece(&empty, 100),
            Err(SubwordError::EmptyCorpus)
        ));
    }

    #[test]
    fn target_below_alphabet_is_error() {
        assert!(matches!(
            train_wordpiece(&words("abc"), 6),
            Err(SubwordError::TargetTooSmall { .. })
        ));
    }

    #[test]
    fn whole_word_piece_encodes_to_single_id() {
        let corpus = words("coating coating coating coating");
        let vocab = train_wordpiece(&corpus, 64).unwrap();
        assert!(vocab.contains("coating"));
        let enc = encode(&vocab, &words("coating"), 16).unwrap();
        assert_eq!(enc.ids[0], CLS);
        assert_eq!(vocab.piece(enc.ids[1]).unwrap(), "coating");
        assert_eq!(enc.ids[2], SEP);
    }

    #[test]
    fn greedy_split_uses_longest_pieces() {
        // vocab with pieces "corro" and "##sion" but not "corrosion"
        let entries: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(["corro", "##sion"].iter().map(|s| s.to_string()))
            .collect();
        let vocab = WordPieceVocab::from_entries(entries, 7);
        let enc = encode(&vocab, &words("corrosion"), 8).unwrap();
        let pieces: Vec<&str> = enc.ids[1..enc.real_len() - 1]
            .iter()
            .map(|&id| vocab.piece(id).unwrap())
            .collect();
        assert_eq!(pieces, vec!["corro", "##sion"]);
        assert_eq!(decode(&vocab, &enc.ids).unwrap(), "corrosion");
    }

    #[test]
    fn unmatched_word_becomes_unk() {
        let vocab = train_wordpiece(&words("abc abc"), 16).unwrap();
        let enc = encode(&vocab, &words("xyz"), 8).unwrap();
        assert_eq!(enc.ids[1], UNK);
        assert_eq!(decode(&vocab, &[UNK]).unwrap(), "[UNK]");
    }

    #[test]
    fn max_len_under_three_is_error() {
        let vocab = train_wordpiece(&words("ab"), 16).unwrap();
        assert!(matches!(
            encode(&vocab, &words("ab"), 2),
            Err(SubwordError::MaxLenTooSmall(2))
        ));
    }

    #[test]
    fn truncation_preserves_cls_and_sep() {
        let vocab = train_wordpiece(&words("ab cd ef gh ij"), 40).unwrap();
        let enc = encode(&vocab, &words("ab cd ef gh ij ab cd"), 5).unwrap();
        assert_eq!(enc.ids.len(), 5);
        assert_eq!(enc.ids[0], CLS);
        assert_eq!(enc.ids[4], SEP);
        assert!(enc.attention_mask.iter().all(|&m| m == 1));
    }

    #[test]
    fn padding_has_zero_attention() {
        let vocab = train_wordpiece(&words("ab ab"), 16).unwrap();
        let enc = encode(&vocab, &words("ab"), 8).unwrap();
        assert_eq!(enc.real_len(), 3);
        assert!(enc.ids[3..].iter().all(|&id| id == PAD));
        assert!(enc.attention_mask[3..].iter().all(|&m| m == 0));
    }

    #[test]
    fn mask_surface_maps_to_mask_id() {
        let vocab = train_wordpiece(&words("zinc zinc"), 16).unwrap();
        let enc = encode(&vocab, &words("zinc [MASK]"), 8).unwrap();
        assert!(enc.ids.contains(&MASK));
    }

    #[test]
    fn out_of_range_id_is_error() {
        let vocab = train_wordpiece(&words("ab ab"), 16).unwrap();
        assert!(matches!(
            decode(&vocab, &[9999]),
            Err(SubwordError::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("v1.vocab");
        let p2 = dir.path().join("v2.vocab");
        let corpus = words("zinc coating zinc coating corrosion corrosion zinc");
        let vocab = train_wordpiece(&corpus, 64).unwrap();
        vocab.save(&p1).unwrap();
        let loaded = WordPieceVocab::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = words("zinc coating zinc coating corrosion protection zinc");
        let a = train_wordpiece(&corpus, 80).unwrap();
        let b = train_wordpiece(&corpus, 80).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    proptest! {
        #[test]
        fn round_trip_without_unk(sentence in proptest::collection::vec("[a-e]{1,6}", 1..8)) {
            // train on the sentence itself plus repetition so merges exist
            let mut corpus: Vec<String> = Vec::new();
            for _ in 0..3 {
                corpus.extend(sentence.iter().cloned());
            }
            let vocab = train_wordpiece(&corpus, 200).unwrap();
            let enc = encode(&vocab, &sentence, 256).unwrap();
            prop_assert!(!enc.ids[..enc.real_len()].contains(&UNK));
            prop_assert_eq!(decode(&vocab, &enc.ids).unwrap(), sentence.join(" "));
        }

        #[test]
        fn encode_never_fails_and_covers_every_word(sentence in proptest::collection::vec("[a-z]{1,8}", 1..6)) {
            let vocab = train_wordpiece(&["abc".to_string()], 64).unwrap();
            let enc = encode(&vocab, &sentence, 128).unwrap();
            // CLS + at least one id per word + SEP
            prop_assert!(enc.real_len() >= sentence.len() + 2);
        }
    }
}
