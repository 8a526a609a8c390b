//! Per-language byte-pair-encoding subword tokenizer.
//!
//! Symbols are Unicode characters of NFC text; nothing is case folded. Each
//! word starts with the boundary marker `▁` fused to its first character, so
//! `dog` begins as `▁d o g`. Training repeatedly merges the most frequent
//! adjacent symbol pair (ties go to the lexicographically smallest pair) and
//! encoding replays the merges in training order, which makes every encoding
//! a function of the merge list alone.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{RawCorpus, RawVerse};

pub const MARKER: char = '\u{2581}';
pub const DEFAULT_VOCAB_SIZE: usize = 4000;
const HEADER: &str = "BPE v1 marker=\u{2581}";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubwordError {
    #[error("cannot train a tokenizer on an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary size {vocab_size} must exceed the initial alphabet of {alphabet} symbols")]
    VocabTooSmall { vocab_size: usize, alphabet: usize },
    #[error("subword word indices are not monotonic at position {position}")]
    NonMonotonicWordIndex { position: usize },
    #[error("tokenizer model line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordToken {
    pub piece: String,
    pub word_index: usize,
}

#[derive(Clone, Debug)]
pub struct BpeModel {
    alphabet: BTreeSet<String>,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges && self.alphabet == other.alphabet
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let mut chars = word.chars();
    let mut out = Vec::with_capacity(word.len());
    if let Some(first) = chars.next() {
        let mut s = String::with_capacity(first.len_utf8() + MARKER.len_utf8());
        s.push(MARKER);
        s.push(first);
        out.push(s);
    }
    out.extend(chars.map(String::from));
    out
}

/// Merges every left-to-right, non-overlapping occurrence of `(left, right)`.
fn merge_pair<T: PartialEq + Clone>(symbols: &[T], left: &T, right: &T, merged: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut k = 0;
    while k < symbols.len() {
        if k + 1 < symbols.len() && &symbols[k] == left && &symbols[k + 1] == right {
            out.push(merged.clone());
            k += 2;
        } else {
            out.push(symbols[k].clone());
            k += 1;
        }
    }
    out
}

struct Interner {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn new() -> Self {
        Interner { strings: Vec::new(), ids: HashMap::new() }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }
}

type Pair = (u32, u32);

struct PairState {
    counts: HashMap<Pair, i64>,
    words_with: HashMap<Pair, BTreeSet<usize>>,
    dirty: BTreeSet<Pair>,
}

impl PairState {
    fn add_word(&mut self, idx: usize, symbols: &[u32], weight: i64) {
        for w in symbols.windows(2) {
            let p = (w[0], w[1]);
            *self.counts.entry(p).or_default() += weight;
            if weight > 0 {
                self.words_with.entry(p).or_default().insert(idx);
            }
            self.dirty.insert(p);
        }
    }
}

/// Trains a BPE model over every token of `corpus`.
pub fn train_bpe(corpus: &RawCorpus, vocab_size: usize) -> Result<BpeModel, SubwordError> {
    let mut word_counts: BTreeMap<&str, i64> = BTreeMap::new();
    for v in corpus.verses() {
        for t in v.tokens() {
            *word_counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(SubwordError::EmptyCorpus);
    }

    let mut interner = Interner::new();
    let mut words: Vec<(Vec<u32>, i64)> = Vec::with_capacity(word_counts.len());
    for (w, &count) in &word_counts {
        let syms = initial_symbols(w).iter().map(|s| interner.intern(s)).collect();
        words.push((syms, count));
    }
    let alphabet: BTreeSet<String> = interner.strings.iter().cloned().collect();
    if vocab_size <= alphabet.len() {
        return Err(SubwordError::VocabTooSmall { vocab_size, alphabet: alphabet.len() });
    }
    let mut vocab: HashSet<String> = alphabet.iter().cloned().collect();

    let mut state = PairState {
        counts: HashMap::new(),
        words_with: HashMap::new(),
        dirty: BTreeSet::new(),
    };
    for (idx, (syms, count)) in words.iter().enumerate() {
        state.add_word(idx, syms, *count);
    }

    // Max-heap on (count, smallest pair); entries go stale when counts move.
    let mut heap: BinaryHeap<(i64, Reverse<(String, String)>, Pair)> = BinaryHeap::new();
    let mut merged_pairs: HashSet<Pair> = HashSet::new();
    let mut merges: Vec<(String, String)> = Vec::new();

    let push_dirty = |state: &mut PairState,
                      heap: &mut BinaryHeap<(i64, Reverse<(String, String)>, Pair)>,
                      interner: &Interner| {
        for p in std::mem::take(&mut state.dirty) {
            let c = state.counts.get(&p).copied().unwrap_or(0);
            if c > 0 {
                let key = (
                    interner.strings[p.0 as usize].clone(),
                    interner.strings[p.1 as usize].clone(),
                );
                heap.push((c, Reverse(key), p));
            }
        }
    };
    push_dirty(&mut state, &mut heap, &interner);

    while vocab.len() < vocab_size {
        let Some((count, Reverse((left, right)), pair)) = heap.pop() else {
            break;
        };
        if state.counts.get(&pair).copied().unwrap_or(0) != count || merged_pairs.contains(&pair) {
            continue;
        }
        if count < 2 {
            break;
        }
        merged_pairs.insert(pair);
        let new_symbol = format!("{left}{right}");
        let new_id = interner.intern(&new_symbol);
        vocab.insert(new_symbol);
        merges.push((left, right));

        let affected: Vec<usize> = state
            .words_with
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        for idx in affected {
            let (old, weight) = &words[idx];
            let updated = merge_pair(old, &pair.0, &pair.1, &new_id);
            if updated.len() == old.len() {
                continue;
            }
            let weight = *weight;
            state.add_word(idx, old, -weight);
            state.add_word(idx, &updated, weight);
            words[idx].0 = updated;
        }
        push_dirty(&mut state, &mut heap, &interner);
    }

    Ok(BpeModel::from_parts(alphabet, merges))
}

impl BpeModel {
    fn from_parts(alphabet: BTreeSet<String>, merges: Vec<(String, String)>) -> Self {
        let ranks = merges.iter().cloned().enumerate().map(|(r, p)| (p, r)).collect();
        BpeModel { alphabet, merges, ranks }
    }

    /// Builds a model from an ordered merge list. The alphabet is taken to be
    /// the merge operands that no earlier merge produces.
    pub fn from_merges(merges: Vec<(String, String)>) -> Self {
        let mut produced = HashSet::new();
        let mut alphabet = BTreeSet::new();
        for (l, r) in &merges {
            for side in [l, r] {
                if !produced.contains(side) {
                    alphabet.insert(side.clone());
                }
            }
            produced.insert(format!("{l}{r}"));
        }
        Self::from_parts(alphabet, merges)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Initial symbols: characters, with word-initial ones carrying the marker.
    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    /// Alphabet plus distinct merge outputs.
    pub fn vocab_size(&self) -> usize {
        let mut vocab: HashSet<String> = self.alphabet.iter().cloned().collect();
        vocab.extend(self.merges.iter().map(|(l, r)| format!("{l}{r}")));
        vocab.len()
    }

    pub fn encode_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        let mut last: Option<usize> = None;
        loop {
            let next = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .filter(|&r| last.map_or(true, |l| r > l))
                .min();
            let Some(rank) = next else { break };
            let (l, r) = &self.merges[rank];
            symbols = merge_pair(&symbols, l, r, &format!("{l}{r}"));
            last = Some(rank);
        }
        symbols
    }

    pub fn encode_words<S: AsRef<str>>(&self, words: &[S]) -> Vec<SubwordToken> {
        words
            .iter()
            .enumerate()
            .flat_map(|(word_index, w)| {
                self.encode_word(w.as_ref())
                    .into_iter()
                    .map(move |piece| SubwordToken { piece, word_index })
            })
            .collect()
    }

    pub fn encode(&self, verse: &RawVerse) -> Vec<SubwordToken> {
        self.encode_words(verse.tokens())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l}\t{r}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SubwordError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == HEADER => {}
            _ => {
                return Err(SubwordError::ModelFormat {
                    line: 1,
                    reason: format!("expected header {HEADER:?}"),
                })
            }
        }
        let mut merges = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in lines {
            let line = line.trim_end_matches('\r');
            let bad = |reason: &str| SubwordError::ModelFormat { line: idx + 1, reason: reason.into() };
            let (l, r) = line.split_once('\t').ok_or_else(|| bad("expected left<TAB>right"))?;
            if l.is_empty() || r.is_empty() || r.contains('\t') {
                return Err(bad("expected two non-empty symbols"));
            }
            if !seen.insert((l.to_string(), r.to_string())) {
                return Err(bad("duplicate merge"));
            }
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(Self::from_merges(merges))
    }
}

/// Reassembles words from subword pieces, stripping one leading marker per word.
pub fn decode(tokens: &[SubwordToken]) -> Result<Vec<String>, SubwordError> {
    let mut words: Vec<String> = Vec::new();
    let mut current: Option<usize> = None;
    for (position, t) in tokens.iter().enumerate() {
        match current {
            Some(c) if t.word_index < c => {
                return Err(SubwordError::NonMonotonicWordIndex { position })
            }
            Some(c) if t.word_index == c => words.last_mut().unwrap().push_str(&t.piece),
            _ => {
                words.push(t.piece.clone());
                current = Some(t.word_index);
            }
        }
    }
    for w in &mut words {
        if let Some(rest) = w.strip_prefix(MARKER) {
            *w = rest.to_string();
        }
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_verse_file;

    fn corpus(lines: &[&str]) -> RawCorpus {
        let text: String = lines
            .iter()
            .enumerate()
            .map(|(k, l)| format!("{:08}\t{l}\n", 40001001 + k))
            .collect();
        parse_verse_file(&text).unwrap()
    }

    fn pieces(tokens: &[SubwordToken]) -> Vec<&str> {
        tokens.iter().map(|t| t.piece.as_str()).collect()
    }

    #[test]
    fn first_merge_on_repeated_word() {
        let c = corpus(&["aa aa aa"]);
        // alphabet {▁a, a}
        let m = train_bpe(&c, 3).unwrap();
        assert_eq!(m.merges(), [("▁a".to_string(), "a".to_string())]);
        assert_eq!(m.vocab_size(), 3);
    }

    #[test]
    fn no_merges_when_every_pair_is_unique() {
        let c = corpus(&["ab cd"]);
        let m = train_bpe(&c, 100).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn ties_break_to_smallest_pair() {
        // ("x","y") and ("a","b") both occur twice.
        let c = corpus(&["qxy qxy qab qab"]);
        let m = train_bpe(&c, 6).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn empty_corpus_and_small_vocab_rejected() {
        assert_eq!(train_bpe(&RawCorpus::new(), 10).unwrap_err(), SubwordError::EmptyCorpus);
        let c = corpus(&["ab"]);
        assert_eq!(
            train_bpe(&c, 2).unwrap_err(),
            SubwordError::VocabTooSmall { vocab_size: 2, alphabet: 2 }
        );
    }

    #[test]
    fn marker_is_fused_to_first_character() {
        let m = BpeModel::from_merges(vec![]);
        assert_eq!(pieces(&m.encode_words(&["ab"])), ["▁a", "b"]);
        assert_eq!(pieces(&m.encode_words(&["dog"])), ["▁d", "o", "g"]);
    }

    #[test]
    fn full_word_merge_gives_single_piece() {
        let c = corpus(&["dog dog dog cat"]);
        let m = train_bpe(&c, 100).unwrap();
        let t = m.encode_words(&["dog"]);
        assert_eq!(pieces(&t), ["▁dog"]);
        assert_eq!(t[0].word_index, 0);
    }

    #[test]
    fn unknown_characters_pass_through() {
        let m = train_bpe(&corpus(&["ab ab"]), 10).unwrap();
        assert_eq!(pieces(&m.encode_words(&["abzé"])), ["▁ab", "z", "é"]);
    }

    #[test]
    fn no_lowercasing() {
        let m = train_bpe(&corpus(&["Ab ab Ab ab"]), 10).unwrap();
        assert_ne!(pieces(&m.encode_words(&["Ab"])), pieces(&m.encode_words(&["ab"])));
    }

    #[test]
    fn decode_examples() {
        assert!(decode(&[]).unwrap().is_empty());
        let m = train_bpe(&corpus(&["io le ngi io"]), 20).unwrap();
        let words = ["io", "le", "ngi"];
        assert_eq!(decode(&m.encode_words(&words)).unwrap(), words);
        let bad: Vec<SubwordToken> = [0, 2, 1]
            .iter()
            .map(|&i| SubwordToken { piece: "▁x".into(), word_index: i })
            .collect();
        assert_eq!(decode(&bad).unwrap_err(), SubwordError::NonMonotonicWordIndex { position: 2 });
    }

    #[test]
    fn marker_inside_tokens_round_trips() {
        let words = ["▁x", "a▁", "▁", "x▁a"];
        let m = train_bpe(&corpus(&["▁x a▁ ▁ x▁a ▁x x▁a"]), 50).unwrap();
        assert_eq!(decode(&m.encode_words(&words)).unwrap(), words);
    }

    #[test]
    fn encoding_replays_training_segmentation() {
        let c = corpus(&["lower lowest newer newest low low wider"]);
        let m = train_bpe(&c, 30).unwrap();
        // Retraining and encoding the training words must agree with a naive
        // sequential replay of the merge list.
        for w in ["lower", "lowest", "newer", "wider", "slow"] {
            let mut syms = initial_symbols(w);
            for (l, r) in m.merges() {
                syms = merge_pair(&syms, l, r, &format!("{l}{r}"));
            }
            assert_eq!(m.encode_word(w), syms, "{w}");
        }
    }

    #[test]
    fn model_file_round_trip() {
        let m = train_bpe(&corpus(&["lower lowest newer newest low low"]), 25).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("BPE v1 marker=▁\n"));
        let back = BpeModel::parse(&text).unwrap();
        assert_eq!(back.merges(), m.merges());
        assert_eq!(back.to_text(), text);
        for w in ["lower", "newest", "xyz"] {
            assert_eq!(back.encode_word(w), m.encode_word(w));
        }
    }

    #[test]
    fn model_parse_errors() {
        assert!(matches!(BpeModel::parse("nope\n"), Err(SubwordError::ModelFormat { line: 1, .. })));
        assert!(matches!(
            BpeModel::parse("BPE v1 marker=▁\na b\n"),
            Err(SubwordError::ModelFormat { line: 2, .. })
        ));
        assert!(matches!(
            BpeModel::parse("BPE v1 marker=▁\na\tb\na\tb\n"),
            Err(SubwordError::ModelFormat { line: 3, .. })
        ));
    }

    #[test]
    fn vocab_limit_respected() {
        let c = corpus(&["abcdefg abcdefg abcdefg hij hij"]);
        let m = train_bpe(&c, 12).unwrap();
        assert!(m.vocab_size() <= 12);
        let unlimited = train_bpe(&c, 1000).unwrap();
        assert!(unlimited.merges().len() > m.merges().len());
        assert_eq!(&unlimited.merges()[..m.merges().len()], m.merges());
    }
}
