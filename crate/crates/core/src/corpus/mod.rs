//! Corpus domain types and the line-oriented verse file formats.
//!
//! Two file formats share one layout: one verse per line, an 8-digit verse
//! identifier, a TAB, then a space-separated body. Blank lines and lines
//! starting with `#` are ignored.
//!
//! ```text
//! # raw verse file
//! 40001001	io le ngi
//! # tagged verse file; the last '/' in each unit separates token and tag
//! 40001001	Jesus/PROPN wept/VERB
//! ```
//!
//! All text is normalized to Unicode NFC while parsing.

mod tags;

pub use tags::{PosTag, TagSet};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use unicode_normalization::{is_nfc, UnicodeNormalization};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("malformed line {line}")]
    MalformedLine { line: usize },
    #[error("duplicate verse id {0}")]
    DuplicateVerseId(VerseId),
    #[error("invalid verse id {0:?}")]
    InvalidVerseId(String),
    #[error("unknown POS tag {0:?}")]
    UnknownTag(String),
    #[error("malformed token/tag unit {0:?}")]
    MalformedUnit(String),
    #[error("verse {0} has no tokens")]
    EmptyVerse(VerseId),
    #[error("token {0:?} is empty or contains whitespace")]
    InvalidToken(String),
    #[error("invalid ISO 639-3 code {0:?}")]
    InvalidLanguageCode(String),
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<CorpusError> },
}

impl CorpusError {
    fn at_line(self, line: usize) -> Self {
        match self {
            e @ (CorpusError::MalformedLine { .. } | CorpusError::AtLine { .. }) => e,
            e => CorpusError::AtLine { line, source: Box::new(e) },
        }
    }

    /// The error with any line-number wrapper removed.
    pub fn innermost(&self) -> &CorpusError {
        match self {
            CorpusError::AtLine { source, .. } => source.innermost(),
            e => e,
        }
    }
}

/// Returns `s` in Unicode NFC, borrowing when it already is.
pub fn nfc(s: &str) -> std::borrow::Cow<'_, str> {
    if is_nfc(s) {
        std::borrow::Cow::Borrowed(s)
    } else {
        std::borrow::Cow::Owned(s.nfc().collect())
    }
}

/// An 8-digit `BBCCCVVV` verse identifier, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VerseId(String);

impl VerseId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for VerseId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(VerseId(s.to_string()))
        } else {
            Err(CorpusError::InvalidVerseId(s.to_string()))
        }
    }
}

impl fmt::Display for VerseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A three-letter lowercase ISO 639-3 language code.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for LanguageCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 3 && s.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(s.to_string()))
        } else {
            Err(CorpusError::InvalidLanguageCode(s.to_string()))
        }
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_token(token: &str) -> Result<(), CorpusError> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        Err(CorpusError::InvalidToken(token.to_string()))
    } else {
        Ok(())
    }
}

/// A record that can live in a [`Corpus`] and be read from / written to one
/// line of a verse file.
pub trait Verse: Sized {
    fn id(&self) -> &VerseId;

    /// Builds the record from the text after the TAB. `body` is already NFC.
    fn parse_body(id: VerseId, body: &str, line: usize) -> Result<Self, CorpusError>;

    fn write_body(&self, out: &mut String);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawVerse {
    pub id: VerseId,
    tokens: Vec<String>,
}

impl RawVerse {
    pub fn new(id: VerseId, tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptyVerse(id));
        }
        for t in &tokens {
            check_token(t)?;
        }
        Ok(RawVerse { id, tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Verse for RawVerse {
    fn id(&self) -> &VerseId {
        &self.id
    }

    fn parse_body(id: VerseId, body: &str, line: usize) -> Result<Self, CorpusError> {
        let tokens: Vec<String> = body.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(CorpusError::MalformedLine { line });
        }
        Ok(RawVerse { id, tokens })
    }

    fn write_body(&self, out: &mut String) {
        out.push_str(&self.tokens.join(" "));
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedToken {
    pub form: String,
    pub tag: PosTag,
}

impl TaggedToken {
    pub fn new(form: impl Into<String>, tag: PosTag) -> Self {
        TaggedToken { form: form.into(), tag }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedVerse {
    pub id: VerseId,
    entries: Vec<TaggedToken>,
}

impl TaggedVerse {
    pub fn new(id: VerseId, entries: Vec<TaggedToken>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyVerse(id));
        }
        for e in &entries {
            check_token(&e.form)?;
        }
        Ok(TaggedVerse { id, entries })
    }

    pub fn entries(&self) -> &[TaggedToken] {
        &self.entries
    }

    pub fn tags(&self) -> impl Iterator<Item = PosTag> + '_ {
        self.entries.iter().map(|e| e.tag)
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.form.as_str())
    }
}

fn parse_unit(unit: &str) -> Result<TaggedToken, CorpusError> {
    match unit.rsplit_once('/') {
        Some((form, tag)) if !form.is_empty() && !tag.is_empty() => {
            Ok(TaggedToken::new(form, tag.parse()?))
        }
        _ => Err(CorpusError::MalformedUnit(unit.to_string())),
    }
}

impl Verse for TaggedVerse {
    fn id(&self) -> &VerseId {
        &self.id
    }

    fn parse_body(id: VerseId, body: &str, line: usize) -> Result<Self, CorpusError> {
        let entries = body
            .split_whitespace()
            .map(parse_unit)
            .collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() {
            return Err(CorpusError::MalformedLine { line });
        }
        Ok(TaggedVerse { id, entries })
    }

    fn write_body(&self, out: &mut String) {
        for (k, e) in self.entries.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            out.push_str(&e.form);
            out.push('/');
            out.push_str(e.tag.as_str());
        }
    }
}

/// A set of verses keyed and iterated by [`VerseId`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus<V> {
    language: Option<LanguageCode>,
    verses: BTreeMap<VerseId, V>,
}

pub type RawCorpus = Corpus<RawVerse>;
pub type TaggedCorpus = Corpus<TaggedVerse>;

impl<V> Default for Corpus<V> {
    fn default() -> Self {
        Corpus { language: None, verses: BTreeMap::new() }
    }
}

impl<V: Verse> Corpus<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_language(mut self, language: LanguageCode) -> Self {
        self.language = Some(language);
        self
    }

    pub fn language(&self) -> Option<&LanguageCode> {
        self.language.as_ref()
    }

    pub fn insert(&mut self, verse: V) -> Result<(), CorpusError> {
        if self.verses.contains_key(verse.id()) {
            return Err(CorpusError::DuplicateVerseId(verse.id().clone()));
        }
        self.verses.insert(verse.id().clone(), verse);
        Ok(())
    }

    pub fn get(&self, id: &VerseId) -> Option<&V> {
        self.verses.get(id)
    }

    pub fn contains(&self, id: &VerseId) -> bool {
        self.verses.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.verses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verses.is_empty()
    }

    pub fn verses(&self) -> impl Iterator<Item = &V> + '_ {
        self.verses.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &VerseId> + '_ {
        self.verses.keys()
    }

    /// Parses a verse document.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let raw_line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if raw_line.trim().is_empty() || raw_line.starts_with('#') {
                continue;
            }
            let normalized = nfc(raw_line);
            let (id, body) = normalized
                .split_once('\t')
                .ok_or(CorpusError::MalformedLine { line })?;
            let at = |e: CorpusError| e.at_line(line);
            let id: VerseId = id.trim().parse().map_err(at)?;
            corpus.insert(V::parse_body(id, body, line).map_err(at)?).map_err(at)?;
        }
        Ok(corpus)
    }

    /// Renders the corpus in the same line format [`Corpus::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, verse) in &self.verses {
            out.push_str(id.as_str());
            out.push('\t');
            verse.write_body(&mut out);
            out.push('\n');
        }
        out
    }

    pub fn from_verses(verses: impl IntoIterator<Item = V>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for v in verses {
            corpus.insert(v)?;
        }
        Ok(corpus)
    }

    /// Keeps only verses whose id satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&VerseId) -> bool) {
        self.verses.retain(|id, _| keep(id));
    }
}

pub fn parse_verse_file(text: &str) -> Result<RawCorpus, CorpusError> {
    RawCorpus::parse(text)
}

pub fn parse_tagged_file(text: &str) -> Result<TaggedCorpus, CorpusError> {
    TaggedCorpus::parse(text)
}

/// Anything that can answer verse-membership queries.
pub trait VerseSet {
    fn has_verse(&self, id: &VerseId) -> bool;
    fn verse_ids(&self) -> Vec<&VerseId>;
}

impl<V: Verse> VerseSet for Corpus<V> {
    fn has_verse(&self, id: &VerseId) -> bool {
        self.contains(id)
    }

    fn verse_ids(&self) -> Vec<&VerseId> {
        self.ids().collect()
    }
}

impl VerseSet for BTreeSet<VerseId> {
    fn has_verse(&self, id: &VerseId) -> bool {
        self.contains(id)
    }

    fn verse_ids(&self) -> Vec<&VerseId> {
        self.iter().collect()
    }
}

/// Verse ids present in every input, in `VerseId` order.
pub fn intersect_ids(sets: &[&dyn VerseSet]) -> Vec<VerseId> {
    let Some((first, rest)) = sets.split_first() else {
        return Vec::new();
    };
    let mut ids: Vec<VerseId> = first
        .verse_ids()
        .into_iter()
        .filter(|id| rest.iter().all(|s| s.has_verse(id)))
        .cloned()
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub verse_count: usize,
    pub unique_arguments: usize,
    pub unique_predicates: usize,
}

/// Default argument tags for [`summary_stats`].
pub const SUMMARY_ARG_TAGS: [PosTag; 2] = [PosTag::Noun, PosTag::Propn];
/// Default predicate tags for [`summary_stats`].
pub const SUMMARY_PRED_TAGS: [PosTag; 1] = [PosTag::Verb];

/// Counts distinct surface forms carrying an argument tag and a predicate tag.
pub fn summary_stats(corpus: &TaggedCorpus, arg_tags: TagSet, pred_tags: TagSet) -> CorpusStats {
    let mut args = BTreeSet::new();
    let mut preds = BTreeSet::new();
    for e in corpus.verses().flat_map(|v| v.entries()) {
        if arg_tags.contains(e.tag) {
            args.insert(e.form.as_str());
        }
        if pred_tags.contains(e.tag) {
            preds.insert(e.form.as_str());
        }
    }
    CorpusStats {
        verse_count: corpus.len(),
        unique_arguments: args.len(),
        unique_predicates: preds.len(),
    }
}
