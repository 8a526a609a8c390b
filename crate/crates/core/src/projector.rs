//! Tag projection from the pivot verse onto source-language words.
//!
//! Each source subword takes the tag of the pivot word its Viterbi link
//! points to; the word's tag is the majority over its subwords, ties going
//! to the earliest subword among the tied tags. Punctuation-only tokens on
//! either side stay out of alignment: source punctuation is tagged PUNCT
//! directly and pivot PUNCT tokens are never link targets.

use std::ops::Range;

use thiserror::Error;

use crate::aligner::{viterbi_align, AlignmentModel, SentencePair};
use crate::corpus::{PosTag, RawCorpus, RawVerse, TaggedCorpus, TaggedToken, TaggedVerse, VerseId};
use crate::subword::{BpeModel, SubwordError, SubwordToken, MARKER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectError {
    #[error("verse has no source subwords")]
    EmptyVerse,
    #[error(transparent)]
    Subword(#[from] SubwordError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    #[default]
    MajorityThenFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionConfig {
    pub unaligned_tag: PosTag,
    pub aggregation: Aggregation,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { unaligned_tag: PosTag::X, aggregation: Aggregation::MajorityThenFirst }
    }
}

/// A token with no alphanumeric character.
pub fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

struct SourceWord {
    text: String,
    pieces: Range<usize>,
}

fn group_words(subwords: &[SubwordToken]) -> Result<Vec<SourceWord>, SubwordError> {
    let mut words: Vec<SourceWord> = Vec::new();
    let mut current: Option<usize> = None;
    for (k, t) in subwords.iter().enumerate() {
        match current {
            Some(c) if t.word_index < c => {
                return Err(SubwordError::NonMonotonicWordIndex { position: k })
            }
            Some(c) if t.word_index == c => {
                let w = words.last_mut().unwrap();
                w.text.push_str(&t.piece);
                w.pieces.end = k + 1;
            }
            _ => {
                words.push(SourceWord { text: t.piece.clone(), pieces: k..k + 1 });
                current = Some(t.word_index);
            }
        }
    }
    for w in &mut words {
        if let Some(rest) = w.text.strip_prefix(MARKER) {
            w.text = rest.to_string();
        }
    }
    Ok(words)
}

/// The part of a verse pair that takes part in alignment.
pub struct AlignmentView {
    /// `None` when either side has nothing alignable.
    pub pair: Option<SentencePair>,
    /// Subword index of each source position.
    pub source_pieces: Vec<usize>,
    /// Pivot entry index of each non-NULL target position.
    pub target_entries: Vec<usize>,
}

fn alignment_view_of(words: &[SourceWord], subwords: &[SubwordToken], pivot: &TaggedVerse) -> AlignmentView {
    let source_pieces: Vec<usize> = words
        .iter()
        .filter(|w| !is_punctuation(&w.text))
        .flat_map(|w| w.pieces.clone())
        .collect();
    let target_entries: Vec<usize> = pivot
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.tag != PosTag::Punct && !is_punctuation(&e.form))
        .map(|(k, _)| k)
        .collect();
    let pair = SentencePair::new(
        source_pieces.iter().map(|&k| subwords[k].piece.as_str()),
        target_entries.iter().map(|&k| pivot.entries()[k].form.as_str()),
    )
    .ok();
    AlignmentView { pair, source_pieces, target_entries }
}

pub fn alignment_view(subwords: &[SubwordToken], pivot: &TaggedVerse) -> Result<AlignmentView, ProjectError> {
    let words = group_words(subwords)?;
    Ok(alignment_view_of(&words, subwords, pivot))
}

/// The sentence pair used to train the aligner for one verse, if any.
pub fn training_pair(bpe: &BpeModel, source: &RawVerse, pivot: &TaggedVerse) -> Option<SentencePair> {
    let subwords = bpe.encode(source);
    alignment_view(&subwords, pivot).ok()?.pair
}

fn majority_then_first(tags: &[PosTag]) -> Option<PosTag> {
    let mut counts = [0usize; PosTag::ALL.len()];
    for &t in tags {
        counts[t as usize] += 1;
    }
    let best = *counts.iter().max()?;
    tags.iter().copied().find(|&t| counts[t as usize] == best)
}

pub fn project_verse(
    model: &AlignmentModel,
    subwords: &[SubwordToken],
    pivot: &TaggedVerse,
    cfg: &ProjectionConfig,
) -> Result<TaggedVerse, ProjectError> {
    if subwords.is_empty() {
        return Err(ProjectError::EmptyVerse);
    }
    let words = group_words(subwords)?;
    let view = alignment_view_of(&words, subwords, pivot);

    let mut piece_tags = vec![cfg.unaligned_tag; subwords.len()];
    if let Some(pair) = &view.pair {
        let alignment = viterbi_align(model, pair);
        for (pos, &link) in alignment.links.iter().enumerate() {
            if link > 0 {
                let entry = &pivot.entries()[view.target_entries[link - 1]];
                piece_tags[view.source_pieces[pos]] = entry.tag;
            }
        }
    }

    let entries = words
        .into_iter()
        .map(|w| {
            let tag = if is_punctuation(&w.text) {
                PosTag::Punct
            } else {
                match cfg.aggregation {
                    Aggregation::MajorityThenFirst => {
                        majority_then_first(&piece_tags[w.pieces.clone()]).unwrap_or(cfg.unaligned_tag)
                    }
                }
            };
            TaggedToken::new(w.text, tag)
        })
        .collect();
    // Words decoded from non-empty pieces are non-empty and whitespace-free
    // whenever the subwords came from `encode`.
    TaggedVerse::new(pivot.id.clone(), entries).map_err(|_| ProjectError::EmptyVerse)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkipReason {
    MissingSource,
    MissingPivot,
    MissingBoth,
    Failed(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProjectionReport {
    pub requested: usize,
    pub projected: usize,
    pub skipped: Vec<(VerseId, SkipReason)>,
}

pub fn project_corpus(
    model: &AlignmentModel,
    source: &RawCorpus,
    bpe: &BpeModel,
    pivot: &TaggedCorpus,
    ids: &[VerseId],
    cfg: &ProjectionConfig,
) -> (TaggedCorpus, ProjectionReport) {
    let mut out = TaggedCorpus::new();
    if let Some(lang) = source.language() {
        out = out.with_language(lang.clone());
    }
    let mut report = ProjectionReport { requested: ids.len(), ..Default::default() };
    for id in ids {
        let (src, piv) = match (source.get(id), pivot.get(id)) {
            (Some(s), Some(p)) => (s, p),
            (None, Some(_)) => {
                report.skipped.push((id.clone(), SkipReason::MissingSource));
                continue;
            }
            (Some(_), None) => {
                report.skipped.push((id.clone(), SkipReason::MissingPivot));
                continue;
            }
            (None, None) => {
                report.skipped.push((id.clone(), SkipReason::MissingBoth));
                continue;
            }
        };
        let subwords = bpe.encode(src);
        match project_verse(model, &subwords, piv, cfg) {
            Ok(tagged) => match out.insert(tagged) {
                Ok(()) => report.projected += 1,
                Err(e) => report.skipped.push((id.clone(), SkipReason::Failed(e.to_string()))),
            },
            Err(e) => report.skipped.push((id.clone(), SkipReason::Failed(e.to_string()))),
        }
    }
    (out, report)
}
