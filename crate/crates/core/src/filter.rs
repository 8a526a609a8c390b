//! Two-stage under-sampling of the pivot corpus.
//!
//! Stage one keeps verses whose two lemmatized English translations share at
//! least `min_shared` lemmas. Stage two keeps, among the stage-one
//! survivors, verses containing a VERB lemma that occurs in at least
//! `min_other` other surviving verses.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::{
    Corpus, CorpusError, PosTag, TaggedCorpus, Verse, VerseId,
};

pub const DEFAULT_MIN_SHARED: usize = 4;
pub const DEFAULT_MIN_OTHER: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("verse {0} is not in the pivot corpus")]
    MissingVerse(VerseId),
    #[error("lemma map line {line} is malformed")]
    MalformedLemmaMap { line: usize },
}

/// Lemma folding: NFC then lowercase.
pub fn fold_lemma(s: &str) -> String {
    crate::corpus::nfc(s).to_lowercase()
}

/// The lemma set of one verse of a lemmatized translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaVerse {
    pub id: VerseId,
    pub lemmas: BTreeSet<String>,
}

impl Verse for LemmaVerse {
    fn id(&self) -> &VerseId {
        &self.id
    }

    fn parse_body(id: VerseId, body: &str, _line: usize) -> Result<Self, CorpusError> {
        let lemmas = body.split_whitespace().map(fold_lemma).collect();
        Ok(LemmaVerse { id, lemmas })
    }

    fn write_body(&self, out: &mut String) {
        let parts: Vec<&str> = self.lemmas.iter().map(String::as_str).collect();
        out.push_str(&parts.join(" "));
    }
}

pub type LemmaCorpus = Corpus<LemmaVerse>;

pub fn parse_lemma_file(text: &str) -> Result<LemmaCorpus, CorpusError> {
    LemmaCorpus::parse(text)
}

/// Maps pivot surface forms to lemmas. Forms without an entry are their own
/// lemma; lookups and results are case-insensitive.
#[derive(Clone, Debug, Default)]
pub struct LemmaMap {
    map: HashMap<String, String>,
}

impl LemmaMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, form: &str, lemma: &str) {
        self.map.insert(fold_lemma(form), fold_lemma(lemma));
    }

    pub fn lemma_of(&self, form: &str) -> String {
        let folded = fold_lemma(form);
        match self.map.get(&folded) {
            Some(lemma) => lemma.clone(),
            None => folded,
        }
    }

    /// Parses `form<TAB>lemma` lines; `#` comments and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, FilterError> {
        let mut m = LemmaMap::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.trim_end_matches('\r').split_once('\t') {
                Some((form, lemma)) if !form.trim().is_empty() && !lemma.trim().is_empty() => {
                    m.insert(form.trim(), lemma.trim())
                }
                _ => return Err(FilterError::MalformedLemmaMap { line: idx + 1 }),
            }
        }
        Ok(m)
    }
}

impl<K: AsRef<str>, V: AsRef<str>> FromIterator<(K, V)> for LemmaMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut m = LemmaMap::default();
        for (k, v) in iter {
            m.insert(k.as_ref(), v.as_ref());
        }
        m
    }
}

/// Ids present in both translations whose lemma sets share at least
/// `min_shared` entries.
pub fn lemma_overlap_filter(a: &LemmaCorpus, b: &LemmaCorpus, min_shared: usize) -> Vec<VerseId> {
    a.verses()
        .filter_map(|va| {
            let vb = b.get(&va.id)?;
            let shared = va.lemmas.intersection(&vb.lemmas).count();
            (shared >= min_shared).then(|| va.id.clone())
        })
        .collect()
}

/// Keeps ids whose pivot verse has a VERB lemma attested in at least
/// `min_other` other verses of `ids`. Input order is preserved.
pub fn verb_support_filter(
    pivot: &TaggedCorpus,
    ids: &[VerseId],
    lemma_of: &LemmaMap,
    min_other: usize,
) -> Result<Vec<VerseId>, FilterError> {
    let mut verb_lemmas: Vec<BTreeSet<String>> = Vec::with_capacity(ids.len());
    for id in ids {
        let verse = pivot.get(id).ok_or_else(|| FilterError::MissingVerse(id.clone()))?;
        let lemmas = verse
            .entries()
            .iter()
            .filter(|e| e.tag == PosTag::Verb)
            .map(|e| lemma_of.lemma_of(&e.form))
            .collect();
        verb_lemmas.push(lemmas);
    }

    let mut verse_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for lemmas in &verb_lemmas {
        for l in lemmas {
            *verse_freq.entry(l.as_str()).or_default() += 1;
        }
    }

    let needed = min_other + 1;
    Ok(ids
        .iter()
        .zip(&verb_lemmas)
        .filter(|(_, lemmas)| lemmas.iter().any(|l| verse_freq[l.as_str()] >= needed))
        .map(|(id, _)| id.clone())
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterReport {
    /// Ids present in both lemma files.
    pub input_count: usize,
    pub after_lemma_overlap: usize,
    pub after_verb_support: usize,
    pub selected: Vec<VerseId>,
}

pub fn select_training_verses(
    a: &LemmaCorpus,
    b: &LemmaCorpus,
    pivot: &TaggedCorpus,
    lemma_of: &LemmaMap,
    min_shared: usize,
    min_other: usize,
) -> Result<FilterReport, FilterError> {
    let input_count = a.ids().filter(|id| b.contains(id)).count();
    let stage_one = lemma_overlap_filter(a, b, min_shared);
    let selected = verb_support_filter(pivot, &stage_one, lemma_of, min_other)?;
    Ok(FilterReport {
        input_count,
        after_lemma_overlap: stage_one.len(),
        after_verb_support: selected.len(),
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_tagged_file;

    fn lemmas(lines: &[(&str, &str)]) -> LemmaCorpus {
        let text: String = lines.iter().map(|(id, l)| format!("{id}\t{l}\n")).collect();
        parse_lemma_file(&text).unwrap()
    }

    fn vid(s: &str) -> VerseId {
        s.parse().unwrap()
    }

    #[test]
    fn overlap_threshold_examples() {
        let a = lemmas(&[("40001001", "go see man day")]);
        let b = lemmas(&[("40001001", "go see man day sun")]);
        assert_eq!(lemma_overlap_filter(&a, &b, 4), vec![vid("40001001")]);
        assert!(lemma_overlap_filter(&a, &b, 5).is_empty());
        assert_eq!(lemma_overlap_filter(&a, &b, 0), vec![vid("40001001")]);
    }

    #[test]
    fn min_zero_keeps_every_shared_id() {
        let a = lemmas(&[("40001001", ""), ("40001002", "x"), ("40001003", "y")]);
        let b = lemmas(&[("40001001", "z"), ("40001003", "q")]);
        assert_eq!(lemma_overlap_filter(&a, &b, 0), vec![vid("40001001"), vid("40001003")]);
    }

    #[test]
    fn lemma_comparison_is_case_insensitive() {
        let a = lemmas(&[("40001001", "Go SEE")]);
        let b = lemmas(&[("40001001", "go see")]);
        assert_eq!(lemma_overlap_filter(&a, &b, 2).len(), 1);
    }

    fn pivot_with_verbs(verbs: &[&str]) -> (TaggedCorpus, Vec<VerseId>) {
        let text: String = verbs
            .iter()
            .enumerate()
            .map(|(k, v)| format!("4000100{k}\tthey/PRON {v}/VERB\n"))
            .collect();
        let c = parse_tagged_file(&text).unwrap();
        let ids = c.ids().cloned().collect();
        (c, ids)
    }

    #[test]
    fn verb_support_counts_other_verses() {
        let (pivot, ids) = pivot_with_verbs(&["say"; 7]);
        assert_eq!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 5).unwrap().len(), 7);
        let (pivot, ids) = pivot_with_verbs(&["say"; 5]);
        assert!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 5).unwrap().is_empty());
    }

    #[test]
    fn verb_support_uses_lemma_map() {
        let (pivot, ids) = pivot_with_verbs(&["said", "says", "say", "saying", "Said", "say"]);
        let map: LemmaMap = [("said", "say"), ("says", "say"), ("saying", "say")].into_iter().collect();
        assert_eq!(verb_support_filter(&pivot, &ids, &map, 5).unwrap().len(), 6);
        assert!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 5).unwrap().is_empty());
    }

    #[test]
    fn verse_without_verb_is_excluded() {
        let pivot = parse_tagged_file("40001001\tdog/NOUN\n40001002\tdog/NOUN go/VERB\n").unwrap();
        let ids: Vec<_> = pivot.ids().cloned().collect();
        assert_eq!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 0).unwrap(), vec![vid("40001002")]);
    }

    #[test]
    fn frequencies_are_counted_within_ids_only() {
        let (pivot, ids) = pivot_with_verbs(&["say"; 7]);
        let subset = &ids[..5];
        assert!(verb_support_filter(&pivot, subset, &LemmaMap::identity(), 5).unwrap().is_empty());
    }

    #[test]
    fn repeated_verb_in_one_verse_counts_once() {
        let pivot = parse_tagged_file("40001001\tsay/VERB say/VERB\n40001002\tsay/VERB\n").unwrap();
        let ids: Vec<_> = pivot.ids().cloned().collect();
        assert!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 2).unwrap().is_empty());
        assert_eq!(verb_support_filter(&pivot, &ids, &LemmaMap::identity(), 1).unwrap().len(), 2);
    }

    #[test]
    fn missing_pivot_verse_is_an_error() {
        let pivot = parse_tagged_file("40001001\tsay/VERB\n").unwrap();
        let err = verb_support_filter(&pivot, &[vid("40001009")], &LemmaMap::identity(), 0).unwrap_err();
        assert_eq!(err, FilterError::MissingVerse(vid("40001009")));
    }

    #[test]
    fn empty_inputs_give_empty_report() {
        let r = select_training_verses(
            &LemmaCorpus::new(),
            &LemmaCorpus::new(),
            &TaggedCorpus::new(),
            &LemmaMap::identity(),
            4,
            5,
        )
        .unwrap();
        assert_eq!(r, FilterReport::default());
    }

    #[test]
    fn stage_one_pass_stage_two_fail() {
        let ids = ["40001001", "40001002", "40001003"];
        let rows: Vec<(&str, &str)> = ids.iter().map(|id| (*id, "god man son day")).collect();
        let a = lemmas(&rows);
        let b = lemmas(&rows);
        let pivot = parse_tagged_file(
            "40001001\tgod/PROPN go/VERB\n40001002\tman/NOUN see/VERB\n40001003\tson/NOUN eat/VERB\n",
        )
        .unwrap();
        let r = select_training_verses(&a, &b, &pivot, &LemmaMap::identity(), 4, 5).unwrap();
        assert_eq!(r.input_count, 3);
        assert_eq!(r.after_lemma_overlap, 3);
        assert_eq!(r.after_verb_support, 0);
        assert!(r.selected.is_empty());
    }

    #[test]
    fn lemma_map_file_format() {
        let m = LemmaMap::parse("# forms\nSaid\tsay\n\nwent\tgo\n").unwrap();
        assert_eq!(m.lemma_of("said"), "say");
        assert_eq!(m.lemma_of("WENT"), "go");
        assert_eq!(m.lemma_of("Run"), "run");
        assert!(matches!(LemmaMap::parse("oops\n"), Err(FilterError::MalformedLemmaMap { line: 1 })));
    }
}
