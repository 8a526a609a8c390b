//! Word-order signal from tagged corpora and a one-feature Gaussian Naive
//! Bayes classifier over it.
//!
//! A verse counts toward the N1 ratio only if it has both an argument tag and
//! a predicate tag; it is noun-first when the first argument precedes the
//! first predicate. The ratio is noun-first over verb-first counts, with an
//! add-one smoothed variant that is always defined.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{LanguageCode, PosTag, TagSet, TaggedCorpus, TaggedVerse};

pub const DEFAULT_ARG_TAGS: [PosTag; 1] = [PosTag::Noun];
pub const DEFAULT_PRED_TAGS: [PosTag; 1] = [PosTag::Verb];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypologyError {
    #[error("no training samples")]
    EmptyTraining,
    #[error("training data has only one class ({0})")]
    SingleClass(WordOrderLabel),
    #[error("UNK rows cannot be used for training")]
    UnknownLabelInTraining,
    #[error("non-finite feature value {0}")]
    NonFiniteValue(f64),
    #[error("unknown word-order label {0:?}")]
    UnknownLabel(String),
    #[error("unknown feature {0:?} (expected raw, smoothed or log-smoothed)")]
    UnknownFeature(String),
    #[error("{table} line {line}: {reason}")]
    TableFormat { table: &'static str, line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerseOrder {
    NounFirst,
    VerbFirst,
    Neither,
}

pub fn verse_order(verse: &TaggedVerse, arg_tags: TagSet, pred_tags: TagSet) -> VerseOrder {
    let first_arg = verse.tags().position(|t| arg_tags.contains(t));
    let first_pred = verse.tags().position(|t| pred_tags.contains(t));
    match (first_arg, first_pred) {
        (Some(a), Some(p)) if a < p => VerseOrder::NounFirst,
        (Some(_), Some(_)) => VerseOrder::VerbFirst,
        _ => VerseOrder::Neither,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct N1Profile {
    pub language: Option<LanguageCode>,
    pub noun_first: usize,
    pub verb_first: usize,
    /// Verses with both an argument and a predicate.
    pub considered: usize,
    /// Verses filtered out for lacking one of the two.
    pub neither: usize,
    /// `None` when `verb_first` is zero.
    pub raw_ratio: Option<f64>,
    pub smoothed_ratio: f64,
}

impl N1Profile {
    pub fn from_counts(language: Option<LanguageCode>, noun_first: usize, verb_first: usize, neither: usize) -> Self {
        N1Profile {
            language,
            noun_first,
            verb_first,
            considered: noun_first + verb_first,
            neither,
            raw_ratio: (verb_first > 0).then(|| noun_first as f64 / verb_first as f64),
            smoothed_ratio: (noun_first as f64 + 1.0) / (verb_first as f64 + 1.0),
        }
    }
}

pub fn n1_profile(corpus: &TaggedCorpus, arg_tags: TagSet, pred_tags: TagSet) -> N1Profile {
    let (mut nf, mut vf, mut neither) = (0, 0, 0);
    for v in corpus.verses() {
        match verse_order(v, arg_tags, pred_tags) {
            VerseOrder::NounFirst => nf += 1,
            VerseOrder::VerbFirst => vf += 1,
            VerseOrder::Neither => neither += 1,
        }
    }
    N1Profile::from_counts(corpus.language().cloned(), nf, vf, neither)
}

/// Which transform of the N1 counts feeds the classifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Feature {
    Raw,
    #[default]
    Smoothed,
    LogSmoothed,
}

impl Feature {
    pub fn value(self, p: &N1Profile) -> Option<f64> {
        match self {
            Feature::Raw => p.raw_ratio,
            Feature::Smoothed => Some(p.smoothed_ratio),
            Feature::LogSmoothed => Some(p.smoothed_ratio.ln()),
        }
    }
}

impl FromStr for Feature {
    type Err = TypologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Feature::Raw),
            "smoothed" => Ok(Feature::Smoothed),
            "log-smoothed" => Ok(Feature::LogSmoothed),
            _ => Err(TypologyError::UnknownFeature(s.to_string())),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Raw => "raw",
            Feature::Smoothed => "smoothed",
            Feature::LogSmoothed => "log-smoothed",
        })
    }
}

/// Expert word-order classification. Ordered by label text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WordOrderLabel {
    Free,
    Sv,
    Unk,
    Vs,
}

impl WordOrderLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            WordOrderLabel::Free => "FREE",
            WordOrderLabel::Sv => "SV",
            WordOrderLabel::Unk => "UNK",
            WordOrderLabel::Vs => "VS",
        }
    }
}

impl fmt::Display for WordOrderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WordOrderLabel {
    type Err = TypologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FREE" => Ok(WordOrderLabel::Free),
            "SV" => Ok(WordOrderLabel::Sv),
            "UNK" => Ok(WordOrderLabel::Unk),
            "VS" => Ok(WordOrderLabel::Vs),
            _ => Err(TypologyError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnbClass {
    pub label: WordOrderLabel,
    pub prior: f64,
    pub mean: f64,
    /// Maximum-likelihood variance plus the model epsilon.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnbModel {
    /// Sorted by label.
    pub classes: Vec<GnbClass>,
    pub epsilon: f64,
}

const EPSILON_SCALE: f64 = 1e-9;
const EPSILON_FLOOR: f64 = 1e-12;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ml_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn gnb_train(samples: &[(f64, WordOrderLabel)]) -> Result<GnbModel, TypologyError> {
    if samples.is_empty() {
        return Err(TypologyError::EmptyTraining);
    }
    let mut groups: BTreeMap<WordOrderLabel, Vec<f64>> = BTreeMap::new();
    for &(x, label) in samples {
        if label == WordOrderLabel::Unk {
            return Err(TypologyError::UnknownLabelInTraining);
        }
        if !x.is_finite() {
            return Err(TypologyError::NonFiniteValue(x));
        }
        groups.entry(label).or_default().push(x);
    }
    if groups.len() < 2 {
        return Err(TypologyError::SingleClass(*groups.keys().next().unwrap()));
    }
    let all: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let epsilon = (EPSILON_SCALE * ml_variance(&all)).max(EPSILON_FLOOR);
    let n = samples.len() as f64;
    let classes = groups
        .into_iter()
        .map(|(label, xs)| GnbClass {
            label,
            prior: xs.len() as f64 / n,
            mean: mean(&xs),
            variance: ml_variance(&xs) + epsilon,
        })
        .collect();
    Ok(GnbModel { classes, epsilon })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: WordOrderLabel,
    pub posteriors: BTreeMap<WordOrderLabel, f64>,
}

impl GnbClass {
    pub fn log_joint(&self, x: f64) -> f64 {
        self.prior.ln() - 0.5 * (2.0 * PI * self.variance).ln() - (x - self.mean).powi(2) / (2.0 * self.variance)
    }
}

pub fn gnb_predict(model: &GnbModel, value: f64) -> Prediction {
    let scores: Vec<f64> = model.classes.iter().map(|c| c.log_joint(value)).collect();
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let top = scores[best];
    let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    let posteriors = model.classes.iter().zip(&weights).map(|(c, w)| (c.label, w / z)).collect();
    Prediction { label: model.classes[best].label, posteriors }
}

impl GnbModel {
    pub fn to_text(&self) -> String {
        let mut out = format!("GNB v1 epsilon={}\n", self.epsilon);
        for c in &self.classes {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", c.label, c.prior, c.mean, c.variance);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TypologyError> {
        let bad = |line: usize, reason: &str| TypologyError::TableFormat {
            table: "classifier model",
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let epsilon = match lines.next() {
            Some((_, h)) => h
                .trim_end_matches('\r')
                .strip_prefix("GNB v1 epsilon=")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|e| *e > 0.0)
                .ok_or_else(|| bad(1, "expected header GNB v1 epsilon=<value>"))?,
            None => return Err(bad(1, "empty model file")),
        };
        let mut classes: Vec<GnbClass> = Vec::new();
        for (idx, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [label, prior, mean, variance] = fields[..] else {
                return Err(bad(idx + 1, "expected label<TAB>prior<TAB>mean<TAB>variance"));
            };
            let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(idx + 1, "bad number"));
            let class = GnbClass { label: label.parse()?, prior: num(prior)?, mean: num(mean)?, variance: num(variance)? };
            if class.variance <= 0.0 || !(0.0..=1.0).contains(&class.prior) {
                return Err(bad(idx + 1, "prior outside [0,1] or non-positive variance"));
            }
            classes.push(class);
        }
        if classes.len() < 2 {
            return Err(bad(1, "model needs at least two classes"));
        }
        classes.sort_by_key(|c| c.label);
        Ok(GnbModel { classes, epsilon })
    }
}

fn format_ratio(r: f64) -> String {
    format!("{r}")
}

/// Writes the profile table: `iso noun_first verb_first considered raw smoothed`.
pub fn write_profile_table(rows: &BTreeMap<LanguageCode, N1Profile>) -> String {
    let mut out = String::from("#iso\tnoun_first\tverb_first\tconsidered\traw\tsmoothed\n");
    for (iso, p) in rows {
        let raw = p.raw_ratio.map(format_ratio).unwrap_or_else(|| "NA".to_string());
        let _ = writeln!(
            out,
            "{iso}\t{}\t{}\t{}\t{raw}\t{}",
            p.noun_first,
            p.verb_first,
            p.considered,
            format_ratio(p.smoothed_ratio)
        );
    }
    out
}

/// Reads a profile table. Ratios are recomputed from the counts.
pub fn parse_profile_table(text: &str) -> Result<BTreeMap<LanguageCode, N1Profile>, TypologyError> {
    let mut rows = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| TypologyError::TableFormat { table: "profile table", line: idx + 1, reason: reason.into() };
        let fields: Vec<&str> = line.split('\t').collect();
        let [iso, nf, vf, considered, _raw, _smoothed] = fields[..] else {
            return Err(bad("expected 6 tab-separated columns"));
        };
        let iso: LanguageCode = iso.parse().map_err(|_| bad("bad ISO code"))?;
        let count = |s: &str| s.parse::<usize>().map_err(|_| bad("bad count"));
        let (nf, vf, considered) = (count(nf)?, count(vf)?, count(considered)?);
        if considered != nf + vf {
            return Err(bad("considered must equal noun_first + verb_first"));
        }
        let profile = N1Profile::from_counts(Some(iso.clone()), nf, vf, 0);
        if rows.insert(iso, profile).is_some() {
            return Err(bad("duplicate ISO code"));
        }
    }
    Ok(rows)
}

pub fn parse_label_table(text: &str) -> Result<BTreeMap<LanguageCode, WordOrderLabel>, TypologyError> {
    let mut rows = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| TypologyError::TableFormat { table: "label table", line: idx + 1, reason: reason.into() };
        let Some((iso, label)) = line.split_once('\t') else {
            return Err(bad("expected iso<TAB>label"));
        };
        let iso: LanguageCode = iso.trim().parse().map_err(|_| bad("bad ISO code"))?;
        let label: WordOrderLabel = label.trim().parse()?;
        if rows.insert(iso, label).is_some() {
            return Err(bad("duplicate ISO code"));
        }
    }
    Ok(rows)
}
