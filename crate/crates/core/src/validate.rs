//! Checks of projected output against reference taggers, gold lexicons and
//! typological labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{nfc, LanguageCode, PosTag, TagSet, TaggedCorpus};
use crate::typology::{Feature, N1Profile, WordOrderLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidateError {
    #[error("no shared verse has identical tokenization in both corpora")]
    NoComparableVerses,
    #[error("ANOVA needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0:?} is empty")]
    EmptyGroup(String),
    #[error("ANOVA needs more observations than groups ({observations} values in {groups} groups)")]
    InsufficientObservations { observations: usize, groups: usize },
    #[error("non-finite value in group {0:?}")]
    NonFiniteValue(String),
    #[error("lexicon line {line}: expected form<TAB>TAG")]
    MalformedLexicon { line: usize },
}

/// Which side supplies the denominator of an agreement rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AgreementDirection {
    /// Share of reference-tagged tokens that the hypothesis tags the same way.
    #[default]
    Recall,
    /// Share of hypothesis-tagged tokens that the reference tags the same way.
    Precision,
}

impl AgreementDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            AgreementDirection::Recall => "recall",
            AgreementDirection::Precision => "precision",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TagAgreement {
    pub matched: usize,
    /// Denominator: tokens carrying the tag on the side picked by the direction.
    pub reference_total: usize,
}

impl TagAgreement {
    pub fn rate(&self) -> Option<f64> {
        (self.reference_total > 0).then(|| self.matched as f64 / self.reference_total as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub direction: AgreementDirection,
    pub per_tag: BTreeMap<PosTag, TagAgreement>,
    pub compared_verses: usize,
    pub skipped_verses: usize,
}

/// Compares tags over shared verses whose token sequences are identical.
/// Verses with any tokenization difference are skipped whole.
pub fn tag_agreement(
    reference: &TaggedCorpus,
    hypothesis: &TaggedCorpus,
    tags_of_interest: TagSet,
    direction: AgreementDirection,
) -> Result<AgreementReport, ValidateError> {
    let mut per_tag: BTreeMap<PosTag, TagAgreement> =
        tags_of_interest.iter().map(|t| (t, TagAgreement::default())).collect();
    let (mut compared, mut skipped) = (0, 0);
    for r in reference.verses() {
        let Some(h) = hypothesis.get(&r.id) else { continue };
        if !r.forms().eq(h.forms()) {
            skipped += 1;
            continue;
        }
        compared += 1;
        for (rt, ht) in r.tags().zip(h.tags()) {
            let (denom, other) = match direction {
                AgreementDirection::Recall => (rt, ht),
                AgreementDirection::Precision => (ht, rt),
            };
            if let Some(slot) = per_tag.get_mut(&denom) {
                slot.reference_total += 1;
                if other == denom {
                    slot.matched += 1;
                }
            }
        }
    }
    if compared == 0 {
        return Err(ValidateError::NoComparableVerses);
    }
    Ok(AgreementReport { direction, per_tag, compared_verses: compared, skipped_verses: skipped })
}

fn format_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

impl AgreementReport {
    pub fn to_tsv(&self) -> String {
        let denom = match self.direction {
            AgreementDirection::Recall => "reference",
            AgreementDirection::Precision => "hypothesis",
        };
        let mut out = format!(
            "# tag agreement direction={} (matched / {denom}-tagged tokens) compared_verses={} skipped_verses={}\n",
            self.direction.as_str(),
            self.compared_verses,
            self.skipped_verses
        );
        out.push_str("#tag\tmatched\ttotal\trate\n");
        for (tag, a) in &self.per_tag {
            let _ = writeln!(out, "{tag}\t{}\t{}\t{}", a.matched, a.reference_total, format_rate(a.rate()));
        }
        out
    }
}

pub type FormTagSet = BTreeSet<(String, PosTag)>;

fn fold_form(form: &str) -> String {
    nfc(form).to_lowercase()
}

pub fn form_tags(corpus: &TaggedCorpus) -> FormTagSet {
    corpus
        .verses()
        .flat_map(|v| v.entries().iter().map(|e| (fold_form(&e.form), e.tag)))
        .collect()
}

/// Reads a `form<TAB>TAG` lexicon. Blank and `#` lines are ignored.
pub fn parse_lexicon(text: &str) -> Result<FormTagSet, ValidateError> {
    let mut out = FormTagSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || ValidateError::MalformedLexicon { line: idx + 1 };
        let (form, tag) = line.split_once('\t').ok_or_else(bad)?;
        let tag: PosTag = tag.trim().parse().map_err(|_| bad())?;
        if form.trim().is_empty() {
            return Err(bad());
        }
        out.insert((fold_form(form.trim()), tag));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapReport {
    pub per_tag: BTreeMap<PosTag, BTreeSet<String>>,
}

pub fn gold_overlap(gold: &FormTagSet, hypothesis: &FormTagSet, tags_of_interest: TagSet) -> OverlapReport {
    let mut per_tag: BTreeMap<PosTag, BTreeSet<String>> =
        tags_of_interest.iter().map(|t| (t, BTreeSet::new())).collect();
    for pair in gold.intersection(hypothesis) {
        if let Some(forms) = per_tag.get_mut(&pair.1) {
            forms.insert(pair.0.clone());
        }
    }
    OverlapReport { per_tag }
}

impl OverlapReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# gold overlap: exact form+tag matches after NFC and lowercasing\n#tag\tshared\tforms\n");
        for (tag, forms) in &self.per_tag {
            let list: Vec<&str> = forms.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{tag}\t{}\t{}", forms.len(), list.join(" "));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    pub group_means: BTreeMap<String, f64>,
    /// Keyed by label pairs with the first label sorting before the second.
    pub pairwise_mean_diffs: BTreeMap<(String, String), f64>,
    /// Set when every group is constant but the groups differ; F is infinite
    /// and p is taken as 0.
    pub zero_within_variance: bool,
}

// Sums of squares below this fraction of the raw second moment are rounding
// noise from the mean computation.
const ZERO_SS_REL: f64 = 1e-20;

pub fn anova_oneway(groups: &BTreeMap<String, Vec<f64>>) -> Result<AnovaResult, ValidateError> {
    let k = groups.len();
    if k < 2 {
        return Err(ValidateError::TooFewGroups(k));
    }
    for (label, xs) in groups {
        if xs.is_empty() {
            return Err(ValidateError::EmptyGroup(label.clone()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(ValidateError::NonFiniteValue(label.clone()));
        }
    }
    let n: usize = groups.values().map(Vec::len).sum();
    if n <= k {
        return Err(ValidateError::InsufficientObservations { observations: n, groups: k });
    }

    let group_means: BTreeMap<String, f64> =
        groups.iter().map(|(l, xs)| (l.clone(), xs.iter().sum::<f64>() / xs.len() as f64)).collect();
    let grand = groups.values().flatten().sum::<f64>() / n as f64;
    let ssb: f64 = groups.iter().map(|(l, xs)| xs.len() as f64 * (group_means[l] - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|(l, xs)| xs.iter().map(|x| (x - group_means[l]).powi(2)).sum::<f64>())
        .sum();
    let scale: f64 = groups.values().flatten().map(|x| x * x).sum::<f64>();
    let negligible = |ss: f64| ss <= ZERO_SS_REL * scale;

    let (df_between, df_within) = (k - 1, n - k);
    let (f_stat, p_value, zero_within_variance) = if negligible(ssw) {
        if negligible(ssb) {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let f = (ssb / df_between as f64) / (ssw / df_within as f64);
        (f, f_survival(f, df_between, df_within), false)
    };

    let labels: Vec<&String> = group_means.keys().collect();
    let mut pairwise_mean_diffs = BTreeMap::new();
    for (a_idx, a) in labels.iter().enumerate() {
        for b in &labels[a_idx + 1..] {
            let diff = (group_means[*a] - group_means[*b]).abs();
            pairwise_mean_diffs.insert(((*a).clone(), (*b).clone()), diff);
        }
    }
    Ok(AnovaResult { f_stat, df_between, df_within, p_value, group_means, pairwise_mean_diffs, zero_within_variance })
}

/// Upper tail of the F(d1, d2) distribution at `f`.
pub fn f_survival(f: f64, d1: usize, d2: usize) -> f64 {
    assert!(d1 > 0 && d2 > 0, "degrees of freedom must be positive");
    if f.is_nan() || f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    let x = d2 / (d2 + d1 * f);
    statrs::function::beta::beta_reg(d2 / 2.0, d1 / 2.0, x).clamp(0.0, 1.0)
}

const P_DISPLAY_FLOOR: f64 = 1e-300;

pub fn format_p_value(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "<1e-300".to_string()
    } else {
        format!("{p}")
    }
}

impl AnovaResult {
    pub fn to_tsv(&self, feature: Feature) -> String {
        let mut out = format!(
            "# one-way ANOVA of N1 ({feature}) across word-order labels; diff = |mean_a - mean_b|\n#key\tvalue\n"
        );
        let _ = writeln!(out, "f_stat\t{}", self.f_stat);
        let _ = writeln!(out, "df_between\t{}", self.df_between);
        let _ = writeln!(out, "df_within\t{}", self.df_within);
        let _ = writeln!(out, "p_value\t{}", format_p_value(self.p_value));
        let _ = writeln!(out, "zero_within_variance\t{}", self.zero_within_variance);
        for (label, m) in &self.group_means {
            let _ = writeln!(out, "mean\t{label}\t{m}");
        }
        for ((a, b), d) in &self.pairwise_mean_diffs {
            let _ = writeln!(out, "diff\t{a}\t{b}\t{d}");
        }
        out
    }
}

/// Groups feature values by label. UNK rows, unlabeled languages and
/// undefined feature values are left out.
pub fn groups_by_label(
    profiles: &BTreeMap<LanguageCode, N1Profile>,
    labels: &BTreeMap<LanguageCode, WordOrderLabel>,
    feature: Feature,
) -> BTreeMap<String, Vec<f64>> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (iso, profile) in profiles {
        let Some(&label) = labels.get(iso) else { continue };
        if label == WordOrderLabel::Unk {
            continue;
        }
        if let Some(x) = feature.value(profile) {
            groups.entry(label.to_string()).or_default().push(x);
        }
    }
    groups
}
