//! End-to-end driver: filter, then per language tokenize, align, project and
//! profile, then train the word-order classifier and predict unlabeled rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::aligner::{self, AlignmentModel, DEFAULT_IBM1_ITERATIONS, DEFAULT_IBM2_ITERATIONS};
use crate::corpus::{self, intersect_ids, LanguageCode, RawCorpus, TagSet, TaggedCorpus, VerseId, VerseSet};
use crate::filter::{self, FilterReport, LemmaMap, DEFAULT_MIN_OTHER, DEFAULT_MIN_SHARED};
use crate::io::{format_id_list, read_text, write_atomic, IoError};
use crate::projector::{project_corpus, training_pair, ProjectionConfig};
use crate::subword::{train_bpe, BpeModel, DEFAULT_VOCAB_SIZE};
use crate::typology::{
    gnb_predict, gnb_train, n1_profile, parse_label_table, write_profile_table, Feature, GnbModel, N1Profile,
    WordOrderLabel, DEFAULT_ARG_TAGS, DEFAULT_PRED_TAGS,
};

/// Reserved for future stochastic stages; the pipeline is deterministic and
/// does not read it.
pub const SEED_ENV: &str = "TYPOLINE_SEED";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("config is missing required key {0:?}")]
    MissingKey(&'static str),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: corpus::CorpusError },
    #[error(transparent)]
    Filter(#[from] filter::FilterError),
    #[error(transparent)]
    Typology(#[from] crate::typology::TypologyError),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub pivot: PathBuf,
    pub lemmas_a: PathBuf,
    pub lemmas_b: PathBuf,
    pub lemma_map: Option<PathBuf>,
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub min_shared: usize,
    pub min_other: usize,
    pub vocab_size: usize,
    pub ibm1_iters: usize,
    pub ibm2_iters: usize,
    pub arg_tags: TagSet,
    pub pred_tags: TagSet,
    pub feature: Feature,
}

impl PipelineConfig {
    /// Parses `key = value` lines. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| PipelineError::Config { line: idx + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(bad(format!("empty value for {key}")));
            }
            if values.insert(key.to_string(), (idx + 1, value.to_string())).is_some() {
                return Err(bad(format!("duplicate key {key}")));
            }
        }

        let mut take = |key: &str| values.remove(key);
        let path = |v: Option<(usize, String)>| v.map(|(_, p)| base.join(p));
        let required = |v: Option<(usize, String)>, key: &'static str| path(v).ok_or(PipelineError::MissingKey(key));
        let count = |v: Option<(usize, String)>, default: usize| -> Result<usize, PipelineError> {
            match v {
                None => Ok(default),
                Some((line, s)) => match s.parse::<usize>() {
                    Ok(n) if n > 0 => Ok(n),
                    _ => Err(PipelineError::Config { line, reason: format!("expected a positive integer, got {s:?}") }),
                },
            }
        };
        let tags = |v: Option<(usize, String)>, default: TagSet| -> Result<TagSet, PipelineError> {
            match v {
                None => Ok(default),
                Some((line, s)) => {
                    s.parse::<TagSet>().map_err(|e| PipelineError::Config { line, reason: e.to_string() })
                }
            }
        };

        let cfg = PipelineConfig {
            pivot: required(take("pivot"), "pivot")?,
            lemmas_a: required(take("lemmas_a"), "lemmas_a")?,
            lemmas_b: required(take("lemmas_b"), "lemmas_b")?,
            lemma_map: path(take("lemma_map")),
            corpus_dir: required(take("corpus_dir"), "corpus_dir")?,
            output_dir: required(take("output_dir"), "output_dir")?,
            manifest: path(take("manifest")),
            labels: path(take("labels")),
            min_shared: count(take("min_shared"), DEFAULT_MIN_SHARED)?,
            min_other: count(take("min_other"), DEFAULT_MIN_OTHER)?,
            vocab_size: count(take("vocab_size"), DEFAULT_VOCAB_SIZE)?,
            ibm1_iters: count(take("ibm1_iters"), DEFAULT_IBM1_ITERATIONS)?,
            ibm2_iters: count(take("ibm2_iters"), DEFAULT_IBM2_ITERATIONS)?,
            arg_tags: tags(take("arg_tags"), TagSet::from(DEFAULT_ARG_TAGS))?,
            pred_tags: tags(take("pred_tags"), TagSet::from(DEFAULT_PRED_TAGS))?,
            feature: match take("feature") {
                None => Feature::default(),
                Some((line, s)) => s.parse().map_err(|e: crate::typology::TypologyError| PipelineError::Config {
                    line,
                    reason: e.to_string(),
                })?,
            },
        };
        if let Some((key, (line, _))) = values.into_iter().next() {
            return Err(PipelineError::Config { line, reason: format!("unknown key {key}") });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&read_text(path)?, base)
    }

    pub fn corpus_path(&self, iso: &LanguageCode) -> PathBuf {
        self.corpus_dir.join(format!("{iso}.txt"))
    }

    fn input_paths(&self) -> Vec<&Path> {
        let mut paths = vec![self.pivot.as_path(), self.lemmas_a.as_path(), self.lemmas_b.as_path()];
        paths.extend(self.lemma_map.as_deref());
        paths
    }
}

/// Reads a manifest: one ISO code per line, blank and `#` lines ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<LanguageCode>, PipelineError> {
    let mut out: Vec<LanguageCode> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let iso = line.parse().map_err(|e: corpus::CorpusError| PipelineError::Config {
            line: idx + 1,
            reason: format!("manifest: {e}"),
        })?;
        out.push(iso);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, resume: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanguageOutcome {
    pub training_verses: usize,
    pub projected: usize,
    pub skipped: usize,
    pub profile: N1Profile,
    pub resumed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: WordOrderLabel,
    pub value: f64,
    pub posteriors: BTreeMap<WordOrderLabel, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSummary {
    pub filter: FilterReport,
    pub languages: BTreeMap<LanguageCode, Result<LanguageOutcome, String>>,
    pub classifier: Option<GnbModel>,
    /// Why no classifier was trained, when labels were supplied.
    pub classifier_note: Option<String>,
    pub predictions: BTreeMap<LanguageCode, Prediction>,
}

impl PipelineSummary {
    pub fn failures(&self) -> usize {
        self.languages.values().filter(|r| r.is_err()).count()
    }

    pub fn to_tsv(&self) -> String {
        let f = &self.filter;
        let mut out = format!(
            "# filter: shared_ids={} after_lemma_overlap={} selected={}\n",
            f.input_count, f.after_lemma_overlap, f.after_verb_support
        );
        out.push_str("#iso\tstatus\ttraining_verses\tprojected\tskipped\tnoun_first\tverb_first\tsmoothed\tdetail\n");
        for (iso, r) in &self.languages {
            match r {
                Ok(o) => {
                    let p = &o.profile;
                    let _ = writeln!(
                        out,
                        "{iso}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t-",
                        o.training_verses, o.projected, o.skipped, p.noun_first, p.verb_first, p.smoothed_ratio
                    );
                }
                Err(e) => {
                    let detail = e.replace(['\t', '\n'], " ");
                    let _ = writeln!(out, "{iso}\tfailed\t-\t-\t-\t-\t-\t-\t{detail}");
                }
            }
        }
        if let Some(note) = &self.classifier_note {
            let _ = writeln!(out, "# classifier: {note}");
        }
        out
    }
}

pub fn predictions_tsv(predictions: &BTreeMap<LanguageCode, Prediction>, feature: Feature, labels: &[WordOrderLabel]) -> String {
    let mut out = format!("# word-order predictions from N1 ({feature})\n#iso\tlabel\tvalue");
    for l in labels {
        let _ = write!(out, "\tP({l})");
    }
    out.push('\n');
    for (iso, p) in predictions {
        let _ = write!(out, "{iso}\t{}\t{}", p.label, p.value);
        for l in labels {
            let _ = write!(out, "\t{}", p.posteriors.get(l).copied().unwrap_or(0.0));
        }
        out.push('\n');
    }
    out
}

struct SharedInputs {
    pivot: TaggedCorpus,
    selected: std::collections::BTreeSet<VerseId>,
    newest_input: Option<SystemTime>,
}

fn parse_corpus_file<T>(
    path: &Path,
    parse: impl FnOnce(&str) -> Result<T, corpus::CorpusError>,
) -> Result<T, PipelineError> {
    let text = read_text(path)?;
    parse(&text).map_err(|source| PipelineError::Corpus { path: path.to_path_buf(), source })
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

struct LanguagePaths {
    bpe: PathBuf,
    model: PathBuf,
    tagged: PathBuf,
}

fn language_paths(cfg: &PipelineConfig, iso: &LanguageCode) -> LanguagePaths {
    LanguagePaths {
        bpe: cfg.output_dir.join(format!("{iso}.bpe")),
        model: cfg.output_dir.join(format!("{iso}.ibm2")),
        tagged: cfg.output_dir.join(format!("{iso}.tagged.txt")),
    }
}

fn try_resume(cfg: &PipelineConfig, shared: &SharedInputs, iso: &LanguageCode) -> Option<LanguageOutcome> {
    let paths = language_paths(cfg, iso);
    let newest_input = [shared.newest_input?, modified(&cfg.corpus_path(iso))?].into_iter().max()?;
    let oldest_output = [&paths.bpe, &paths.model, &paths.tagged].iter().map(|p| modified(p)).min()??;
    if oldest_output < newest_input {
        return None;
    }
    let source = parse_corpus_file(&cfg.corpus_path(iso), corpus::parse_verse_file).ok()?;
    let tagged = parse_corpus_file(&paths.tagged, corpus::parse_tagged_file).ok()?.with_language(iso.clone());
    let ids = intersect_ids(&[&shared.selected as &dyn VerseSet, &source, &shared.pivot]);
    Some(LanguageOutcome {
        training_verses: ids.len(),
        projected: tagged.len(),
        skipped: ids.len().saturating_sub(tagged.len()),
        profile: n1_profile(&tagged, cfg.arg_tags, cfg.pred_tags),
        resumed: true,
    })
}

fn process_language(cfg: &PipelineConfig, shared: &SharedInputs, iso: &LanguageCode) -> Result<LanguageOutcome, PipelineError> {
    let source = parse_corpus_file(&cfg.corpus_path(iso), corpus::parse_verse_file)?.with_language(iso.clone());
    let ids = intersect_ids(&[&shared.selected as &dyn VerseSet, &source, &shared.pivot]);
    info!("[{iso}] {} training verses", ids.len());

    let mut subset = RawCorpus::new().with_language(iso.clone());
    for id in &ids {
        subset.insert(source.get(id).expect("id came from source").clone()).expect("ids are unique");
    }
    let paths = language_paths(cfg, iso);
    let bpe = train_bpe(&subset, cfg.vocab_size).map_err(|e| stage_err("tokenizer")(e.to_string()))?;
    write_atomic(&paths.bpe, bpe.to_text().as_bytes())?;
    info!("[{iso}] tokenizer: {} merges", bpe.merges().len());

    let pairs: Vec<_> = ids
        .iter()
        .filter_map(|id| training_pair(&bpe, subset.get(id)?, shared.pivot.get(id)?))
        .collect();
    let model = aligner::train(&pairs, cfg.ibm1_iters, cfg.ibm2_iters).map_err(|e| stage_err("aligner")(e.to_string()))?;
    write_atomic(&paths.model, model.to_text().as_bytes())?;
    info!("[{iso}] aligner trained on {} pairs", pairs.len());

    let (tagged, report) = project_corpus(&model, &subset, &bpe, &shared.pivot, &ids, &ProjectionConfig::default());
    write_atomic(&paths.tagged, tagged.to_text().as_bytes())?;
    for (id, why) in &report.skipped {
        warn!("[{iso}] verse {id} not projected: {why:?}");
    }
    let profile = n1_profile(&tagged, cfg.arg_tags, cfg.pred_tags);
    info!("[{iso}] projected {} verses, N1 smoothed {}", report.projected, profile.smoothed_ratio);
    Ok(LanguageOutcome {
        training_verses: ids.len(),
        projected: report.projected,
        skipped: report.skipped.len(),
        profile,
        resumed: false,
    })
}

fn stage_err(stage: &'static str) -> impl FnOnce(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

/// Loads a trained model back, for callers that want to reuse pipeline outputs.
pub fn load_language_models(cfg: &PipelineConfig, iso: &LanguageCode) -> Result<(BpeModel, AlignmentModel), String> {
    let paths = language_paths(cfg, iso);
    let bpe = BpeModel::parse(&read_text(&paths.bpe).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let model = AlignmentModel::parse(&read_text(&paths.model).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok((bpe, model))
}

/// Runs every stage. Per-language failures are recorded in the summary and
/// do not stop other languages; shared-input problems are returned as errors.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    languages: &[LanguageCode],
    opts: RunOptions,
) -> Result<PipelineSummary, PipelineError> {
    let pivot = parse_corpus_file(&cfg.pivot, corpus::parse_tagged_file)?;
    let lemmas_a = parse_corpus_file(&cfg.lemmas_a, filter::parse_lemma_file)?;
    let lemmas_b = parse_corpus_file(&cfg.lemmas_b, filter::parse_lemma_file)?;
    let lemma_map = match &cfg.lemma_map {
        Some(p) => LemmaMap::parse(&read_text(p)?)?,
        None => LemmaMap::identity(),
    };
    let report =
        filter::select_training_verses(&lemmas_a, &lemmas_b, &pivot, &lemma_map, cfg.min_shared, cfg.min_other)?;
    info!(
        "filter: {} shared ids, {} after lemma overlap, {} selected",
        report.input_count, report.after_lemma_overlap, report.after_verb_support
    );
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|source| IoError::Io { path: cfg.output_dir.clone(), source })?;
    write_atomic(&cfg.output_dir.join("selected_ids.txt"), format_id_list(&report.selected).as_bytes())?;

    let newest_input = cfg.input_paths().into_iter().map(modified).collect::<Option<Vec<_>>>().and_then(|v| v.into_iter().max());
    let shared = SharedInputs { pivot, selected: report.selected.iter().cloned().collect(), newest_input };

    let mut languages = languages.to_vec();
    languages.sort();
    languages.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<LanguageOutcome, String>> = pool.install(|| {
        languages
            .par_iter()
            .map(|iso| {
                if opts.resume {
                    if let Some(o) = try_resume(cfg, &shared, iso) {
                        info!("[{iso}] outputs up to date, skipped");
                        return Ok(o);
                    }
                }
                process_language(cfg, &shared, iso).map_err(|e| {
                    let msg = e.to_string();
                    warn!("[{iso}] failed: {msg}");
                    msg
                })
            })
            .collect()
    });
    let results: BTreeMap<LanguageCode, Result<LanguageOutcome, String>> = languages.into_iter().zip(outcomes).collect();

    let profiles: BTreeMap<LanguageCode, N1Profile> = results
        .iter()
        .filter_map(|(iso, r)| r.as_ref().ok().map(|o| (iso.clone(), o.profile.clone())))
        .collect();
    write_atomic(&cfg.output_dir.join("n1.tsv"), write_profile_table(&profiles).as_bytes())?;

    let mut summary = PipelineSummary {
        filter: report,
        languages: results,
        classifier: None,
        classifier_note: None,
        predictions: BTreeMap::new(),
    };
    if let Some(labels_path) = &cfg.labels {
        let labels = parse_label_table(&read_text(labels_path)?)?;
        classify(cfg, &profiles, &labels, &mut summary)?;
    }
    write_atomic(&cfg.output_dir.join("summary.tsv"), summary.to_tsv().as_bytes())?;
    Ok(summary)
}

fn classify(
    cfg: &PipelineConfig,
    profiles: &BTreeMap<LanguageCode, N1Profile>,
    labels: &BTreeMap<LanguageCode, WordOrderLabel>,
    summary: &mut PipelineSummary,
) -> Result<(), PipelineError> {
    let samples: Vec<(f64, WordOrderLabel)> = profiles
        .iter()
        .filter_map(|(iso, p)| {
            let label = *labels.get(iso)?;
            (label != WordOrderLabel::Unk).then_some(())?;
            Some((cfg.feature.value(p)?, label))
        })
        .collect();
    let model = match gnb_train(&samples) {
        Ok(m) => m,
        Err(e) => {
            warn!("classifier not trained: {e}");
            summary.classifier_note = Some(format!("not trained: {e}"));
            return Ok(());
        }
    };
    write_atomic(&cfg.output_dir.join("gnb.tsv"), model.to_text().as_bytes())?;
    for (iso, p) in profiles {
        if !matches!(labels.get(iso), None | Some(WordOrderLabel::Unk)) {
            continue;
        }
        let Some(value) = cfg.feature.value(p) else {
            warn!("[{iso}] feature {} undefined, no prediction", cfg.feature);
            continue;
        };
        let pred = gnb_predict(&model, value);
        summary.predictions.insert(iso.clone(), Prediction { label: pred.label, value, posteriors: pred.posteriors });
    }
    let class_labels: Vec<WordOrderLabel> = model.classes.iter().map(|c| c.label).collect();
    write_atomic(
        &cfg.output_dir.join("predictions.tsv"),
        predictions_tsv(&summary.predictions, cfg.feature, &class_labels).as_bytes(),
    )?;
    summary.classifier = Some(model);
    Ok(())
}
