//! Command-line front end. Every stage is a subcommand; `run-pipeline`
//! drives them all over a manifest of languages.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::aligner::{self, AlignmentModel, DEFAULT_IBM1_ITERATIONS, DEFAULT_IBM2_ITERATIONS};
use crate::corpus::{parse_tagged_file, parse_verse_file, summary_stats, LanguageCode, PosTag, TagSet, TaggedCorpus};
use crate::filter::{parse_lemma_file, select_training_verses, LemmaMap, DEFAULT_MIN_OTHER, DEFAULT_MIN_SHARED};
use crate::io::{format_id_list, read_id_list, read_text, write_atomic};
use crate::pipeline::{parse_manifest, predictions_tsv, run_pipeline, PipelineConfig, Prediction, RunOptions};
use crate::projector::{project_corpus, training_pair, ProjectionConfig};
use crate::subword::{train_bpe, BpeModel, DEFAULT_VOCAB_SIZE};
use crate::typology::{
    gnb_predict, gnb_train, n1_profile, parse_label_table, parse_profile_table, write_profile_table, Feature,
    GnbModel, N1Profile, WordOrderLabel,
};
use crate::validate::{
    anova_oneway, form_tags, gold_overlap, groups_by_label, parse_lexicon, tag_agreement, AgreementDirection,
};

#[derive(Debug, Parser)]
#[command(name = "typoline", version, about = "Tag projection over parallel verse corpora and N1 word-order typology")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select training verse ids from two lemmatized translations and the tagged pivot.
    FilterVerses {
        #[arg(long)]
        lemmas_a: PathBuf,
        #[arg(long)]
        lemmas_b: PathBuf,
        #[arg(long)]
        pivot: PathBuf,
        /// TSV of form<TAB>lemma for pivot verbs; forms map to themselves otherwise.
        #[arg(long)]
        lemma_map: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MIN_SHARED)]
        min_shared: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_OTHER)]
        min_other: usize,
        /// Write ids here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a BPE model on a raw verse file.
    TrainTokenizer {
        #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
        vocab_size: usize,
        corpus: PathBuf,
        model_out: PathBuf,
    },
    /// Train IBM Model 1 then Model 2 between source subwords and pivot words.
    Align {
        #[arg(long, default_value_t = DEFAULT_IBM1_ITERATIONS)]
        ibm1_iters: usize,
        #[arg(long, default_value_t = DEFAULT_IBM2_ITERATIONS)]
        ibm2_iters: usize,
        /// Tokenizer used to split the source side.
        #[arg(long)]
        bpe: PathBuf,
        source: PathBuf,
        pivot: PathBuf,
        ids: PathBuf,
        model_out: PathBuf,
    },
    /// Project pivot tags onto source words.
    Project {
        model: PathBuf,
        bpe_model: PathBuf,
        source: PathBuf,
        pivot: PathBuf,
        #[arg(long)]
        ids: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = PosTag::X)]
        unaligned_tag: PosTag,
    },
    /// Compute N1 profiles for tagged files named <iso>.tagged.txt.
    ExtractN1 {
        #[arg(required = true)]
        tagged: Vec<PathBuf>,
        #[arg(long, default_value = "NOUN")]
        arg_tags: TagSet,
        #[arg(long, default_value = "VERB")]
        pred_tags: TagSet,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the word-order classifier on labeled profiles.
    TrainClassifier {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = Feature::Smoothed)]
        feature: Feature,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Predict word order for profiles; with --labels only UNK or unlabeled rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = Feature::Smoothed)]
        feature: Feature,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-tag agreement of a tagged file with a reference tagging.
    ValidateTags {
        reference: PathBuf,
        hypothesis: PathBuf,
        #[arg(long, default_value = "NOUN,VERB")]
        tags: TagSet,
        /// Divide by hypothesis-tagged tokens instead of reference-tagged ones.
        #[arg(long)]
        precision: bool,
    },
    /// Forms shared with the same tag by a gold corpus (or lexicon) and a tagged file.
    GoldOverlap {
        gold: PathBuf,
        hypothesis: PathBuf,
        /// Treat GOLD as a form<TAB>TAG lexicon instead of a tagged verse file.
        #[arg(long)]
        lexicon: bool,
        #[arg(long, default_value = "NOUN,VERB")]
        tags: TagSet,
    },
    /// One-way ANOVA of the N1 feature across word-order labels.
    Anova {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = Feature::Smoothed)]
        feature: Feature,
    },
    /// Verse counts and distinct argument/predicate forms per tagged file.
    Summary {
        #[arg(required = true)]
        tagged: Vec<PathBuf>,
        #[arg(long, default_value = "NOUN,PROPN")]
        arg_tags: TagSet,
        #[arg(long, default_value = "VERB")]
        pred_tags: TagSet,
    },
    /// Run every stage for the languages in the manifest.
    RunPipeline {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the manifest named in the config.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Skip languages whose outputs are newer than their inputs.
        #[arg(long)]
        resume: bool,
    },
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_tagged(path: &Path) -> Result<TaggedCorpus> {
    parse_tagged_file(&read_text(path)?).with_context(|| path.display().to_string())
}

fn iso_from_tagged_path(path: &Path) -> Result<LanguageCode> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name.strip_suffix(".tagged.txt").or_else(|| name.strip_suffix(".txt")).unwrap_or(name);
    stem.parse().with_context(|| format!("{}: file name must start with an ISO code", path.display()))
}

fn load_profiles(path: &Path) -> Result<BTreeMap<LanguageCode, N1Profile>> {
    parse_profile_table(&read_text(path)?).with_context(|| path.display().to_string())
}

fn load_labels(path: &Path) -> Result<BTreeMap<LanguageCode, WordOrderLabel>> {
    parse_label_table(&read_text(path)?).with_context(|| path.display().to_string())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::FilterVerses { lemmas_a, lemmas_b, pivot, lemma_map, min_shared, min_other, output } => {
            let a = parse_lemma_file(&read_text(&lemmas_a)?).with_context(|| lemmas_a.display().to_string())?;
            let b = parse_lemma_file(&read_text(&lemmas_b)?).with_context(|| lemmas_b.display().to_string())?;
            let pivot = load_tagged(&pivot)?;
            let map = match lemma_map {
                Some(p) => LemmaMap::parse(&read_text(&p)?)?,
                None => LemmaMap::identity(),
            };
            let report = select_training_verses(&a, &b, &pivot, &map, min_shared, min_other)?;
            eprintln!(
                "filter: shared_ids={} after_lemma_overlap={} selected={}",
                report.input_count, report.after_lemma_overlap, report.after_verb_support
            );
            emit(output.as_deref(), &format_id_list(&report.selected))
        }
        Command::TrainTokenizer { vocab_size, corpus, model_out } => {
            let c = parse_verse_file(&read_text(&corpus)?).with_context(|| corpus.display().to_string())?;
            let model = train_bpe(&c, vocab_size)?;
            eprintln!("tokenizer: {} merges, vocabulary {}", model.merges().len(), model.vocab_size());
            Ok(write_atomic(&model_out, model.to_text().as_bytes())?)
        }
        Command::Align { ibm1_iters, ibm2_iters, bpe, source, pivot, ids, model_out } => {
            let bpe = BpeModel::parse(&read_text(&bpe)?).with_context(|| bpe.display().to_string())?;
            let src = parse_verse_file(&read_text(&source)?).with_context(|| source.display().to_string())?;
            let piv = load_tagged(&pivot)?;
            let ids = read_id_list(&ids)?;
            let pairs: Vec<_> =
                ids.iter().filter_map(|id| training_pair(&bpe, src.get(id)?, piv.get(id)?)).collect();
            eprintln!("align: {} of {} ids usable", pairs.len(), ids.len());
            let model = aligner::train(&pairs, ibm1_iters, ibm2_iters)?;
            Ok(write_atomic(&model_out, model.to_text().as_bytes())?)
        }
        Command::Project { model, bpe_model, source, pivot, ids, output, unaligned_tag } => {
            let model = AlignmentModel::parse(&read_text(&model)?).with_context(|| model.display().to_string())?;
            let bpe = BpeModel::parse(&read_text(&bpe_model)?).with_context(|| bpe_model.display().to_string())?;
            let src = parse_verse_file(&read_text(&source)?).with_context(|| source.display().to_string())?;
            let piv = load_tagged(&pivot)?;
            let ids = read_id_list(&ids)?;
            let cfg = ProjectionConfig { unaligned_tag, ..ProjectionConfig::default() };
            let (tagged, report) = project_corpus(&model, &src, &bpe, &piv, &ids, &cfg);
            for (id, why) in &report.skipped {
                eprintln!("project: verse {id} skipped: {why:?}");
            }
            eprintln!("project: {} of {} verses projected", report.projected, report.requested);
            Ok(write_atomic(&output, tagged.to_text().as_bytes())?)
        }
        Command::ExtractN1 { tagged, arg_tags, pred_tags, output } => {
            let mut rows = BTreeMap::new();
            for path in &tagged {
                let iso = iso_from_tagged_path(path)?;
                let corpus = load_tagged(path)?.with_language(iso.clone());
                if rows.insert(iso.clone(), n1_profile(&corpus, arg_tags, pred_tags)).is_some() {
                    bail!("language {iso} given twice");
                }
            }
            emit(output.as_deref(), &write_profile_table(&rows))
        }
        Command::TrainClassifier { profiles, labels, feature, output } => {
            let profiles = load_profiles(&profiles)?;
            let labels = load_labels(&labels)?;
            let samples: Vec<_> = profiles
                .iter()
                .filter_map(|(iso, p)| match labels.get(iso) {
                    Some(&l) if l != WordOrderLabel::Unk => Some((feature.value(p)?, l)),
                    _ => None,
                })
                .collect();
            let model = gnb_train(&samples)?;
            eprintln!("classifier: trained on {} languages", samples.len());
            Ok(write_atomic(&output, model.to_text().as_bytes())?)
        }
        Command::Predict { model, profiles, labels, feature, output } => {
            let model = GnbModel::parse(&read_text(&model)?).with_context(|| model.display().to_string())?;
            let profiles = load_profiles(&profiles)?;
            let labels = labels.as_deref().map(load_labels).transpose()?;
            let mut predictions = BTreeMap::new();
            for (iso, p) in &profiles {
                if let Some(labels) = &labels {
                    if !matches!(labels.get(iso), None | Some(WordOrderLabel::Unk)) {
                        continue;
                    }
                }
                let Some(value) = feature.value(p) else {
                    eprintln!("predict: {iso}: feature {feature} undefined, skipped");
                    continue;
                };
                let pred = gnb_predict(&model, value);
                predictions.insert(iso.clone(), Prediction { label: pred.label, value, posteriors: pred.posteriors });
            }
            let classes: Vec<_> = model.classes.iter().map(|c| c.label).collect();
            emit(output.as_deref(), &predictions_tsv(&predictions, feature, &classes))
        }
        Command::ValidateTags { reference, hypothesis, tags, precision } => {
            let direction = if precision { AgreementDirection::Precision } else { AgreementDirection::Recall };
            let report = tag_agreement(&load_tagged(&reference)?, &load_tagged(&hypothesis)?, tags, direction)?;
            emit(None, &report.to_tsv())
        }
        Command::GoldOverlap { gold, hypothesis, lexicon, tags } => {
            let gold_set = if lexicon {
                parse_lexicon(&read_text(&gold)?).with_context(|| gold.display().to_string())?
            } else {
                form_tags(&load_tagged(&gold)?)
            };
            let hyp = form_tags(&load_tagged(&hypothesis)?);
            emit(None, &gold_overlap(&gold_set, &hyp, tags).to_tsv())
        }
        Command::Anova { profiles, labels, feature } => {
            let groups = groups_by_label(&load_profiles(&profiles)?, &load_labels(&labels)?, feature);
            let result = anova_oneway(&groups)?;
            emit(None, &result.to_tsv(feature))
        }
        Command::Summary { tagged, arg_tags, pred_tags } => {
            let mut out = format!(
                "# corpus summary: arguments={arg_tags} predicates={pred_tags}\n#iso\tverses\tunique_arguments\tunique_predicates\n"
            );
            let mut rows = BTreeMap::new();
            for path in &tagged {
                rows.insert(iso_from_tagged_path(path)?, summary_stats(&load_tagged(path)?, arg_tags, pred_tags));
            }
            for (iso, s) in &rows {
                out.push_str(&format!("{iso}\t{}\t{}\t{}\n", s.verse_count, s.unique_arguments, s.unique_predicates));
            }
            if !rows.is_empty() {
                let n = rows.len() as f64;
                let mean = |f: fn(&crate::corpus::CorpusStats) -> usize| rows.values().map(f).sum::<usize>() as f64 / n;
                out.push_str(&format!(
                    "mean\t{}\t{}\t{}\n",
                    mean(|s| s.verse_count),
                    mean(|s| s.unique_arguments),
                    mean(|s| s.unique_predicates)
                ));
            }
            emit(None, &out)
        }
        Command::RunPipeline { config, manifest, jobs, resume } => {
            let cfg = PipelineConfig::load(&config)?;
            let languages = match manifest.as_deref().or(cfg.manifest.as_deref()) {
                Some(p) => parse_manifest(&read_text(p)?).with_context(|| p.display().to_string())?,
                None => Vec::new(),
            };
            let summary = run_pipeline(&cfg, &languages, RunOptions { jobs: jobs as usize, resume })?;
            let failed = summary.failures();
            eprintln!(
                "pipeline: {} languages, {} failed, {} predictions; outputs in {}",
                summary.languages.len(),
                failed,
                summary.predictions.len(),
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .try_init();
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["typoline", "frobnicate"]), 2);
        assert_eq!(run(["typoline", "anova", "--profiles", "p.tsv"]), 2);
        assert_eq!(run(["typoline", "run-pipeline", "--config", "c", "--jobs", "0"]), 2);
        assert_eq!(run(["typoline", "extract-n1", "--arg-tags", "NOUNS", "x.tagged.txt"]), 2);
    }

    #[test]
    fn iso_from_file_names() {
        assert_eq!(iso_from_tagged_path(Path::new("/x/abc.tagged.txt")).unwrap().as_str(), "abc");
        assert_eq!(iso_from_tagged_path(Path::new("def.txt")).unwrap().as_str(), "def");
        assert!(iso_from_tagged_path(Path::new("english.tagged.txt")).is_err());
    }
}
