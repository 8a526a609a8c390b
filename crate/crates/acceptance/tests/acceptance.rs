//! Acceptance checks. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typoline::aligner::{train_ibm1, EmTrainer, SentencePair};
use typoline::corpus::{parse_tagged_file, RawCorpus, RawVerse, TagSet, PosTag, VerseId};
use typoline::filter::{parse_lemma_file, select_training_verses, LemmaMap};
use typoline::pipeline::{run_pipeline, PipelineConfig, RunOptions};
use typoline::subword::{decode, train_bpe};
use typoline::synthetic::{generate, BasicOrder, FixtureConfig, LanguageSpec};
use typoline::typology::{gnb_predict, gnb_train, n1_profile, WordOrderLabel};
use typoline::validate::{anova_oneway, f_survival};
use typoline_acceptance::{gnb_reference_label, read_tree};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn vid(k: usize) -> VerseId {
    format!("01{:06}", k + 1).parse().unwrap()
}

// 1. EM monotonicity and normalization on a 50-pair toy corpus.
fn em_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vocab: Vec<String> = (0..10).map(|k| format!("w{k}")).collect();
    let pairs: Vec<SentencePair> = (0..50)
        .map(|_| {
            let len = rng.gen_range(2..=6);
            let words: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab.len())).collect();
            let target: Vec<String> = words.iter().map(|&w| vocab[w].clone()).collect();
            let mut source: Vec<String> = words.iter().map(|&w| format!("s{w}")).collect();
            source.shuffle(&mut rng);
            SentencePair::new(source, target).unwrap()
        })
        .collect();

    let mut trainer = EmTrainer::new(&pairs).unwrap();
    let mut prev = trainer.log_likelihood();
    let mut worst_drop = 0.0f64;
    let mut worst_t = 0.0f64;
    let mut worst_q = 0.0f64;
    for _ in 0..10 {
        trainer.ibm1_step();
        let ll = trainer.log_likelihood();
        worst_drop = worst_drop.max(prev - ll);
        prev = ll;
        let t = trainer.t_table();
        for e in t.targets() {
            worst_t = worst_t.max((t.mass(e) - 1.0).abs());
        }
    }
    for _ in 0..10 {
        trainer.ibm2_step();
        let model = trainer.model();
        for e in model.t.targets() {
            worst_t = worst_t.max((model.t.mass(e) - 1.0).abs());
        }
        for (l, m) in model.q.shapes() {
            for j in 1..=m {
                let s: f64 = (0..=l).map(|i| model.q.get(i, j, l, m).unwrap()).sum();
                worst_q = worst_q.max((s - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_drop <= 1e-9 && worst_t <= 1e-6 && worst_q <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max LL drop {worst_drop:.3e}, max |sum t - 1| {worst_t:.3e}, max |sum q - 1| {worst_q:.3e}, {elapsed:.2?}"),
    )
}

// 2. Toy convergence of t(b|b) after 20 Model 1 iterations.
fn toy_convergence() -> Outcome {
    let mut pairs = Vec::new();
    for _ in 0..25 {
        pairs.push(SentencePair::new(vec!["a"], vec!["a"]).unwrap());
        pairs.push(SentencePair::new(vec!["a", "b"], vec!["a", "b"]).unwrap());
    }
    let t = train_ibm1(&pairs, 20).unwrap().t;
    let tbb = t.get("b", "b").unwrap_or(0.0);
    outcome(tbb >= 1.0 - 1e-6, format!("t(b|b) = {tbb:.16} (threshold {})", 1.0 - 1e-6))
}

// 3. Synthetic end-to-end run, then classification of held-out languages.
fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate(&FixtureConfig {
        verses: 200,
        seed: 2024,
        languages: vec![LanguageSpec::new("svo", BasicOrder::Svo, true), LanguageSpec::new("vos", BasicOrder::Vos, true)],
    });
    let cfg_path = fixture.write_to(dir.path()).unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    let isos: Vec<_> = fixture.languages.iter().map(|l| l.spec.iso.clone()).collect();
    let summary = run_pipeline(&cfg, &isos, RunOptions { jobs: 2, resume: false }).unwrap();

    let (mut content, mut correct) = (0usize, 0usize);
    for lang in &fixture.languages {
        let path = cfg.output_dir.join(format!("{}.tagged.txt", lang.spec.iso));
        let tagged = parse_tagged_file(&std::fs::read_to_string(path).unwrap()).unwrap();
        for v in tagged.verses() {
            let gold = lang.gold.get(&v.id).unwrap();
            for (g, h) in gold.entries().iter().zip(v.entries()) {
                assert_eq!(g.form, h.form);
                if g.tag.is_open_class() {
                    content += 1;
                    correct += usize::from(g.tag == h.tag);
                }
            }
        }
    }
    let accuracy = correct as f64 / content.max(1) as f64;
    let n1 = |iso: &str| summary.languages[&iso.parse().unwrap()].as_ref().unwrap().profile.smoothed_ratio;
    let (svo, vos) = (n1("svo"), n1("vos"));

    // 20 labeled languages and 6 held out as UNK
    let mut specs = Vec::new();
    let letters: Vec<char> = ('a'..='z').collect();
    for k in 0..26 {
        let order = BasicOrder::ALL[k % 4];
        specs.push(LanguageSpec::new(&format!("l{}{}", letters[k / 26 + 1], letters[k]), order, k < 20));
    }
    let dir2 = tempfile::tempdir().unwrap();
    let fixture2 = generate(&FixtureConfig { verses: 200, seed: 77, languages: specs.clone() });
    let cfg2 = PipelineConfig::load(&fixture2.write_to(dir2.path()).unwrap()).unwrap();
    let isos2: Vec<_> = specs.iter().map(|s| s.iso.clone()).collect();
    let summary2 = run_pipeline(&cfg2, &isos2, RunOptions { jobs: 4, resume: false }).unwrap();
    let held_out: Vec<&LanguageSpec> = specs.iter().filter(|s| !s.labeled).collect();
    let hits = held_out
        .iter()
        .filter(|s| summary2.predictions.get(&s.iso).map(|p| p.label) == Some(s.order.label()))
        .count();
    let elapsed = start.elapsed();

    outcome(
        accuracy >= 0.95 && svo > 1.0 && vos < 1.0 && hits == held_out.len() && elapsed < Duration::from_secs(60),
        format!(
            "content-word accuracy {accuracy:.4} ({correct}/{content}), N1 SVO {svo:.3}, N1 VOS {vos:.3}, held-out {hits}/{}, {elapsed:.2?}",
            held_out.len()
        ),
    )
}

// 4. ANOVA and F survival against closed forms.
fn anova_oracle() -> Outcome {
    let groups: BTreeMap<String, Vec<f64>> = [("g1", [1.0, 2.0, 3.0]), ("g2", [2.0, 3.0, 4.0]), ("g3", [3.0, 4.0, 5.0])]
        .into_iter()
        .map(|(l, xs)| (l.to_string(), xs.to_vec()))
        .collect();
    let r = anova_oneway(&groups).unwrap();
    let mut worst = 0.0f64;
    for f in [0.1, 1.0, 3.0, 10.0] {
        for d2 in [2usize, 6, 30] {
            let closed = (1.0 + f * 2.0 / d2 as f64).powf(-(d2 as f64) / 2.0);
            worst = worst.max((f_survival(f, 2, d2) - closed).abs());
        }
    }
    outcome(
        (r.f_stat - 3.0).abs() <= 1e-9 && (r.p_value - 0.125).abs() <= 1e-6 && worst <= 1e-8,
        format!("F = {}, p = {}, max closed-form deviation {worst:.3e}", r.f_stat, r.p_value),
    )
}

// 5. BPE round trip and training determinism.
fn bpe_round_trip() -> Outcome {
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyzåäöø".chars().collect();
    assert_eq!(alphabet.len(), 30);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut corpus = RawCorpus::new();
    for k in 0..1000 {
        let words: Vec<String> = (0..rng.gen_range(1..=12))
            .map(|_| (0..rng.gen_range(1..=8)).map(|_| *alphabet.choose(&mut rng).unwrap()).collect())
            .collect();
        corpus.insert(RawVerse::new(vid(k), words).unwrap()).unwrap();
    }
    let model = train_bpe(&corpus, 800).unwrap();
    let failures = corpus
        .verses()
        .filter(|v| decode(&model.encode(v)).ok().as_deref() != Some(v.tokens()))
        .count();
    let again = train_bpe(&corpus, 800).unwrap();
    let identical = model.to_text() == again.to_text();
    outcome(
        failures == 0 && identical,
        format!("{failures} of 1000 verses failed round trip, {} merges, byte-identical retrain: {identical}", model.merges().len()),
    )
}

// 6. N1 counts on a hand-built corpus.
fn n1_procedure() -> Outcome {
    let text = "\
01000001\tdog/NOUN barks/VERB ./PUNCT
01000002\truns/VERB dog/NOUN
01000003\tthe/DET big/ADJ dog/NOUN sees/VERB cat/NOUN
01000004\tsleeps/VERB
01000005\tcat/NOUN and/CCONJ dog/NOUN
01000006\tnow/ADV eats/VERB the/DET man/NOUN
01000007\the/PRON walks/VERB
01000008\tJohn/PROPN loves/VERB Mary/PROPN
01000009\tbread/NOUN ,/PUNCT water/NOUN ,/PUNCT gives/VERB
01000010\tcomes/VERB ,/PUNCT goes/VERB ,/PUNCT stays/VERB king/NOUN
";
    // NounFirst: 1, 3, 9. VerbFirst: 2, 6, 10. Neither: 4, 5, 7, 8 (PRON and PROPN are not arguments by default).
    let corpus = parse_tagged_file(text).unwrap();
    let p = n1_profile(&corpus, TagSet::from([PosTag::Noun]), TagSet::from([PosTag::Verb]));
    let pass = p.noun_first == 3 && p.verb_first == 3 && p.considered == 6 && p.neither == 4 && p.raw_ratio == Some(1.0);
    outcome(pass, format!("noun_first {}, verb_first {}, neither {} (expected 3, 3, 4)", p.noun_first, p.verb_first, p.neither))
}

// 7. Classifier against a brute-force density argmax.
fn gnb_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut train: Vec<(f64, WordOrderLabel)> = Vec::new();
    for _ in 0..15 {
        train.push((rng.gen_range(2.0..8.0), WordOrderLabel::Sv));
        train.push((rng.gen_range(0.05..0.8), WordOrderLabel::Vs));
    }
    // a constant class exercises the variance floor
    train.extend([(1.25, WordOrderLabel::Free); 4]);
    let model = gnb_train(&train).unwrap();
    let as_text = |data: &[(f64, WordOrderLabel)]| -> Vec<(f64, &'static str)> { data.iter().map(|&(x, l)| (x, l.as_str())).collect() };
    let reference = as_text(&train);
    let mut agree = 0;
    for _ in 0..100 {
        let x = rng.gen_range(-1.0..10.0);
        agree += usize::from(gnb_predict(&model, x).label.as_str() == gnb_reference_label(&reference, x));
    }
    // symmetric classes: the midpoint ties and goes to the first label
    let sym = [(1.0, WordOrderLabel::Vs), (3.0, WordOrderLabel::Vs), (5.0, WordOrderLabel::Sv), (7.0, WordOrderLabel::Sv)];
    let expected = gnb_reference_label(&as_text(&sym), 4.0);
    let tie_ok = gnb_predict(&gnb_train(&sym).unwrap(), 4.0).label.as_str() == expected && expected == "SV";
    outcome(agree == 100 && tie_ok, format!("{agree}/100 random points agree, tie case resolved to SV: {tie_ok}"))
}

// 8. Filter threshold boundaries.
fn filter_boundaries() -> Outcome {
    // verse 1: exactly 4 shared lemmas; verse 2: 3 shared.
    // "go" is the verb of six verses (1, 3..7), "run" of five (8..12).
    let mut a = String::from("01000001\tthe man go home\n01000002\tthe man run far\n");
    let mut b = String::from("01000001\tthe man go home x\n01000002\tthe man run y\n");
    let mut pivot = String::from("01000001\tman/NOUN go/VERB home/NOUN\n01000002\tman/NOUN run/VERB\n");
    for (k, verb) in (3..=12).map(|k| (k, if k <= 7 { "go" } else { "run" })) {
        a.push_str(&format!("{:08}\tthe woman {verb} there\n", 1000000 + k));
        b.push_str(&format!("{:08}\tthe woman {verb} there\n", 1000000 + k));
        pivot.push_str(&format!("{:08}\twoman/NOUN {verb}/VERB there/ADV\n", 1000000 + k));
    }
    let report = select_training_verses(
        &parse_lemma_file(&a).unwrap(),
        &parse_lemma_file(&b).unwrap(),
        &parse_tagged_file(&pivot).unwrap(),
        &LemmaMap::identity(),
        4,
        5,
    )
    .unwrap();
    let selected: Vec<String> = report.selected.iter().map(|id| id.to_string()).collect();
    let expected: Vec<String> = [1, 3, 4, 5, 6, 7].iter().map(|k| format!("{:08}", 1000000 + k)).collect();
    let four_shared_kept = selected.contains(&"01000001".to_string());
    let three_shared_dropped = report.after_lemma_overlap == 11;
    outcome(
        selected == expected && four_shared_kept && three_shared_dropped,
        format!(
            "after overlap {} (expected 11), selected {:?}",
            report.after_lemma_overlap,
            selected.iter().map(|s| &s[5..]).collect::<Vec<_>>()
        ),
    )
}

// 9. Two parallel runs through the command-line entry point give
// byte-identical outputs.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let specs = vec![
        LanguageSpec::new("aaa", BasicOrder::Svo, true),
        LanguageSpec::new("bbb", BasicOrder::Vso, true),
        LanguageSpec::new("ccc", BasicOrder::Sov, true),
        LanguageSpec::new("ddd", BasicOrder::Vos, true),
        LanguageSpec::new("eee", BasicOrder::Svo, false),
        LanguageSpec::new("fff", BasicOrder::Vso, false),
    ];
    let cfg = generate(&FixtureConfig { verses: 200, seed: 9, languages: specs }).write_to(dir.path()).unwrap();
    let base = std::fs::read_to_string(&cfg).unwrap();
    let mut trees = Vec::new();
    for run in ["run1", "run2"] {
        let cfg_run = dir.path().join(format!("{run}.cfg"));
        std::fs::write(&cfg_run, base.replace("output_dir = out", &format!("output_dir = {run}"))).unwrap();
        let code = typoline::cli::run(["typoline", "run-pipeline", "--config", cfg_run.to_str().unwrap(), "--jobs", "4"]);
        assert_eq!(code, 0);
        trees.push(read_tree(&dir.path().join(run)));
    }
    let same = trees[0] == trees[1];
    outcome(same && !trees[0].is_empty(), format!("{} files per run, identical: {same}", trees[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("EM correctness", em_correctness),
        ("toy convergence", toy_convergence),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("ANOVA oracle", anova_oracle),
        ("BPE round trip", bpe_round_trip),
        ("N1 procedure", n1_procedure),
        ("GNB oracle", gnb_oracle),
        ("verse filter thresholds", filter_boundaries),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} ({})", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
