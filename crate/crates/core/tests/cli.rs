use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use typoline::synthetic::{generate, BasicOrder, FixtureConfig, LanguageSpec};

fn typoline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typoline"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = typoline(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(dir: &Path, languages: Vec<LanguageSpec>) -> PathBuf {
    generate(&FixtureConfig { verses: 200, seed: 3, languages }).write_to(dir).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = typoline(dir.path(), &["transmogrify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(typoline(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(typoline(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_with_one_and_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = typoline(dir.path(), &["train-tokenizer", "missing.txt", "model.bpe"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("missing.txt"));

    fs::write(dir.path().join("bad.txt"), "40001001\tfine\nnot-an-id\tword\n").unwrap();
    let out = typoline(dir.path(), &["train-tokenizer", "bad.txt", "model.bpe"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
    assert!(!dir.path().join("model.bpe").exists());
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, vec![LanguageSpec::new("sov", BasicOrder::Sov, true), LanguageSpec::new("vso", BasicOrder::Vso, true)]);

    let ids = ok(d, &["filter-verses", "--lemmas-a", "lemmas_a.txt", "--lemmas-b", "lemmas_b.txt", "--pivot", "pivot.tagged.txt"]);
    assert!(ids.lines().count() > 150, "{} ids", ids.lines().count());
    fs::write(d.join("ids.txt"), &ids).unwrap();

    for iso in ["sov", "vso"] {
        let corpus = format!("corpus/{iso}.txt");
        let (bpe, model, tagged) = (format!("{iso}.bpe"), format!("{iso}.ibm2"), format!("{iso}.tagged.txt"));
        ok(d, &["train-tokenizer", "--vocab-size", "500", &corpus, &bpe]);
        assert!(fs::read_to_string(d.join(&bpe)).unwrap().starts_with("BPE v1 marker=\u{2581}\n"));
        ok(d, &["align", "--bpe", &bpe, &corpus, "pivot.tagged.txt", "ids.txt", &model]);
        let model_text = fs::read_to_string(d.join(&model)).unwrap();
        assert!(model_text.starts_with("T\n") && model_text.contains("\nQ\n"));
        ok(d, &["project", &model, &bpe, &corpus, "pivot.tagged.txt", "--ids", "ids.txt", "-o", &tagged]);
        assert_eq!(fs::read_to_string(d.join(&tagged)).unwrap().lines().count(), ids.lines().count());

        let agreement = ok(d, &["validate-tags", &format!("gold/{iso}.tagged.txt"), &tagged]);
        assert!(agreement.starts_with("# tag agreement direction=recall"));
        let noun_rate: f64 = agreement.lines().find(|l| l.starts_with("NOUN\t")).unwrap().split('\t').nth(3).unwrap().parse().unwrap();
        assert!(noun_rate > 0.9, "{agreement}");
        let precision = ok(d, &["validate-tags", "--precision", &format!("gold/{iso}.tagged.txt"), &tagged]);
        assert!(precision.starts_with("# tag agreement direction=precision"));

        let overlap = ok(d, &["gold-overlap", &format!("gold/{iso}.tagged.txt"), &tagged]);
        assert!(overlap.lines().any(|l| l.starts_with("VERB\t")));
    }

    ok(d, &["extract-n1", "sov.tagged.txt", "vso.tagged.txt", "-o", "n1.tsv"]);
    let n1 = fs::read_to_string(d.join("n1.tsv")).unwrap();
    let smoothed = |iso: &str| -> f64 {
        n1.lines().find(|l| l.starts_with(iso)).unwrap().split('\t').nth(5).unwrap().parse().unwrap()
    };
    assert!(smoothed("sov") > 1.0 && smoothed("vso") < 1.0, "{n1}");

    fs::write(d.join("labels.tsv"), "sov\tSV\nvso\tVS\n").unwrap();
    ok(d, &["train-classifier", "--profiles", "n1.tsv", "--labels", "labels.tsv", "-o", "gnb.tsv"]);
    assert!(fs::read_to_string(d.join("gnb.tsv")).unwrap().starts_with("GNB v1 epsilon="));
    let predictions = ok(d, &["predict", "--model", "gnb.tsv", "--profiles", "n1.tsv"]);
    assert!(predictions.contains("\nsov\tSV\t") && predictions.contains("\nvso\tVS\t"), "{predictions}");

    let summary = ok(d, &["summary", "sov.tagged.txt", "vso.tagged.txt"]);
    assert!(summary.lines().any(|l| l.starts_with("mean\t")));
}

#[test]
fn anova_reads_profiles_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // smoothed ratios (nf+1)/(vf+1): SV 1, 2, 3 and VS 0.5, 1, 1.5
    fs::write(
        d.join("p.tsv"),
        "aaa\t0\t0\t0\tNA\t1\naab\t1\t0\t1\tNA\t2\naac\t2\t0\t2\tNA\t3\n\
         baa\t0\t1\t1\t0\t0.5\nbab\t1\t1\t2\t1\t1\nbac\t2\t1\t3\t2\t1.5\ncaa\t5\t5\t10\t1\t1\n",
    )
    .unwrap();
    fs::write(d.join("l.tsv"), "aaa\tSV\naab\tSV\naac\tSV\nbaa\tVS\nbab\tVS\nbac\tVS\ncaa\tUNK\n").unwrap();
    let out = ok(d, &["anova", "--profiles", "p.tsv", "--labels", "l.tsv"]);
    // means 2 and 1; SSB = 1.5, SSW = 2.5, F = 1.5 / (2.5 / 4) = 2.4
    let value = |key: &str| out.lines().find(|l| l.starts_with(&format!("{key}\t"))).unwrap().split('\t').nth(1).unwrap().to_string();
    assert!((value("f_stat").parse::<f64>().unwrap() - 2.4).abs() < 1e-12, "{out}");
    assert_eq!(value("df_between"), "1");
    assert_eq!(value("df_within"), "4");
    assert!(out.contains("diff\tSV\tVS\t1\n"), "{out}");
}

#[test]
fn run_pipeline_with_no_languages_is_a_clean_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), vec![]);
    ok(dir.path(), &["run-pipeline", "--config", cfg.to_str().unwrap()]);
    let summary = fs::read_to_string(dir.path().join("out/summary.tsv")).unwrap();
    assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 0);
}

#[test]
fn run_pipeline_isolates_failing_languages_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = fixture(d, vec![LanguageSpec::new("aaa", BasicOrder::Svo, true), LanguageSpec::new("bbb", BasicOrder::Vos, true)]);
    fs::write(d.join("manifest.txt"), "aaa\nbbb\nzzz\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    ok(d, &["run-pipeline", "--config", cfg, "--jobs", "2"]);
    let summary = fs::read_to_string(d.join("out/summary.tsv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("aaa\tok")));
    assert!(summary.lines().any(|l| l.starts_with("bbb\tok")));
    assert!(summary.lines().any(|l| l.starts_with("zzz\tfailed") && l.contains("zzz.txt")), "{summary}");
    let tagged_a = fs::read(d.join("out/aaa.tagged.txt")).unwrap();

    // the failing language leaves the others exactly as a run without it
    fs::write(d.join("solo.txt"), "aaa\n").unwrap();
    let solo_cfg = fs::read_to_string(cfg).unwrap().replace("output_dir = out", "output_dir = solo");
    fs::write(d.join("solo.cfg"), solo_cfg).unwrap();
    ok(d, &["run-pipeline", "--config", "solo.cfg", "--manifest", "solo.txt"]);
    assert_eq!(fs::read(d.join("solo/aaa.tagged.txt")).unwrap(), tagged_a);

    let before = fs::metadata(d.join("out/aaa.ibm2")).unwrap().modified().unwrap();
    ok(d, &["run-pipeline", "--config", cfg, "--resume"]);
    assert_eq!(fs::metadata(d.join("out/aaa.ibm2")).unwrap().modified().unwrap(), before);
    assert_eq!(fs::read_to_string(d.join("out/summary.tsv")).unwrap(), summary);
}
