//! Artificial parallel corpora with known tags and word order.
//!
//! Every verse is one transitive clause drawn from a 60-concept gloss table.
//! The pivot renders it as tagged English (SVO with articles); each
//! artificial language renders it with its own lexicon, adjective placement,
//! optional object suffix and a dominant constituent order that is used for
//! most verses. Useful for end-to-end tests and demos.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LanguageCode, PosTag, RawCorpus, RawVerse, TaggedCorpus, TaggedToken, TaggedVerse, VerseId};
use crate::io::{write_atomic, IoError};
use crate::typology::WordOrderLabel;

pub const GLOSSES: [(&str, PosTag); 60] = {
    use PosTag::*;
    [
        ("man", Noun), ("woman", Noun), ("child", Noun), ("dog", Noun), ("horse", Noun), ("king", Noun),
        ("city", Noun), ("house", Noun), ("river", Noun), ("bread", Noun), ("water", Noun), ("stone", Noun),
        ("tree", Noun), ("bird", Noun), ("fish", Noun), ("fire", Noun), ("road", Noun), ("door", Noun),
        ("field", Noun), ("ship", Noun), ("sheep", Noun), ("servant", Noun), ("prophet", Noun), ("mountain", Noun),
        ("see", Verb), ("take", Verb), ("give", Verb), ("find", Verb), ("love", Verb), ("hear", Verb),
        ("bring", Verb), ("follow", Verb), ("build", Verb), ("carry", Verb), ("call", Verb), ("eat", Verb),
        ("help", Verb), ("keep", Verb), ("know", Verb), ("send", Verb), ("teach", Verb), ("open", Verb),
        ("good", Adj), ("old", Adj), ("great", Adj), ("small", Adj), ("new", Adj), ("holy", Adj),
        ("strong", Adj), ("dark", Adj), ("white", Adj), ("wise", Adj), ("poor", Adj), ("young", Adj),
        ("now", Adv), ("again", Adv), ("there", Adv), ("quickly", Adv), ("never", Adv), ("always", Adv),
    ]
};

fn concepts_with(tag: PosTag) -> Vec<usize> {
    (0..GLOSSES.len()).filter(|&k| GLOSSES[k].1 == tag).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasicOrder {
    Svo,
    Sov,
    Vso,
    Vos,
}

impl BasicOrder {
    pub const ALL: [BasicOrder; 4] = [BasicOrder::Svo, BasicOrder::Sov, BasicOrder::Vso, BasicOrder::Vos];

    pub fn label(self) -> WordOrderLabel {
        match self {
            BasicOrder::Svo | BasicOrder::Sov => WordOrderLabel::Sv,
            BasicOrder::Vso | BasicOrder::Vos => WordOrderLabel::Vs,
        }
    }

    // 0 = subject, 1 = verb, 2 = object
    fn slots(self) -> [usize; 3] {
        match self {
            BasicOrder::Svo => [0, 1, 2],
            BasicOrder::Sov => [0, 2, 1],
            BasicOrder::Vso => [1, 0, 2],
            BasicOrder::Vos => [1, 2, 0],
        }
    }
}

#[derive(Clone, Debug)]
struct Clause {
    subject: usize,
    subject_adj: Option<usize>,
    verb: usize,
    object: usize,
    object_adj: Option<usize>,
    adverb: Option<usize>,
    /// Second lemma file paraphrases this verse too loosely to pass the
    /// lemma-overlap filter.
    loose_paraphrase: bool,
}

#[derive(Clone, Debug)]
pub struct LanguageSpec {
    pub iso: LanguageCode,
    pub order: BasicOrder,
    /// Written to the label file as the order's SV/VS label; otherwise UNK.
    pub labeled: bool,
}

impl LanguageSpec {
    pub fn new(iso: &str, order: BasicOrder, labeled: bool) -> Self {
        LanguageSpec { iso: iso.parse().expect("valid ISO code"), order, labeled }
    }
}

#[derive(Clone, Debug)]
pub struct FixtureConfig {
    pub verses: usize,
    pub seed: u64,
    pub languages: Vec<LanguageSpec>,
}

#[derive(Clone, Debug)]
pub struct SyntheticLanguage {
    pub spec: LanguageSpec,
    pub source: RawCorpus,
    /// The source text with each word's gloss-table tag.
    pub gold: TaggedCorpus,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub pivot: TaggedCorpus,
    pub lemmas_a: String,
    pub lemmas_b: String,
    pub languages: Vec<SyntheticLanguage>,
}

pub fn verse_id(k: usize) -> VerseId {
    format!("40{:03}{:03}", k / 25 + 1, k % 25 + 1).parse().expect("generated id is valid")
}

fn draw_clauses(n: usize, rng: &mut ChaCha8Rng) -> Vec<Clause> {
    let nouns = concepts_with(PosTag::Noun);
    let verbs = concepts_with(PosTag::Verb);
    let adjs = concepts_with(PosTag::Adj);
    let advs = concepts_with(PosTag::Adv);
    (0..n)
        .map(|_| {
            let subject = *nouns.choose(rng).unwrap();
            let object = loop {
                let o = *nouns.choose(rng).unwrap();
                if o != subject {
                    break o;
                }
            };
            Clause {
                subject,
                subject_adj: rng.gen_bool(0.3).then(|| *adjs.choose(rng).unwrap()),
                verb: *verbs.choose(rng).unwrap(),
                object,
                object_adj: rng.gen_bool(0.3).then(|| *adjs.choose(rng).unwrap()),
                adverb: rng.gen_bool(0.3).then(|| *advs.choose(rng).unwrap()),
                loose_paraphrase: rng.gen_bool(0.08),
            }
        })
        .collect()
}

fn pivot_verse(id: VerseId, c: &Clause) -> TaggedVerse {
    let mut entries = Vec::new();
    let np = |entries: &mut Vec<TaggedToken>, adj: Option<usize>, noun: usize| {
        entries.push(TaggedToken::new("the", PosTag::Det));
        if let Some(a) = adj {
            entries.push(TaggedToken::new(GLOSSES[a].0, PosTag::Adj));
        }
        entries.push(TaggedToken::new(GLOSSES[noun].0, PosTag::Noun));
    };
    np(&mut entries, c.subject_adj, c.subject);
    entries.push(TaggedToken::new(GLOSSES[c.verb].0, PosTag::Verb));
    np(&mut entries, c.object_adj, c.object);
    if let Some(a) = c.adverb {
        entries.push(TaggedToken::new(GLOSSES[a].0, PosTag::Adv));
    }
    entries.push(TaggedToken::new(".", PosTag::Punct));
    TaggedVerse::new(id, entries).expect("non-empty verse")
}

fn lemma_lines(clauses: &[Clause], second: bool) -> String {
    let mut out = String::new();
    for (k, c) in clauses.iter().enumerate() {
        let mut lemmas: Vec<&str> = vec!["the", GLOSSES[c.subject].0, GLOSSES[c.verb].0, GLOSSES[c.object].0];
        lemmas.extend(c.subject_adj.iter().chain(&c.object_adj).chain(&c.adverb).map(|&a| GLOSSES[a].0));
        if second && c.loose_paraphrase {
            lemmas = vec![GLOSSES[c.verb].0, "lord", "say", "unto"];
        }
        let _ = writeln!(out, "{}\t{}", verse_id(k), lemmas.join(" "));
    }
    out
}

struct Grammar {
    lexicon: Vec<String>,
    adjective_after_noun: bool,
    object_suffix: Option<String>,
    dominance: f64,
}

fn syllable(consonants: &[char], vowels: &[char], rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    s.push(*consonants.choose(rng).unwrap());
    s.push(*vowels.choose(rng).unwrap());
    s
}

fn draw_grammar(rng: &mut ChaCha8Rng) -> Grammar {
    let mut consonants: Vec<char> = "ptkbdgmnslrwyhfvz".chars().collect();
    consonants.shuffle(rng);
    consonants.truncate(rng.gen_range(8..=12));
    let mut vowels: Vec<char> = "aeiou".chars().collect();
    vowels.shuffle(rng);
    vowels.truncate(rng.gen_range(3..=5));

    let mut lexicon: Vec<String> = Vec::with_capacity(GLOSSES.len());
    while lexicon.len() < GLOSSES.len() {
        let syllables = rng.gen_range(2..=3);
        let word: String = (0..syllables).map(|_| syllable(&consonants, &vowels, rng)).collect();
        if !lexicon.contains(&word) {
            lexicon.push(word);
        }
    }
    Grammar {
        lexicon,
        adjective_after_noun: rng.gen_bool(0.5),
        object_suffix: rng.gen_bool(0.5).then(|| syllable(&consonants, &vowels, rng)),
        dominance: rng.gen_range(0.75..0.9),
    }
}

fn render(grammar: &Grammar, order: BasicOrder, c: &Clause) -> Vec<(String, PosTag)> {
    let word = |k: usize| (grammar.lexicon[k].clone(), GLOSSES[k].1);
    let np = |adj: Option<usize>, noun: usize, is_object: bool| {
        let mut head = word(noun);
        if is_object {
            if let Some(suffix) = &grammar.object_suffix {
                head.0.push_str(suffix);
            }
        }
        let mut out = Vec::new();
        if let (Some(a), false) = (adj, grammar.adjective_after_noun) {
            out.push(word(a));
        }
        out.push(head);
        if let (Some(a), true) = (adj, grammar.adjective_after_noun) {
            out.push(word(a));
        }
        out
    };
    let constituents = [np(c.subject_adj, c.subject, false), vec![word(c.verb)], np(c.object_adj, c.object, true)];
    let mut out: Vec<(String, PosTag)> = order.slots().iter().flat_map(|&s| constituents[s].clone()).collect();
    if let Some(a) = c.adverb {
        out.push(word(a));
    }
    out.push((".".to_string(), PosTag::Punct));
    out
}

fn language_seed(seed: u64, iso: &LanguageCode) -> u64 {
    iso.as_str().bytes().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| h.rotate_left(8) ^ u64::from(b).wrapping_mul(0x100_0000_01b3))
}

fn generate_language(spec: &LanguageSpec, clauses: &[Clause], seed: u64) -> SyntheticLanguage {
    let mut rng = ChaCha8Rng::seed_from_u64(language_seed(seed, &spec.iso));
    let grammar = draw_grammar(&mut rng);
    let mut source = RawCorpus::new().with_language(spec.iso.clone());
    let mut gold = TaggedCorpus::new().with_language(spec.iso.clone());
    for (k, c) in clauses.iter().enumerate() {
        let order = if rng.gen_bool(grammar.dominance) {
            spec.order
        } else {
            let others: Vec<BasicOrder> = BasicOrder::ALL.into_iter().filter(|o| *o != spec.order).collect();
            *others.choose(&mut rng).unwrap()
        };
        let words = render(&grammar, order, c);
        let id = verse_id(k);
        let tokens = words.iter().map(|w| w.0.clone()).collect();
        source.insert(RawVerse::new(id.clone(), tokens).expect("valid tokens")).expect("unique id");
        let entries = words.into_iter().map(|(f, t)| TaggedToken::new(f, t)).collect();
        gold.insert(TaggedVerse::new(id, entries).expect("valid verse")).expect("unique id");
    }
    SyntheticLanguage { spec: spec.clone(), source, gold }
}

pub fn generate(config: &FixtureConfig) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clauses = draw_clauses(config.verses, &mut rng);
    let pivot = TaggedCorpus::from_verses(clauses.iter().enumerate().map(|(k, c)| pivot_verse(verse_id(k), c)))
        .expect("ids are unique");
    Fixture {
        pivot,
        lemmas_a: lemma_lines(&clauses, false),
        lemmas_b: lemma_lines(&clauses, true),
        languages: config.languages.iter().map(|s| generate_language(s, &clauses, config.seed)).collect(),
    }
}

impl Fixture {
    /// Writes inputs plus a `pipeline.cfg` pointing at them; returns the
    /// config path. Pipeline outputs go to `<dir>/out`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, IoError> {
        write_atomic(&dir.join("pivot.tagged.txt"), self.pivot.to_text().as_bytes())?;
        write_atomic(&dir.join("lemmas_a.txt"), self.lemmas_a.as_bytes())?;
        write_atomic(&dir.join("lemmas_b.txt"), self.lemmas_b.as_bytes())?;
        let mut manifest = String::new();
        let mut labels = BTreeMap::new();
        for lang in &self.languages {
            let iso = &lang.spec.iso;
            write_atomic(&dir.join("corpus").join(format!("{iso}.txt")), lang.source.to_text().as_bytes())?;
            write_atomic(&dir.join("gold").join(format!("{iso}.tagged.txt")), lang.gold.to_text().as_bytes())?;
            let _ = writeln!(manifest, "{iso}");
            let label = if lang.spec.labeled { lang.spec.order.label() } else { WordOrderLabel::Unk };
            labels.insert(iso.clone(), label);
        }
        let labels: String = labels.iter().map(|(iso, l)| format!("{iso}\t{l}\n")).collect();
        write_atomic(&dir.join("manifest.txt"), manifest.as_bytes())?;
        write_atomic(&dir.join("labels.tsv"), labels.as_bytes())?;
        let cfg = "# synthetic fixture\n\
                   pivot = pivot.tagged.txt\n\
                   lemmas_a = lemmas_a.txt\n\
                   lemmas_b = lemmas_b.txt\n\
                   corpus_dir = corpus\n\
                   output_dir = out\n\
                   manifest = manifest.txt\n\
                   labels = labels.tsv\n";
        let path = dir.join("pipeline.cfg");
        write_atomic(&path, cfg.as_bytes())?;
        Ok(path)
    }
}
