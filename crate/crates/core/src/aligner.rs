//! IBM Model 1 and Model 2 word alignment trained with EM.
//!
//! Source symbols are subword pieces of the low-resource language; target
//! symbols are whole pivot words plus a synthetic NULL word at position 0.
//! Positions follow the usual convention: source positions `j` run `1..=m`,
//! target positions `i` run `0..=l` with `0` the NULL word.
//!
//! Training interns both vocabularies and lays the lexical table out densely
//! over co-occurring `(f, e)` pairs, so every EM pass walks the pairs in input
//! order and accumulates counts in a fixed order. Results are bit-identical
//! across runs on one machine.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Spelling of the NULL target word in model files.
pub const NULL_WORD: &str = "<NULL>";
/// Lexical probability used at decode time for unseen `(f, e)` pairs.
pub const PROB_FLOOR: f64 = 1e-12;
/// Lexical entries below this are dropped when a model is written out.
pub const PRUNE_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_IBM1_ITERATIONS: usize = 5;
pub const DEFAULT_IBM2_ITERATIONS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("no sentence pairs to train on")]
    EmptyTrainingSet,
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("sentence pair needs at least one source and one target word")]
    EmptySentence,
    #[error("alignment model line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePair {
    source: Vec<String>,
    target: Vec<String>,
}

impl SentencePair {
    /// `target_words` excludes NULL; it is inserted at position 0.
    pub fn new<S: Into<String>, T: Into<String>>(
        source: impl IntoIterator<Item = S>,
        target_words: impl IntoIterator<Item = T>,
    ) -> Result<Self, AlignError> {
        let source: Vec<String> = source.into_iter().map(Into::into).collect();
        let mut target = vec![NULL_WORD.to_string()];
        target.extend(target_words.into_iter().map(Into::into));
        if source.is_empty() || target.len() < 2 {
            return Err(AlignError::EmptySentence);
        }
        Ok(SentencePair { source, target })
    }

    pub fn source(&self) -> &[String] {
        &self.source
    }

    /// Target words including NULL at index 0.
    pub fn target(&self) -> &[String] {
        &self.target
    }

    pub fn m(&self) -> usize {
        self.source.len()
    }

    /// Number of real target words.
    pub fn l(&self) -> usize {
        self.target.len() - 1
    }
}

/// Lexical translation probabilities `t(f | e)`, sparse.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TTable {
    by_target: HashMap<String, HashMap<String, f64>>,
}

impl TTable {
    pub fn get(&self, f: &str, e: &str) -> Option<f64> {
        self.by_target.get(e)?.get(f).copied()
    }

    pub fn insert(&mut self, f: &str, e: &str, p: f64) {
        self.by_target.entry(e.to_string()).or_default().insert(f.to_string(), p);
    }

    pub fn len(&self) -> usize {
        self.by_target.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Target words with at least one entry.
    pub fn targets(&self) -> impl Iterator<Item = &str> + '_ {
        self.by_target.keys().map(String::as_str)
    }

    /// Σ_f t(f | e).
    pub fn mass(&self, e: &str) -> f64 {
        let mut ps: Vec<f64> = self.by_target.get(e).map(|m| m.values().copied().collect()).unwrap_or_default();
        ps.sort_by(f64::total_cmp);
        ps.iter().sum()
    }

    /// Entries sorted by `(f, e)`.
    pub fn sorted_entries(&self) -> Vec<(&str, &str, f64)> {
        let mut out: Vec<(&str, &str, f64)> = self
            .by_target
            .iter()
            .flat_map(|(e, fs)| fs.iter().map(move |(f, p)| (f.as_str(), e.as_str(), *p)))
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}

/// Distortion probabilities `q(i | j, l, m)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QTable {
    /// Keyed by `(l, m)`; row-major over `j` with `l + 1` entries per row.
    by_shape: HashMap<(usize, usize), Vec<f64>>,
}

impl QTable {
    fn uniform_row(l: usize) -> f64 {
        1.0 / (l as f64 + 1.0)
    }

    pub fn get(&self, i: usize, j: usize, l: usize, m: usize) -> Option<f64> {
        if i > l || j == 0 || j > m {
            return None;
        }
        self.by_shape.get(&(l, m)).map(|v| v[(j - 1) * (l + 1) + i])
    }

    /// Falls back to the uniform `1 / (l + 1)` for unseen shapes.
    pub fn get_or_uniform(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        self.get(i, j, l, m).unwrap_or_else(|| Self::uniform_row(l))
    }

    /// Sorted `(l, m)` shapes seen in training.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut s: Vec<_> = self.by_shape.keys().copied().collect();
        s.sort_unstable();
        s
    }

    fn set(&mut self, i: usize, j: usize, l: usize, m: usize, p: f64) {
        let row = self.by_shape.entry((l, m)).or_insert_with(|| vec![0.0; m * (l + 1)]);
        row[(j - 1) * (l + 1) + i] = p;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IterationCounts {
    pub ibm1: usize,
    pub ibm2: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlignmentModel {
    pub t: TTable,
    pub q: QTable,
    pub iterations_run: IterationCounts,
}

/// One link per source position; `links[j - 1]` is a target position, 0 = NULL.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub links: Vec<usize>,
}

/// Lexical and distortion lookups used for scoring.
pub trait AlignmentScorer {
    fn lexical(&self, f: &str, e: &str) -> f64;
    fn distortion(&self, i: usize, j: usize, l: usize, m: usize) -> f64;
}

impl AlignmentScorer for TTable {
    fn lexical(&self, f: &str, e: &str) -> f64 {
        self.get(f, e).unwrap_or(PROB_FLOOR)
    }

    fn distortion(&self, _i: usize, _j: usize, l: usize, _m: usize) -> f64 {
        QTable::uniform_row(l)
    }
}

impl AlignmentScorer for AlignmentModel {
    fn lexical(&self, f: &str, e: &str) -> f64 {
        self.t.get(f, e).unwrap_or(PROB_FLOOR)
    }

    fn distortion(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        self.q.get_or_uniform(i, j, l, m)
    }
}

/// Σ_pairs Σ_j log Σ_i q(i|j,l,m)·t(f_j|e_i). Model 1 tables use uniform q.
pub fn log_likelihood<S: AlignmentScorer + ?Sized>(scorer: &S, pairs: &[SentencePair]) -> f64 {
    let mut total = 0.0;
    for pair in pairs {
        let (l, m) = (pair.l(), pair.m());
        for (j0, f) in pair.source.iter().enumerate() {
            let z: f64 = pair
                .target
                .iter()
                .enumerate()
                .map(|(i, e)| scorer.distortion(i, j0 + 1, l, m) * scorer.lexical(f, e))
                .sum();
            total += z.ln();
        }
    }
    total
}

/// Best link per source position; ties go to the smallest target position.
pub fn viterbi_align<S: AlignmentScorer + ?Sized>(scorer: &S, pair: &SentencePair) -> Alignment {
    let (l, m) = (pair.l(), pair.m());
    let links = pair
        .source
        .iter()
        .enumerate()
        .map(|(j0, f)| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, e) in pair.target.iter().enumerate() {
                let score = scorer.distortion(i, j0 + 1, l, m) * scorer.lexical(f, e);
                if score > best_score {
                    best = i;
                    best_score = score;
                }
            }
            best
        })
        .collect();
    Alignment { links }
}

struct IndexedPair {
    l: usize,
    m: usize,
    /// Target word ids, NULL first.
    targets: Vec<u32>,
    /// `slots[(j - 1) * (l + 1) + i]` indexes the lexical table.
    slots: Vec<u32>,
}

/// EM state shared by both models.
///
/// Call [`EmTrainer::ibm1_step`] any number of times, then
/// [`EmTrainer::ibm2_step`]; the first Model 2 step starts from uniform
/// distortions.
pub struct EmTrainer {
    source_vocab: Vec<String>,
    target_vocab: Vec<String>,
    slot_keys: Vec<(u32, u32)>,
    pairs: Vec<IndexedPair>,
    t: Vec<f64>,
    q: Option<HashMap<(usize, usize), Vec<f64>>>,
    iterations: IterationCounts,
}

fn intern(vocab: &mut Vec<String>, ids: &mut HashMap<String, u32>, s: &str) -> u32 {
    if let Some(&id) = ids.get(s) {
        return id;
    }
    let id = vocab.len() as u32;
    vocab.push(s.to_string());
    ids.insert(s.to_string(), id);
    id
}

impl EmTrainer {
    /// Indexes `pairs` and initializes `t(f|e)` uniformly over the source
    /// symbols co-occurring with each `e`.
    pub fn new(pairs: &[SentencePair]) -> Result<Self, AlignError> {
        if pairs.is_empty() {
            return Err(AlignError::EmptyTrainingSet);
        }
        let mut source_vocab = Vec::new();
        let mut source_ids = HashMap::new();
        let mut target_vocab = Vec::new();
        let mut target_ids = HashMap::new();
        let mut slot_ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut slot_keys = Vec::new();
        let mut indexed = Vec::with_capacity(pairs.len());

        for pair in pairs {
            let targets: Vec<u32> =
                pair.target.iter().map(|e| intern(&mut target_vocab, &mut target_ids, e)).collect();
            let mut slots = Vec::with_capacity(pair.m() * targets.len());
            for f in &pair.source {
                let f = intern(&mut source_vocab, &mut source_ids, f);
                for &e in &targets {
                    let next = slot_keys.len() as u32;
                    let slot = *slot_ids.entry((f, e)).or_insert_with(|| {
                        slot_keys.push((f, e));
                        next
                    });
                    slots.push(slot);
                }
            }
            indexed.push(IndexedPair { l: pair.l(), m: pair.m(), targets, slots });
        }

        let mut per_target = vec![0usize; target_vocab.len()];
        for &(_, e) in &slot_keys {
            per_target[e as usize] += 1;
        }
        let t = slot_keys.iter().map(|&(_, e)| 1.0 / per_target[e as usize] as f64).collect();

        Ok(EmTrainer {
            source_vocab,
            target_vocab,
            slot_keys,
            pairs: indexed,
            t,
            q: None,
            iterations: IterationCounts::default(),
        })
    }

    /// Replaces the lexical table, e.g. with a Model 1 result. Pairs missing
    /// from `init` get [`PROB_FLOOR`].
    pub fn set_t(&mut self, init: &TTable) {
        for (k, &(f, e)) in self.slot_keys.iter().enumerate() {
            self.t[k] = init
                .get(&self.source_vocab[f as usize], &self.target_vocab[e as usize])
                .unwrap_or(PROB_FLOOR);
        }
    }

    fn q_row<'a>(q: &'a HashMap<(usize, usize), Vec<f64>>, p: &IndexedPair) -> &'a [f64] {
        &q[&(p.l, p.m)]
    }

    fn step(&mut self, with_distortion: bool) {
        let mut counts = vec![0.0; self.t.len()];
        let mut totals = vec![0.0; self.target_vocab.len()];
        let mut q_counts: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        let mut posterior = Vec::new();

        for p in &self.pairs {
            let width = p.l + 1;
            let q_row = if with_distortion { Some(Self::q_row(self.q.as_ref().unwrap(), p)) } else { None };
            for j0 in 0..p.m {
                let base = j0 * width;
                posterior.clear();
                posterior.extend((0..width).map(|i| {
                    let t = self.t[p.slots[base + i] as usize];
                    match q_row {
                        Some(q) => q[base + i] * t,
                        None => t,
                    }
                }));
                let z: f64 = posterior.iter().sum();
                if z <= 0.0 {
                    continue;
                }
                for (i, d) in posterior.iter_mut().enumerate() {
                    *d /= z;
                    counts[p.slots[base + i] as usize] += *d;
                    totals[p.targets[i] as usize] += *d;
                }
                if with_distortion {
                    let row = q_counts.entry((p.l, p.m)).or_insert_with(|| vec![0.0; p.m * width]);
                    for (i, d) in posterior.iter().enumerate() {
                        row[base + i] += d;
                    }
                }
            }
        }

        for (k, &(_, e)) in self.slot_keys.iter().enumerate() {
            let total = totals[e as usize];
            self.t[k] = if total > 0.0 { counts[k] / total } else { 0.0 };
        }

        if with_distortion {
            let q = self.q.as_mut().unwrap();
            for ((l, m), row) in q_counts {
                let width = l + 1;
                let target = q.get_mut(&(l, m)).unwrap();
                for j0 in 0..m {
                    let cells = &row[j0 * width..(j0 + 1) * width];
                    let z: f64 = cells.iter().sum();
                    if z > 0.0 {
                        for (i, c) in cells.iter().enumerate() {
                            target[j0 * width + i] = c / z;
                        }
                    }
                }
            }
        }
    }

    pub fn ibm1_step(&mut self) {
        self.step(false);
        self.iterations.ibm1 += 1;
    }

    pub fn ibm2_step(&mut self) {
        if self.q.is_none() {
            let mut q = HashMap::new();
            for p in &self.pairs {
                q.entry((p.l, p.m))
                    .or_insert_with(|| vec![QTable::uniform_row(p.l); p.m * (p.l + 1)]);
            }
            self.q = Some(q);
        }
        self.step(true);
        self.iterations.ibm2 += 1;
    }

    /// Log-likelihood of the training pairs under the current parameters;
    /// Model 1 (uniform q) until the first Model 2 step.
    pub fn log_likelihood(&self) -> f64 {
        let mut total = 0.0;
        for p in &self.pairs {
            let width = p.l + 1;
            for j0 in 0..p.m {
                let base = j0 * width;
                let z: f64 = (0..width)
                    .map(|i| {
                        let t = self.t[p.slots[base + i] as usize];
                        match &self.q {
                            Some(q) => Self::q_row(q, p)[base + i] * t,
                            None => t / width as f64,
                        }
                    })
                    .sum();
                total += z.ln();
            }
        }
        total
    }

    pub fn t_table(&self) -> TTable {
        let mut t = TTable::default();
        for (k, &(f, e)) in self.slot_keys.iter().enumerate() {
            t.insert(&self.source_vocab[f as usize], &self.target_vocab[e as usize], self.t[k]);
        }
        t
    }

    pub fn model(&self) -> AlignmentModel {
        let mut q = QTable::default();
        if let Some(rows) = &self.q {
            q.by_shape = rows.clone();
        }
        AlignmentModel { t: self.t_table(), q, iterations_run: self.iterations }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ibm1Result {
    pub t: TTable,
    /// Corpus log-likelihood at initialization and after each iteration.
    pub log_likelihoods: Vec<f64>,
}

pub fn train_ibm1(pairs: &[SentencePair], iterations: usize) -> Result<Ibm1Result, AlignError> {
    if iterations == 0 {
        return Err(AlignError::ZeroIterations);
    }
    let mut trainer = EmTrainer::new(pairs)?;
    let mut log_likelihoods = vec![trainer.log_likelihood()];
    for _ in 0..iterations {
        trainer.ibm1_step();
        log_likelihoods.push(trainer.log_likelihood());
    }
    Ok(Ibm1Result { t: trainer.t_table(), log_likelihoods })
}

pub fn train_ibm2(
    pairs: &[SentencePair],
    iterations: usize,
    init_t: &TTable,
) -> Result<AlignmentModel, AlignError> {
    if iterations == 0 {
        return Err(AlignError::ZeroIterations);
    }
    let mut trainer = EmTrainer::new(pairs)?;
    trainer.set_t(init_t);
    for _ in 0..iterations {
        trainer.ibm2_step();
    }
    Ok(trainer.model())
}

/// Model 1 followed by Model 2 on one trainer.
pub fn train(pairs: &[SentencePair], ibm1_iterations: usize, ibm2_iterations: usize) -> Result<AlignmentModel, AlignError> {
    if ibm1_iterations == 0 || ibm2_iterations == 0 {
        return Err(AlignError::ZeroIterations);
    }
    let mut trainer = EmTrainer::new(pairs)?;
    for _ in 0..ibm1_iterations {
        trainer.ibm1_step();
    }
    for _ in 0..ibm2_iterations {
        trainer.ibm2_step();
    }
    Ok(trainer.model())
}

impl AlignmentModel {
    /// Serializes as a `T` section (`f<TAB>e<TAB>prob`, pruned below
    /// [`PRUNE_THRESHOLD`]) followed by a `Q` section
    /// (`i<TAB>j<TAB>l<TAB>m<TAB>prob`).
    pub fn to_text(&self) -> String {
        let mut out = String::from("T\n");
        for (f, e, p) in self.t.sorted_entries() {
            if p >= PRUNE_THRESHOLD {
                let _ = writeln!(out, "{f}\t{e}\t{p}");
            }
        }
        out.push_str("Q\n");
        for (l, m) in self.q.shapes() {
            let row = &self.q.by_shape[&(l, m)];
            for j in 1..=m {
                for i in 0..=l {
                    let _ = writeln!(out, "{i}\t{j}\t{l}\t{m}\t{}", row[(j - 1) * (l + 1) + i]);
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AlignError> {
        enum Section {
            None,
            T,
            Q,
        }
        let mut section = Section::None;
        let mut model = AlignmentModel::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            let bad = |reason: &str| AlignError::ModelFormat { line: idx + 1, reason: reason.to_string() };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "T" => section = Section::T,
                "Q" => section = Section::Q,
                _ => {
                    let fields: Vec<&str> = line.split('\t').collect();
                    match section {
                        Section::None => return Err(bad("entry before any section header")),
                        Section::T => {
                            let [f, e, p] = fields[..] else {
                                return Err(bad("expected f<TAB>e<TAB>prob"));
                            };
                            let p = parse_prob(p).ok_or_else(|| bad("bad probability"))?;
                            model.t.insert(f, e, p);
                        }
                        Section::Q => {
                            let [i, j, l, m, p] = fields[..] else {
                                return Err(bad("expected i<TAB>j<TAB>l<TAB>m<TAB>prob"));
                            };
                            let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad position"));
                            let (i, j, l, m) = (int(i)?, int(j)?, int(l)?, int(m)?);
                            if i > l || j == 0 || j > m {
                                return Err(bad("position out of range"));
                            }
                            let p = parse_prob(p).ok_or_else(|| bad("bad probability"))?;
                            model.q.set(i, j, l, m, p);
                        }
                    }
                }
            }
        }
        Ok(model)
    }
}

fn parse_prob(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p))
}
