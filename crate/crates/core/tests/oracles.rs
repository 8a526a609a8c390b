//! Values computed outside this crate and frozen here.

use typoline::aligner::{train_ibm1, SentencePair, NULL_WORD};

fn toy_pairs() -> Vec<SentencePair> {
    let mut pairs = Vec::new();
    for _ in 0..25 {
        pairs.push(SentencePair::new(vec!["a"], vec!["a"]).unwrap());
        pairs.push(SentencePair::new(vec!["a", "b"], vec!["a", "b"]).unwrap());
    }
    pairs
}

// Reference Model 1 run (NULL included, uniform start over co-occurring
// source words) written independently in Python with plain dictionaries.
const REFERENCE_T_BB: [(usize, f64); 6] = [
    (1, 0.49999999999999956),
    (2, 0.6428571428571431),
    (5, 0.8920070221416347),
    (20, 0.9999771052247385),
    (25, 0.9999990610037437),
    (26, 0.9999995081450483),
];

const REFERENCE_LOG_LIKELIHOOD: [(usize, f64); 3] =
    [(0, -51.98603854199591), (1, -45.19811015203528), (19, -37.637362507897805)];

#[test]
fn toy_corpus_t_bb_matches_reference_run() {
    for (iters, expected) in REFERENCE_T_BB {
        let t = train_ibm1(&toy_pairs(), iters).unwrap().t;
        let got = t.get("b", "b").unwrap();
        assert!((got - expected).abs() < 1e-12, "after {iters} iterations: {got} vs {expected}");
    }
}

#[test]
fn toy_corpus_needs_25_iterations_for_one_in_a_million() {
    let below = train_ibm1(&toy_pairs(), 24).unwrap().t.get("b", "b").unwrap();
    let above = train_ibm1(&toy_pairs(), 25).unwrap().t.get("b", "b").unwrap();
    assert!(below < 1.0 - 1e-6 && above >= 1.0 - 1e-6);
}

#[test]
fn toy_corpus_log_likelihood_matches_reference_run() {
    let r = train_ibm1(&toy_pairs(), 20).unwrap();
    assert_eq!(r.log_likelihoods.len(), 21);
    for (k, expected) in REFERENCE_LOG_LIKELIHOOD {
        assert!((r.log_likelihoods[k] - expected).abs() < 1e-9, "iteration {k}");
    }
}

#[test]
fn toy_corpus_null_and_a_rows() {
    // b only ever pairs with a sentence that also holds a, so a takes the
    // NULL mass and t(a|b) decays toward zero
    let t = train_ibm1(&toy_pairs(), 20).unwrap().t;
    assert!((t.get("a", "b").unwrap() - 2.2894775260861992e-05).abs() < 1e-12);
    assert!(t.get("a", NULL_WORD).unwrap() > t.get("b", NULL_WORD).unwrap());
}
