mod common;

use proptest::prelude::*;
use triage_core::textpipe::{
    build_vocabulary, preprocess_parts, tokenize, vectorize, StopWords, TextPipeline,
};

#[test]
fn vectorize_matches_dense_definition() {
    let (worst, nonzero) = common::tfidf_oracle_error(300, 5);
    assert!(worst <= 1e-12, "max deviation {worst:e}");
    assert_eq!(nonzero, 0);
}

#[test]
fn hand_computed_weights() {
    let docs = vec![
        common::words("printer jam printer"),
        common::words("printer login"),
        common::words("login timeout"),
    ];
    let vocab = build_vocabulary(&docs).unwrap();
    assert_eq!(vocab.terms(), ["printer", "jam", "login", "timeout"]);
    let v = vectorize(&common::words("printer jam printer"), &vocab);
    // printer: 2 * ln(3/2), jam: ln 3
    let (p, j) = (2.0 * 1.5f64.ln(), 3.0f64.ln());
    let norm = (p * p + j * j).sqrt();
    assert!((v.get(0) - p / norm).abs() < 1e-15);
    assert!((v.get(1) - j / norm).abs() < 1e-15);
    assert_eq!(v.nnz(), 2);
}

#[test]
fn only_ubiquitous_or_unknown_terms_give_empty_vector() {
    let docs = vec![common::words("a b"), common::words("a c")];
    let vocab = build_vocabulary(&docs).unwrap();
    assert!(vectorize(&common::words("a a zzz"), &vocab).is_empty());
}

#[test]
fn tokenizer_folds_case_and_splits_on_non_letters() {
    let sw = StopWords::from_words(["the", "on"]);
    // U+0130 has only full and Turkic foldings, so simple folding keeps it
    assert_eq!(
        tokenize("The ATM-screen froze on İSTANBUL branch #42!", &sw),
        ["atm", "screen", "froze", "İstanbul", "branch"]
    );
    // locale-agnostic: capital I folds to i, not to dotless ı
    assert_eq!(
        tokenize("ÇAĞRI çağrı", &StopWords::none()),
        ["çağri", "çağrı"]
    );
    assert_eq!(
        preprocess_parts("Login", "fails", &StopWords::none()),
        ["login", "fails"]
    );
    assert!(tokenize("1234 -- !!", &StopWords::none()).is_empty());
}

#[test]
fn pipeline_round_trips_through_json() {
    let docs = vec![common::words("alpha beta"), common::words("beta gamma")];
    let p = TextPipeline::fit(&docs, StopWords::english()).unwrap();
    let back: TextPipeline = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.vocab.index_of("gamma"), p.vocab.index_of("gamma"));
}

proptest! {
    #[test]
    fn vectors_are_unit_or_empty(docs in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 1..8), 1..10),
                                 probe in prop::collection::vec("[a-f]{1,2}", 0..10)) {
        let vocab = build_vocabulary(&docs).unwrap();
        let v = vectorize(&probe, &vocab);
        prop_assert!(v.is_empty() || (v.norm() - 1.0).abs() < 1e-12);
        prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(v.entries().iter().all(|&(_, w)| w > 0.0));
    }

    #[test]
    fn tokens_are_lowercase_letters(text in "\\PC{0,40}") {
        for t in tokenize(&text, &StopWords::none()) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphabetic), "{t:?}");
        }
    }
}
