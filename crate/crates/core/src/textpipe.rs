//! Text to tf-idf vectors.
//!
//! Reports are tokenized by folding case, splitting on every non-letter and
//! dropping stop words. No stemming is applied. Weights are raw term counts
//! times `ln(N / df)`, L2-normalized per document.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::IssueReport;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no training document has any token")]
    EmptyTrainingSet,
    #[error("cannot read stop-word file: {0}")]
    Io(#[from] std::io::Error),
}

/// Unicode simple case folding, one character at a time.
fn fold_char(c: char) -> char {
    unicode_case_mapping::case_folded(c)
        .and_then(|cp| char::from_u32(cp.get()))
        .unwrap_or(c)
}

pub fn fold_case(text: &str) -> String {
    text.chars().map(fold_char).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One term per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(fold_case)
            .collect();
        Self { words }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TextError> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| fold_case(w.as_ref())).collect(),
        }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.words.contains(term)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn tokenize(text: &str, stopwords: &StopWords) -> Vec<String> {
    fold_case(text)
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

/// Tokens of `summary + " " + description`.
pub fn preprocess(report: &IssueReport, stopwords: &StopWords) -> Vec<String> {
    preprocess_parts(&report.summary, &report.description, stopwords)
}

pub fn preprocess_parts(summary: &str, description: &str, stopwords: &StopWords) -> Vec<String> {
    tokenize(&format!("{summary} {description}"), stopwords)
}

/// Term index plus document frequencies learned from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            terms: r.terms,
            df: r.df,
            n_docs: r.n_docs,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            terms: v.terms,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> &str {
        &self.terms[index as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, index: u32) -> u32 {
        self.df[index as usize]
    }

    pub fn df_of(&self, term: &str) -> Option<u32> {
        self.index_of(term).map(|i| self.df(i))
    }

    /// `ln(N / df_t)`. Zero for a term present in every training document.
    pub fn idf(&self, index: u32) -> f64 {
        (self.n_docs as f64 / self.df[index as usize] as f64).ln()
    }
}

/// Builds the vocabulary; terms are indexed in order of first appearance.
pub fn build_vocabulary<D: AsRef<[String]>>(docs: &[D]) -> Result<Vocabulary, TextError> {
    let mut terms = Vec::new();
    let mut df: Vec<u32> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut seen_in_doc = HashSet::new();
    for doc in docs {
        seen_in_doc.clear();
        for term in doc.as_ref() {
            if !seen_in_doc.insert(term.as_str()) {
                continue;
            }
            match index.get(term) {
                Some(&i) => df[i as usize] += 1,
                None => {
                    index.insert(term.clone(), terms.len() as u32);
                    terms.push(term.clone());
                    df.push(1);
                }
            }
        }
    }
    if terms.is_empty() {
        return Err(TextError::EmptyTrainingSet);
    }
    Ok(Vocabulary {
        terms,
        df,
        n_docs: docs.len() as u32,
        index,
    })
}

/// Sparse nonnegative vector with strictly increasing indices and no zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts by index, sums duplicates and drops zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            match entries.last_mut() {
                Some((last, acc)) if *last == i => *acc += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        Self { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|&(i, w)| (i as usize, w))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, w)| w * dense[i as usize])
            .sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_pairs(self.entries.iter().map(|&(i, w)| (i, w * factor)).collect())
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, w) in &self.entries {
            out[i as usize] = w;
        }
        out
    }
}

/// tf-idf vector of `tokens`; out-of-vocabulary tokens are ignored.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let raw: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(i, tf)| (i, tf as f64 * vocab.idf(i)))
        .collect();
    let mut v = SparseVector::from_pairs(raw);
    let norm = v.norm();
    if norm > 0.0 {
        for e in &mut v.entries {
            e.1 /= norm;
        }
    }
    v
}

/// Stop words and vocabulary, everything needed to turn raw text into model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPipeline {
    pub stopwords: StopWords,
    pub vocab: Vocabulary,
}

impl TextPipeline {
    pub fn fit<D: AsRef<[String]>>(docs: &[D], stopwords: StopWords) -> Result<Self, TextError> {
        Ok(Self {
            vocab: build_vocabulary(docs)?,
            stopwords,
        })
    }

    pub fn tokens(&self, summary: &str, description: &str) -> Vec<String> {
        preprocess_parts(summary, description, &self.stopwords)
    }

    pub fn vectorize_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        vectorize(tokens, &self.vocab)
    }

    pub fn vectorize_report(&self, report: &IssueReport) -> SparseVector {
        vectorize(&preprocess(report, &self.stopwords), &self.vocab)
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Status;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn preprocess_combines_folds_and_filters() {
        let report = IssueReport {
            id: "1".into(),
            summary: "Login fails".into(),
            description: "the ATM screen freezes".into(),
            opened_at: "2018-01-01T00:00:00Z".parse().unwrap(),
            closed_at: None,
            initial_team: None,
            closing_team: None,
            status: Status::Open,
        };
        let stop = StopWords::from_words(["the"]);
        assert_eq!(
            preprocess(&report, &stop),
            ["login", "fails", "atm", "screen", "freezes"]
        );
    }

    #[test]
    fn non_letters_split_tokens() {
        assert_eq!(tokenize("error-404!!", &StopWords::none()), ["error"]);
        assert_eq!(
            tokenize("a_b c3d", &StopWords::none()),
            ["a", "b", "c", "d"]
        );
        assert!(tokenize("", &StopWords::none()).is_empty());
        assert!(preprocess_parts("", "", &StopWords::none()).is_empty());
    }

    #[test]
    fn unicode_letters_and_folding() {
        assert_eq!(
            tokenize("ŞIFRE Hatası", &StopWords::none()),
            ["şifre", "hatası"]
        );
        assert_eq!(
            tokenize("STRASSE Straße", &StopWords::none()),
            ["strasse", "straße"]
        );
    }

    #[test]
    fn stopwords_are_folded_too() {
        let stop = StopWords::parse("# comment\nThe\n\nAND\n");
        assert_eq!(stop.len(), 2);
        assert_eq!(tokenize("The cat AND dog", &stop), ["cat", "dog"]);
        assert!(StopWords::english().contains("the"));
    }

    #[test]
    fn document_frequency_counts_documents() {
        let v = build_vocabulary(&docs(&[&["a", "b"], &["b", "c"]])).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.n_docs(), 2);
        assert_eq!(
            (v.df_of("a"), v.df_of("b"), v.df_of("c")),
            (Some(1), Some(2), Some(1))
        );
        assert_eq!(v.terms(), ["a", "b", "c"]);

        let v = build_vocabulary(&docs(&[&["a", "a", "a"]])).unwrap();
        assert_eq!(v.df_of("a"), Some(1));
    }

    #[test]
    fn ubiquitous_term_has_df_n() {
        let corpus: Vec<Vec<String>> = (0..1000)
            .map(|i| vec!["system".to_string(), format!("t{i}")])
            .collect();
        let v = build_vocabulary(&corpus).unwrap();
        assert_eq!(v.df_of("system"), Some(1000));
        assert_eq!(v.n_docs(), 1000);
        assert_eq!(v.idf(v.index_of("system").unwrap()), 0.0);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(matches!(
            build_vocabulary::<Vec<String>>(&[]),
            Err(TextError::EmptyTrainingSet)
        ));
        assert!(matches!(
            build_vocabulary(&docs(&[&[], &[]])),
            Err(TextError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn hand_evaluated_weight() {
        // N = 100, df = 10, tf = 2 -> 2 ln 10 before normalization
        let mut corpus: Vec<Vec<String>> = (0..100).map(|i| vec![format!("filler{i}")]).collect();
        for d in corpus.iter_mut().take(10) {
            d.push("target".into());
        }
        let v = build_vocabulary(&corpus).unwrap();
        let i = v.index_of("target").unwrap();
        let raw = 2.0 * v.idf(i);
        assert!((raw - 4.605_170_185_988_09).abs() < 1e-12);
        let x = vectorize(&["target", "target"], &v);
        assert_eq!(x.entries(), &[(i, 1.0)]);
    }

    #[test]
    fn oov_and_ubiquitous_terms_vanish() {
        let v = build_vocabulary(&docs(&[&["a", "b"], &["a", "c"]])).unwrap();
        assert!(vectorize(&["zzz", "yyy"], &v).is_empty());
        assert!(vectorize(&["a", "a"], &v).is_empty());
        let x = vectorize(&["a", "b", "c"], &v);
        assert_eq!(x.nnz(), 2);
        assert!((x.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_serde_restores_index() {
        let v = build_vocabulary(&docs(&[&["x", "y"], &["y"]])).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("y"), Some(1));
    }

    #[test]
    fn sparse_vector_canonical_form() {
        let v = SparseVector::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 0.5), (2, 0.0)]);
        assert_eq!(v.entries(), &[(1, 2.0), (3, 1.5)]);
        assert_eq!(v.get(3), 1.5);
        assert_eq!(v.get(2), 0.0);
        let w = SparseVector::from_dense(&[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(v.dot(&w), 2.0 + 3.0);
    }
}
