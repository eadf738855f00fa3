//! Level-0 classifiers and stacked level-1 ensembles over tf-idf vectors.
//!
//! Every model keeps its classes in ascending name order; ties in any argmax
//! resolve to the lowest class index.

mod calibration;
pub mod folds;
mod knn;
pub mod logistic;
mod naive_bayes;
mod stacking;
pub mod svm;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TeamId;
use crate::textpipe::SparseVector;

pub use calibration::{fit_sigmoid, Sigmoid};
pub use knn::KnnParams;
pub use logistic::LinearParams;
pub use naive_bayes::NaiveBayesParams;
pub use stacking::{fit_stacked, rank_pool, EnsembleModel, StackMode, StackSpec};
pub use tree::{DecisionTree, TreeNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("{kind} needs at least two distinct classes")]
    DegenerateLabels { kind: ClassifierKind },
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("{0} does not provide class probabilities")]
    Unsupported(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("unknown classifier {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    BaselineMajority,
    MultinomialNb,
    DecisionTree,
    Knn,
    LogisticRegression,
    RandomForest,
    LinearSvc,
    LinearSvcCalibrated,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 8] = [
        ClassifierKind::BaselineMajority,
        ClassifierKind::MultinomialNb,
        ClassifierKind::DecisionTree,
        ClassifierKind::Knn,
        ClassifierKind::LogisticRegression,
        ClassifierKind::RandomForest,
        ClassifierKind::LinearSvc,
        ClassifierKind::LinearSvcCalibrated,
    ];

    pub fn supports_proba(self) -> bool {
        !matches!(
            self,
            ClassifierKind::BaselineMajority | ClassifierKind::LinearSvc
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::BaselineMajority => "baseline_majority",
            ClassifierKind::MultinomialNb => "multinomial_nb",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::Knn => "knn",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::LinearSvc => "linear_svc",
            ClassifierKind::LinearSvcCalibrated => "linear_svc_calibrated",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::BaselineMajority => "Baseline",
            ClassifierKind::MultinomialNb => "Multinomial NB",
            ClassifierKind::DecisionTree => "Decision Tree",
            ClassifierKind::Knn => "K-Neighbours",
            ClassifierKind::LogisticRegression => "Logistic Regression",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::LinearSvc => "Linear SVC",
            ClassifierKind::LinearSvcCalibrated => "Linear SVC-Calibrated",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match norm.as_str() {
            "baseline_majority" | "baseline" => ClassifierKind::BaselineMajority,
            "multinomial_nb" | "nb" => ClassifierKind::MultinomialNb,
            "decision_tree" | "tree" => ClassifierKind::DecisionTree,
            "knn" | "k_neighbours" | "k_neighbors" => ClassifierKind::Knn,
            "logistic_regression" | "logistic" => ClassifierKind::LogisticRegression,
            "random_forest" | "forest" => ClassifierKind::RandomForest,
            "linear_svc" | "svc" => ClassifierKind::LinearSvc,
            "linear_svc_calibrated" | "calibrated_svc" => ClassifierKind::LinearSvcCalibrated,
            _ => return Err(ClassifyError::UnknownKind(s.to_owned())),
        };
        Ok(kind)
    }
}

/// Hyperparameters shared by every kind. Defaults are the fixed settings
/// used throughout; nothing is tuned per corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub seed: u64,
    pub nb_alpha: f64,
    pub knn_k: usize,
    pub svc_c: f64,
    pub svc_tol: f64,
    pub svc_max_epochs: usize,
    pub calibration_folds: usize,
    pub lr_lambda: f64,
    pub lr_tol: f64,
    pub lr_max_iter: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub stack_folds: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            nb_alpha: 1.0,
            knn_k: 5,
            svc_c: 1.0,
            svc_tol: 1e-4,
            svc_max_epochs: 1000,
            calibration_folds: 3,
            lr_lambda: 1.0,
            lr_tol: 1e-6,
            lr_max_iter: 20_000,
            tree_max_depth: 50,
            tree_min_leaf: 2,
            forest_trees: 100,
            stack_folds: 5,
        }
    }
}

/// Borrowed training data: vectors, labels and the feature dimension.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub x: &'a [SparseVector],
    pub y: &'a [TeamId],
    pub n_features: usize,
}

impl<'a> TrainingSet<'a> {
    pub fn new(x: &'a [SparseVector], y: &'a [TeamId], n_features: usize) -> Self {
        Self { x, y, n_features }
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if self.x.len() != self.y.len() {
            return Err(ClassifyError::ShapeError(format!(
                "{} vectors but {} labels",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.is_empty() {
            return Err(ClassifyError::ShapeError("empty training set".into()));
        }
        if let Some(bad) = self
            .x
            .iter()
            .filter_map(SparseVector::max_index)
            .find(|&i| i as usize >= self.n_features)
        {
            return Err(ClassifyError::ShapeError(format!(
                "feature index {bad} out of range for dimension {}",
                self.n_features
            )));
        }
        Ok(())
    }
}

/// Sorted distinct classes and each label's index into them.
pub fn encode_labels(y: &[TeamId]) -> (Vec<TeamId>, Vec<usize>) {
    let classes: Vec<TeamId> = y
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&TeamId, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let encoded = y.iter().map(|t| index[t]).collect();
    (classes, encoded)
}

/// Index of the first maximum; NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Anything that assigns a vector to one of its classes.
pub trait Classifier: Send + Sync {
    fn classes(&self) -> &[TeamId];

    fn predict_index(&self, x: &SparseVector) -> usize;

    /// Class probabilities aligned with [`Classifier::classes`].
    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifyError>;

    fn supports_proba(&self) -> bool;

    fn predict(&self, x: &SparseVector) -> TeamId {
        self.classes()[self.predict_index(x)].clone()
    }

    fn proba_map(&self, x: &SparseVector) -> Result<BTreeMap<TeamId, f64>, ClassifyError> {
        let p = self.predict_proba(x)?;
        Ok(self.classes().iter().cloned().zip(p).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Majority {
        class: usize,
    },
    NaiveBayes(NaiveBayesParams),
    Tree(DecisionTree),
    Knn(KnnParams),
    Logistic(LinearParams),
    Forest(Vec<DecisionTree>),
    LinearSvc(LinearParams),
    CalibratedSvc {
        linear: LinearParams,
        sigmoids: Vec<Sigmoid>,
    },
}

/// An immutable fitted level-0 model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    kind: ClassifierKind,
    classes: Vec<TeamId>,
    n_features: usize,
    params: ModelParams,
}

impl TrainedModel {
    /// Assembles a model from explicit parts. The parameter variant must match `kind`.
    pub fn from_parts(
        kind: ClassifierKind,
        classes: Vec<TeamId>,
        n_features: usize,
        params: ModelParams,
    ) -> Result<Self, ClassifyError> {
        let matches = matches!(
            (kind, &params),
            (
                ClassifierKind::BaselineMajority,
                ModelParams::Majority { .. }
            ) | (ClassifierKind::MultinomialNb, ModelParams::NaiveBayes(_))
                | (ClassifierKind::DecisionTree, ModelParams::Tree(_))
                | (ClassifierKind::Knn, ModelParams::Knn(_))
                | (ClassifierKind::LogisticRegression, ModelParams::Logistic(_))
                | (ClassifierKind::RandomForest, ModelParams::Forest(_))
                | (ClassifierKind::LinearSvc, ModelParams::LinearSvc(_))
                | (
                    ClassifierKind::LinearSvcCalibrated,
                    ModelParams::CalibratedSvc { .. }
                )
        );
        if !matches {
            return Err(ClassifyError::ShapeError(format!(
                "parameters do not belong to {kind}"
            )));
        }
        if classes.is_empty() {
            return Err(ClassifyError::ShapeError("no classes".into()));
        }
        Ok(Self {
            kind,
            classes,
            n_features,
            params,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Raw per-class scores whose argmax is the prediction.
    pub fn decision_scores(&self, x: &SparseVector) -> Vec<f64> {
        match &self.params {
            ModelParams::Majority { class } => {
                let mut s = vec![0.0; self.classes.len()];
                s[*class] = 1.0;
                s
            }
            ModelParams::NaiveBayes(nb) => nb.joint_log_likelihood(x),
            ModelParams::Tree(t) => t.predict_proba(x),
            ModelParams::Knn(k) => k.votes(x),
            ModelParams::Logistic(lp) | ModelParams::LinearSvc(lp) => lp.scores(x),
            ModelParams::Forest(trees) => tree::forest_proba(trees, x, self.classes.len()),
            ModelParams::CalibratedSvc { linear, sigmoids } => {
                calibration::calibrated_proba(linear, sigmoids, x)
            }
        }
    }
}

impl Classifier for TrainedModel {
    fn classes(&self) -> &[TeamId] {
        &self.classes
    }

    fn predict_index(&self, x: &SparseVector) -> usize {
        argmax(&self.decision_scores(x))
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifyError> {
        if !self.kind.supports_proba() {
            return Err(ClassifyError::Unsupported(self.kind.to_string()));
        }
        let mut scores = self.decision_scores(x);
        match self.kind {
            ClassifierKind::MultinomialNb | ClassifierKind::LogisticRegression => {
                softmax_in_place(&mut scores)
            }
            ClassifierKind::Knn => {
                let total: f64 = scores.iter().sum();
                if total > 0.0 {
                    scores.iter_mut().for_each(|v| *v /= total);
                } else {
                    let u = 1.0 / scores.len() as f64;
                    scores.iter_mut().for_each(|v| *v = u);
                }
            }
            _ => {}
        }
        Ok(scores)
    }

    fn supports_proba(&self) -> bool {
        self.kind.supports_proba()
    }
}

/// Fits one level-0 model. Deterministic for a fixed `config.seed`.
pub fn fit(
    kind: ClassifierKind,
    data: &TrainingSet<'_>,
    config: &FitConfig,
) -> Result<TrainedModel, ClassifyError> {
    data.validate()?;
    let (classes, y) = encode_labels(data.y);
    let n_classes = classes.len();
    if n_classes < 2 && kind != ClassifierKind::BaselineMajority {
        return Err(ClassifyError::DegenerateLabels { kind });
    }
    let x = data.x;
    let dim = data.n_features;
    let params = match kind {
        ClassifierKind::BaselineMajority => {
            let mut counts = vec![0usize; n_classes];
            y.iter().for_each(|&c| counts[c] += 1);
            // first maximum = lowest class index among ties
            let class = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
            ModelParams::Majority { class }
        }
        ClassifierKind::MultinomialNb => {
            ModelParams::NaiveBayes(naive_bayes::fit(x, &y, n_classes, dim, config.nb_alpha))
        }
        ClassifierKind::DecisionTree => ModelParams::Tree(tree::fit_tree(
            x,
            &y,
            n_classes,
            &tree::TreeSettings::from_config(config, None),
            config.seed,
        )),
        ClassifierKind::Knn => ModelParams::Knn(KnnParams::fit(x, &y, n_classes, config.knn_k)),
        ClassifierKind::LogisticRegression => ModelParams::Logistic(logistic::fit(
            x,
            &y,
            n_classes,
            dim,
            config.lr_lambda,
            config.lr_tol,
            config.lr_max_iter,
        )),
        ClassifierKind::RandomForest => {
            ModelParams::Forest(tree::fit_forest(x, &y, n_classes, dim, config))
        }
        ClassifierKind::LinearSvc => {
            ModelParams::LinearSvc(svm::fit_ovr(x, &y, n_classes, dim, config))
        }
        ClassifierKind::LinearSvcCalibrated => {
            let (linear, sigmoids) =
                calibration::fit_calibrated_svc(x, &y, n_classes, dim, config)?;
            ModelParams::CalibratedSvc { linear, sigmoids }
        }
    };
    Ok(TrainedModel {
        kind,
        classes,
        n_features: dim,
        params,
    })
}

pub fn predict(model: &dyn Classifier, x: &SparseVector) -> TeamId {
    model.predict(x)
}

pub fn predict_proba(
    model: &dyn Classifier,
    x: &SparseVector,
) -> Result<BTreeMap<TeamId, f64>, ClassifyError> {
    model.proba_map(x)
}

/// What to train: one level-0 kind or a stacked ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Single(ClassifierKind),
    Stacked(StackSpec),
}

impl LearnerSpec {
    pub fn label(&self) -> String {
        match self {
            LearnerSpec::Single(k) => k.display_name().to_owned(),
            LearnerSpec::Stacked(s) => s.label(),
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Single(k) => write!(f, "{k}"),
            LearnerSpec::Stacked(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = ClassifyError;

    /// Accepts a kind name, `selected-3`, `best-5`, or
    /// `selected:kind,kind,kind` / `best-3:kind,...` for explicit lists.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match StackSpec::from_str(s) {
            Ok(spec) => Ok(LearnerSpec::Stacked(spec)),
            Err(_) => ClassifierKind::from_str(s).map(LearnerSpec::Single),
        }
    }
}

/// A fitted single model or ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Single(TrainedModel),
    Stacked(EnsembleModel),
}

impl Model {
    pub fn describe(&self) -> String {
        match self {
            Model::Single(m) => m.kind().to_string(),
            Model::Stacked(e) => e.describe(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Single(m) => m.n_features(),
            Model::Stacked(e) => e.n_features(),
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> &[TeamId] {
        match self {
            Model::Single(m) => m.classes(),
            Model::Stacked(e) => e.classes(),
        }
    }

    fn predict_index(&self, x: &SparseVector) -> usize {
        match self {
            Model::Single(m) => m.predict_index(x),
            Model::Stacked(e) => e.predict_index(x),
        }
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifyError> {
        match self {
            Model::Single(m) => m.predict_proba(x),
            Model::Stacked(e) => e.predict_proba(x),
        }
    }

    fn supports_proba(&self) -> bool {
        match self {
            Model::Single(m) => m.supports_proba(),
            Model::Stacked(_) => true,
        }
    }
}

pub fn fit_learner(
    spec: &LearnerSpec,
    data: &TrainingSet<'_>,
    config: &FitConfig,
) -> Result<Model, ClassifyError> {
    match spec {
        LearnerSpec::Single(kind) => fit(*kind, data, config).map(Model::Single),
        LearnerSpec::Stacked(s) => {
            fit_stacked(s.mode, s.k, &s.kinds, data, config).map(Model::Stacked)
        }
    }
}
