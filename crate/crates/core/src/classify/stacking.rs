//! Stacked generalization: level-0 probability outputs feed a multinomial
//! logistic-regression level-1 model.
//!
//! Level-1 training features are out-of-fold level-0 probabilities from an
//! internal stratified split, so the meta-model never sees level-0 outputs
//! on samples those models were trained on.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::folds::{split, stratified_folds};
use super::{
    argmax, encode_labels, fit, Classifier, ClassifierKind, ClassifyError, FitConfig, TrainedModel,
    TrainingSet,
};
use crate::corpus::TeamId;
use crate::textpipe::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StackMode {
    /// The k most accurate members of a candidate pool.
    Best,
    /// An explicitly configured, diversified set of k kinds.
    Selected,
}

/// Ensemble recipe. For `Best`, `kinds` is the pool to rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackSpec {
    pub mode: StackMode,
    pub k: usize,
    pub kinds: Vec<ClassifierKind>,
}

impl StackSpec {
    pub fn selected3() -> Self {
        Self {
            mode: StackMode::Selected,
            k: 3,
            kinds: vec![
                ClassifierKind::LinearSvcCalibrated,
                ClassifierKind::Knn,
                ClassifierKind::MultinomialNb,
            ],
        }
    }

    pub fn selected5() -> Self {
        Self {
            mode: StackMode::Selected,
            k: 5,
            kinds: vec![
                ClassifierKind::LinearSvcCalibrated,
                ClassifierKind::LogisticRegression,
                ClassifierKind::Knn,
                ClassifierKind::RandomForest,
                ClassifierKind::MultinomialNb,
            ],
        }
    }

    /// Every probability-capable kind, in canonical order.
    pub fn full_pool() -> Vec<ClassifierKind> {
        ClassifierKind::ALL
            .into_iter()
            .filter(|k| k.supports_proba())
            .collect()
    }

    pub fn best(k: usize) -> Self {
        Self {
            mode: StackMode::Best,
            k,
            kinds: Self::full_pool(),
        }
    }

    pub fn label(&self) -> String {
        let mode = match self.mode {
            StackMode::Best => "BEST",
            StackMode::Selected => "SELECTED",
        };
        format!("{mode}-{}", self.k)
    }
}

impl fmt::Display for StackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kinds: Vec<&str> = self.kinds.iter().map(|k| k.as_str()).collect();
        write!(
            f,
            "{}:{}",
            self.label().to_ascii_lowercase(),
            kinds.join(",")
        )
    }
}

impl FromStr for StackSpec {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ClassifyError::InvalidEnsemble(format!("cannot parse {s:?}"));
        let lower = s.trim().to_ascii_lowercase();
        let (head, list) = match lower.split_once(':') {
            Some((h, l)) => (h.to_owned(), Some(l.to_owned())),
            None => (lower.clone(), None),
        };
        let (mode, k) = match head.split_once('-') {
            Some((m, k)) => (m.to_owned(), Some(k.parse::<usize>().map_err(|_| bad())?)),
            None => (head.clone(), None),
        };
        let mode = match mode.as_str() {
            "best" => StackMode::Best,
            "selected" => StackMode::Selected,
            _ => return Err(bad()),
        };
        let kinds = match list {
            Some(l) => l
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(ClassifierKind::from_str)
                .collect::<Result<Vec<_>, _>>()?,
            None => match (mode, k) {
                (StackMode::Selected, Some(3)) => Self::selected3().kinds,
                (StackMode::Selected, Some(5)) => Self::selected5().kinds,
                (StackMode::Best, Some(_)) => Self::full_pool(),
                _ => return Err(bad()),
            },
        };
        let k = match (mode, k) {
            (_, Some(k)) => k,
            (StackMode::Selected, None) => kinds.len(),
            (StackMode::Best, None) => return Err(bad()),
        };
        Ok(Self { mode, k, kinds })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    mode: StackMode,
    level0: Vec<TrainedModel>,
    level1: TrainedModel,
    /// Internal out-of-fold accuracy of every candidate considered.
    ranking: Vec<(ClassifierKind, f64)>,
}

impl EnsembleModel {
    /// Assembles an ensemble from fitted parts. The level-1 model must be a
    /// probability-capable model over `k * C` features.
    pub fn from_parts(
        mode: StackMode,
        level0: Vec<TrainedModel>,
        level1: TrainedModel,
    ) -> Result<Self, ClassifyError> {
        let Some(first) = level0.first() else {
            return Err(ClassifyError::InvalidEnsemble("no level-0 models".into()));
        };
        let classes = first.classes();
        if level0
            .iter()
            .any(|m| m.classes() != classes || !m.supports_proba())
        {
            return Err(ClassifyError::InvalidEnsemble(
                "level-0 models must share classes and provide probabilities".into(),
            ));
        }
        let kinds: BTreeSet<_> = level0.iter().map(TrainedModel::kind).collect();
        if kinds.len() != level0.len() {
            return Err(ClassifyError::InvalidEnsemble(
                "level-0 kinds must be distinct".into(),
            ));
        }
        if level1.classes() != classes
            || level1.n_features() != level0.len() * classes.len()
            || !level1.supports_proba()
        {
            return Err(ClassifyError::InvalidEnsemble(
                "level-1 model does not match level-0 outputs".into(),
            ));
        }
        Ok(Self {
            mode,
            level0,
            level1,
            ranking: Vec::new(),
        })
    }

    pub fn mode(&self) -> StackMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.level0.len()
    }

    pub fn level0(&self) -> &[TrainedModel] {
        &self.level0
    }

    pub fn level1(&self) -> &TrainedModel {
        &self.level1
    }

    pub fn kinds(&self) -> Vec<ClassifierKind> {
        self.level0.iter().map(TrainedModel::kind).collect()
    }

    /// Out-of-fold accuracy of every pool member, in pool order.
    pub fn ranking(&self) -> &[(ClassifierKind, f64)] {
        &self.ranking
    }

    pub fn n_features(&self) -> usize {
        self.level0[0].n_features()
    }

    pub fn describe(&self) -> String {
        let spec = StackSpec {
            mode: self.mode,
            k: self.k(),
            kinds: self.kinds(),
        };
        spec.to_string()
    }

    /// Concatenated level-0 probabilities: the level-1 input.
    pub fn meta_features(&self, x: &SparseVector) -> SparseVector {
        let mut dense = Vec::with_capacity(self.level0.len() * self.classes().len());
        for m in &self.level0 {
            dense.extend(
                m.predict_proba(x)
                    .expect("level-0 models provide probabilities"),
            );
        }
        SparseVector::from_dense(&dense)
    }
}

impl Classifier for EnsembleModel {
    fn classes(&self) -> &[TeamId] {
        self.level1.classes()
    }

    fn predict_index(&self, x: &SparseVector) -> usize {
        self.level1.predict_index(&self.meta_features(x))
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, ClassifyError> {
        self.level1.predict_proba(&self.meta_features(x))
    }

    fn supports_proba(&self) -> bool {
        true
    }
}

/// Sorts the pool by descending accuracy, ties keeping pool order, and
/// returns the first `k`.
pub fn rank_pool(scored: &[(ClassifierKind, f64)], k: usize) -> Vec<ClassifierKind> {
    let mut order: Vec<&(ClassifierKind, f64)> = scored.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order.into_iter().take(k).map(|&(kind, _)| kind).collect()
}

fn subset<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Out-of-fold probability rows for one kind.
fn out_of_fold(
    kind: ClassifierKind,
    data: &TrainingSet<'_>,
    fold_of: &[usize],
    n_folds: usize,
    n_classes: usize,
    config: &FitConfig,
) -> Result<Vec<Vec<f64>>, ClassifyError> {
    let mut rows = vec![vec![0.0; n_classes]; data.x.len()];
    for f in 0..n_folds {
        let (train, test) = split(fold_of, f);
        let xt = subset(data.x, &train);
        let yt = subset(data.y, &train);
        let model = fit(kind, &TrainingSet::new(&xt, &yt, data.n_features), config)?;
        for &i in &test {
            rows[i] = model.predict_proba(&data.x[i])?;
        }
    }
    Ok(rows)
}

pub fn fit_stacked(
    mode: StackMode,
    k: usize,
    kinds: &[ClassifierKind],
    data: &TrainingSet<'_>,
    config: &FitConfig,
) -> Result<EnsembleModel, ClassifyError> {
    if k != 3 && k != 5 {
        return Err(ClassifyError::InvalidEnsemble(format!(
            "k must be 3 or 5, got {k}"
        )));
    }
    if let Some(bad) = kinds.iter().find(|kind| !kind.supports_proba()) {
        return Err(ClassifyError::Unsupported(bad.to_string()));
    }
    if kinds.iter().collect::<BTreeSet<_>>().len() != kinds.len() {
        return Err(ClassifyError::InvalidEnsemble(
            "duplicate level-0 kinds".into(),
        ));
    }
    match mode {
        StackMode::Selected if kinds.len() != k => {
            return Err(ClassifyError::InvalidEnsemble(format!(
                "SELECTED-{k} needs exactly {k} kinds, got {}",
                kinds.len()
            )))
        }
        StackMode::Best if kinds.len() < k => {
            return Err(ClassifyError::InvalidEnsemble(format!(
                "BEST-{k} pool has only {} kinds",
                kinds.len()
            )))
        }
        _ => {}
    }
    data.validate()?;
    let (classes, y) = encode_labels(data.y);
    let n_classes = classes.len();
    if n_classes < 2 {
        return Err(ClassifyError::DegenerateLabels {
            kind: ClassifierKind::LogisticRegression,
        });
    }
    let n_folds = config.stack_folds.max(2);
    let mut counts = vec![0usize; n_classes];
    y.iter().for_each(|&c| counts[c] += 1);
    if let Some(c) = counts.iter().position(|&n| n < 2 * n_folds) {
        return Err(ClassifyError::InsufficientData(format!(
            "class {} has {} samples; stacking needs at least {} ({} per fold)",
            classes[c],
            counts[c],
            2 * n_folds,
            2
        )));
    }
    let fold_of = stratified_folds(&y, n_classes, n_folds, config.seed);

    let mut oof = Vec::with_capacity(kinds.len());
    let mut ranking = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let rows = out_of_fold(kind, data, &fold_of, n_folds, n_classes, config)?;
        let correct = rows.iter().zip(&y).filter(|(r, &t)| argmax(r) == t).count();
        ranking.push((kind, correct as f64 / y.len() as f64));
        oof.push(rows);
    }
    let chosen: Vec<ClassifierKind> = match mode {
        StackMode::Selected => kinds.to_vec(),
        StackMode::Best => {
            let top: BTreeSet<_> = rank_pool(&ranking, k).into_iter().collect();
            kinds
                .iter()
                .copied()
                .filter(|kind| top.contains(kind))
                .collect()
        }
    };

    let meta_x: Vec<SparseVector> = (0..y.len())
        .map(|i| {
            let mut dense = Vec::with_capacity(chosen.len() * n_classes);
            for kind in &chosen {
                let at = kinds
                    .iter()
                    .position(|k| k == kind)
                    .expect("chosen from kinds");
                dense.extend_from_slice(&oof[at][i]);
            }
            SparseVector::from_dense(&dense)
        })
        .collect();
    let level1 = fit(
        ClassifierKind::LogisticRegression,
        &TrainingSet::new(&meta_x, data.y, chosen.len() * n_classes),
        config,
    )?;
    let level0 = chosen
        .iter()
        .map(|&kind| fit(kind, data, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleModel {
        mode,
        level0,
        level1,
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_pool_breaks_ties_by_pool_order() {
        let scored = [
            (ClassifierKind::MultinomialNb, 0.8),
            (ClassifierKind::Knn, 0.9),
            (ClassifierKind::DecisionTree, 0.8),
            (ClassifierKind::RandomForest, 0.7),
        ];
        assert_eq!(
            rank_pool(&scored, 3),
            [
                ClassifierKind::Knn,
                ClassifierKind::MultinomialNb,
                ClassifierKind::DecisionTree
            ]
        );
    }

    #[test]
    fn spec_parsing() {
        let s: StackSpec = "best-5".parse().unwrap();
        assert_eq!((s.mode, s.k, s.kinds.len()), (StackMode::Best, 5, 6));
        let s: StackSpec = "selected:knn,nb,logistic".parse().unwrap();
        assert_eq!(s.k, 3);
        assert_eq!(
            s.to_string(),
            "selected-3:knn,multinomial_nb,logistic_regression"
        );
        assert_eq!(s.to_string().parse::<StackSpec>().unwrap(), s);
        assert!("best".parse::<StackSpec>().is_err());
        assert!("worst-3".parse::<StackSpec>().is_err());
    }

    #[test]
    fn rejects_bad_compositions() {
        let x = vec![SparseVector::from_pairs(vec![(0, 1.0)])];
        let y = vec![TeamId::new("A").unwrap()];
        let data = TrainingSet::new(&x, &y, 1);
        let cfg = FitConfig::default();
        assert!(matches!(
            fit_stacked(
                StackMode::Selected,
                4,
                &StackSpec::selected3().kinds,
                &data,
                &cfg
            ),
            Err(ClassifyError::InvalidEnsemble(_))
        ));
        assert!(matches!(
            fit_stacked(
                StackMode::Selected,
                3,
                &[
                    ClassifierKind::LinearSvc,
                    ClassifierKind::Knn,
                    ClassifierKind::MultinomialNb
                ],
                &data,
                &cfg
            ),
            Err(ClassifyError::Unsupported(_))
        ));
        assert!(matches!(
            fit_stacked(
                StackMode::Selected,
                3,
                &[
                    ClassifierKind::Knn,
                    ClassifierKind::Knn,
                    ClassifierKind::MultinomialNb
                ],
                &data,
                &cfg
            ),
            Err(ClassifyError::InvalidEnsemble(_))
        ));
    }
}
