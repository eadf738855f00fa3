//! Assignment-quality metrics and the evaluation protocols: stratified
//! k-fold cross validation, train/test evaluation, sliding and cumulative
//! window studies, daily accuracy, solution times and effort savings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use chrono::{DateTime, Months, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::classify::folds::{split, stratified_folds};
use crate::classify::{
    encode_labels, fit_learner, Classifier, ClassifyError, FitConfig, LearnerSpec, Model,
    TrainingSet,
};
use crate::corpus::{filter_closed, ground_truth, month_slice, IssueReport, TeamId, YearMonth};
use crate::textpipe::{preprocess, SparseVector, StopWords, TextError, TextPipeline};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no feasible (test month, delta) cell")]
    EmptyStudy,
    #[error("no closed reports on the {0} side of the deployment date")]
    OneSidedData(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub team: TeamId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub n: usize,
    #[serde(with = "duration_secs")]
    pub training_time: Duration,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?.max(0.0)))
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus per-class and support-weighted precision, recall and F1.
///
/// The class table covers `class_set` plus every label seen in either
/// sequence. A class never predicted has precision 0.
pub fn compute_metrics(
    y_true: &[TeamId],
    y_pred: &[TeamId],
    class_set: &[TeamId],
) -> Result<MetricsReport, EvalError> {
    if y_true.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    if y_true.len() != y_pred.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let classes: BTreeSet<&TeamId> = class_set.iter().chain(y_true).chain(y_pred).collect();
    // (true positives, predicted, support)
    let mut counts: BTreeMap<&TeamId, (usize, usize, usize)> =
        classes.into_iter().map(|c| (c, (0, 0, 0))).collect();
    let mut correct = 0;
    for (t, p) in y_true.iter().zip(y_pred) {
        counts.get_mut(t).expect("known class").2 += 1;
        counts.get_mut(p).expect("known class").1 += 1;
        if t == p {
            counts.get_mut(t).expect("known class").0 += 1;
            correct += 1;
        }
    }
    let n = y_true.len();
    let per_class: Vec<ClassMetrics> = counts
        .into_iter()
        .map(|(team, (tp, predicted, support))| {
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                team: team.clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| c.support as f64 * f(c))
            .sum::<f64>()
            / n as f64
    };
    Ok(MetricsReport {
        accuracy: ratio(correct, n),
        weighted_precision: weighted(|c| c.precision),
        // support * (tp / support) summed over classes is the number correct
        weighted_recall: ratio(correct, n),
        weighted_f1: weighted(|c| c.f1),
        per_class,
        n,
        training_time: Duration::ZERO,
    })
}

/// Fold accuracies of a stratified cross validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
    pub excluded_classes: Vec<TeamId>,
}

impl fmt::Display for CvReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} (+/- {:.2})", self.mean, self.std)
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Stratified k-fold cross validation. Classes with fewer than `k_folds`
/// members are dropped and listed in the report.
pub fn kfold_cv(
    spec: &LearnerSpec,
    x: &[SparseVector],
    y: &[TeamId],
    n_features: usize,
    k_folds: usize,
    config: &FitConfig,
) -> Result<CvReport, EvalError> {
    if k_folds < 2 {
        return Err(EvalError::InvalidInput("k_folds must be at least 2".into()));
    }
    if x.len() != y.len() {
        return Err(EvalError::InvalidInput("x and y lengths differ".into()));
    }
    let mut support: BTreeMap<&TeamId, usize> = BTreeMap::new();
    for t in y {
        *support.entry(t).or_default() += 1;
    }
    let excluded: Vec<TeamId> = support
        .iter()
        .filter(|(_, &n)| n < k_folds)
        .map(|(&t, _)| t.clone())
        .collect();
    for t in &excluded {
        log::warn!(
            "class {t} has fewer than {k_folds} reports and is left out of cross validation"
        );
    }
    let keep: Vec<usize> = (0..y.len())
        .filter(|&i| !excluded.contains(&y[i]))
        .collect();
    if keep.len() < k_folds {
        return Err(EvalError::InsufficientData(format!(
            "{} usable samples for {k_folds} folds",
            keep.len()
        )));
    }
    let xs: Vec<SparseVector> = keep.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<TeamId> = keep.iter().map(|&i| y[i].clone()).collect();
    let (classes, codes) = encode_labels(&ys);
    let fold_of = stratified_folds(&codes, classes.len(), k_folds, config.seed);
    let fold_accuracies = (0..k_folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split(&fold_of, f);
            let xt: Vec<SparseVector> = train.iter().map(|&i| xs[i].clone()).collect();
            let yt: Vec<TeamId> = train.iter().map(|&i| ys[i].clone()).collect();
            let model = fit_learner(spec, &TrainingSet::new(&xt, &yt, n_features), config)?;
            let correct = test
                .iter()
                .filter(|&&i| model.predict(&xs[i]) == ys[i])
                .count();
            Ok(ratio(correct, test.len()))
        })
        .collect::<Result<Vec<f64>, ClassifyError>>()?;
    let (mean, std) = mean_std(&fold_accuracies);
    Ok(CvReport {
        fold_accuracies,
        mean,
        std,
        excluded_classes: excluded,
    })
}

/// Vectorized training data: the fitted pipeline, feature vectors and labels.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pipeline: TextPipeline,
    pub x: Vec<SparseVector>,
    pub y: Vec<TeamId>,
    /// Ids of closed reports skipped because their text is empty after preprocessing.
    pub skipped: Vec<String>,
}

impl Prepared {
    pub fn training_set(&self) -> TrainingSet<'_> {
        TrainingSet::new(&self.x, &self.y, self.pipeline.dim())
    }
}

/// Builds the vocabulary and vectors from the closed reports among `reports`.
pub fn prepare(reports: &[IssueReport], stopwords: &StopWords) -> Result<Prepared, EvalError> {
    let mut docs = Vec::new();
    let mut y = Vec::new();
    let mut skipped = Vec::new();
    for r in reports.iter().filter(|r| r.is_closed()) {
        let tokens = preprocess(r, stopwords);
        if tokens.is_empty() {
            skipped.push(r.id.clone());
            continue;
        }
        docs.push(tokens);
        y.push(ground_truth(r)?.clone());
    }
    let pipeline = TextPipeline::fit(&docs, stopwords.clone())?;
    let x = docs.iter().map(|d| pipeline.vectorize_tokens(d)).collect();
    Ok(Prepared {
        pipeline,
        x,
        y,
        skipped,
    })
}

/// Vectorizes closed, non-empty test reports with an existing pipeline.
pub fn vectorize_test(
    pipeline: &TextPipeline,
    reports: &[IssueReport],
) -> Result<(Vec<SparseVector>, Vec<TeamId>), EvalError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in reports.iter().filter(|r| r.is_closed()) {
        let tokens = preprocess(r, &pipeline.stopwords);
        if tokens.is_empty() {
            continue;
        }
        x.push(pipeline.vectorize_tokens(&tokens));
        y.push(ground_truth(r)?.clone());
    }
    Ok((x, y))
}

pub fn evaluate_model(
    model: &dyn Classifier,
    x: &[SparseVector],
    y: &[TeamId],
) -> Result<MetricsReport, EvalError> {
    let pred: Vec<TeamId> = x.iter().map(|v| model.predict(v)).collect();
    compute_metrics(y, &pred, model.classes())
}

/// One line of a Table-1-style comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub learner: String,
    pub cv: Option<CvReport>,
    pub test: MetricsReport,
}

/// Fits each learner on the training reports, cross-validates it there and
/// scores it on the test reports.
pub fn evaluate_learners(
    train: &[IssueReport],
    test: &[IssueReport],
    learners: &[LearnerSpec],
    stopwords: &StopWords,
    cv_folds: Option<usize>,
    config: &FitConfig,
) -> Result<Vec<TableRow>, EvalError> {
    let prepared = prepare(train, stopwords)?;
    let (tx, ty) = vectorize_test(&prepared.pipeline, test)?;
    learners
        .iter()
        .map(|spec| {
            let cv = cv_folds
                .map(|k| {
                    kfold_cv(
                        spec,
                        &prepared.x,
                        &prepared.y,
                        prepared.pipeline.dim(),
                        k,
                        config,
                    )
                })
                .transpose()?;
            let started = Instant::now();
            let model = fit_learner(spec, &prepared.training_set(), config)?;
            let training_time = started.elapsed();
            let mut metrics = evaluate_model(&model, &tx, &ty)?;
            metrics.training_time = training_time;
            Ok(TableRow {
                learner: spec.label(),
                cv,
                test: metrics,
            })
        })
        .collect()
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<28} {:>16} {:>6} {:>6} {:>6} {:>6} {:>10}\n",
        "classifier", "cv accuracy", "A", "P", "R", "F", "train (s)"
    );
    for r in rows {
        let cv =
            r.cv.as_ref()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<28} {:>16} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>10.2}\n",
            r.learner,
            cv,
            r.test.accuracy,
            r.test.weighted_precision,
            r.test.weighted_recall,
            r.test.weighted_f1,
            r.test.training_time.as_secs_f64()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowProtocol {
    Sliding,
    Cumulative,
}

impl WindowProtocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowProtocol::Sliding => "sliding",
            WindowProtocol::Cumulative => "cumulative",
        }
    }
}

impl std::str::FromStr for WindowProtocol {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sliding" => Ok(Self::Sliding),
            "cumulative" => Ok(Self::Cumulative),
            other => Err(EvalError::InvalidInput(format!(
                "unknown protocol {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub test_month: YearMonth,
    pub delta: usize,
    pub protocol: WindowProtocol,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub test_month: YearMonth,
    pub delta: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStudy {
    pub protocol: WindowProtocol,
    pub results: Vec<WindowResult>,
    pub skipped: Vec<SkippedCell>,
}

/// Trains on month(s) before each test month and tests on it, for every
/// feasible `(test month, delta)` with `delta <= max_delta`. Cells whose
/// training or test data is empty or single-class are skipped.
pub fn window_study(
    protocol: WindowProtocol,
    reports: &[IssueReport],
    months: (YearMonth, YearMonth),
    max_delta: usize,
    spec: &LearnerSpec,
    stopwords: &StopWords,
    config: &FitConfig,
) -> Result<WindowStudy, EvalError> {
    let closed = filter_closed(reports);
    let all: Vec<YearMonth> = YearMonth::range(months.0, months.1).collect();
    if all.len() < 2 || max_delta == 0 {
        return Err(EvalError::EmptyStudy);
    }
    let per_month: Vec<Vec<IssueReport>> = all
        .iter()
        .map(|&m| month_slice(&closed, m, m).map(|s| s.reports))
        .collect::<Result<_, _>>()?;
    let cells: Vec<(usize, usize)> = (1..all.len())
        .flat_map(|i| (1..=max_delta.min(i)).map(move |d| (i, d)))
        .collect();
    let outcomes: Vec<Result<WindowResult, SkippedCell>> = cells
        .par_iter()
        .map(|&(i, delta)| {
            let skip = |reason: String| SkippedCell {
                test_month: all[i],
                delta,
                reason,
            };
            let train: Vec<IssueReport> = match protocol {
                WindowProtocol::Sliding => per_month[i - delta].clone(),
                WindowProtocol::Cumulative => per_month[i - delta..i].concat(),
            };
            let prepared = prepare(&train, stopwords).map_err(|e| skip(e.to_string()))?;
            let (tx, ty) = vectorize_test(&prepared.pipeline, &per_month[i])
                .map_err(|e| skip(e.to_string()))?;
            if ty.is_empty() {
                return Err(skip("empty test month".into()));
            }
            let model: Model = fit_learner(spec, &prepared.training_set(), config)
                .map_err(|e| skip(e.to_string()))?;
            let correct = tx
                .iter()
                .zip(&ty)
                .filter(|(v, t)| &model.predict(v) == *t)
                .count();
            Ok(WindowResult {
                test_month: all[i],
                delta,
                protocol,
                accuracy: ratio(correct, ty.len()),
                n_train: prepared.y.len(),
                n_test: ty.len(),
            })
        })
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    if results.is_empty() {
        return Err(EvalError::EmptyStudy);
    }
    Ok(WindowStudy {
        protocol,
        results,
        skipped,
    })
}

pub fn sliding_window_study(
    reports: &[IssueReport],
    months: (YearMonth, YearMonth),
    max_delta: usize,
    spec: &LearnerSpec,
    stopwords: &StopWords,
    config: &FitConfig,
) -> Result<WindowStudy, EvalError> {
    window_study(
        WindowProtocol::Sliding,
        reports,
        months,
        max_delta,
        spec,
        stopwords,
        config,
    )
}

pub fn cumulative_window_study(
    reports: &[IssueReport],
    months: (YearMonth, YearMonth),
    max_delta: usize,
    spec: &LearnerSpec,
    stopwords: &StopWords,
    config: &FitConfig,
) -> Result<WindowStudy, EvalError> {
    window_study(
        WindowProtocol::Cumulative,
        reports,
        months,
        max_delta,
        spec,
        stopwords,
        config,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaAggregate {
    pub delta: usize,
    pub mean_accuracy: f64,
    pub n_cells: usize,
}

impl WindowStudy {
    /// Mean accuracy per delta, ascending.
    pub fn aggregate(&self) -> Vec<DeltaAggregate> {
        let mut by_delta: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &self.results {
            by_delta.entry(r.delta).or_default().push(r.accuracy);
        }
        by_delta
            .into_iter()
            .map(|(delta, v)| DeltaAggregate {
                delta,
                mean_accuracy: v.iter().sum::<f64>() / v.len() as f64,
                n_cells: v.len(),
            })
            .collect()
    }

    pub fn mean_at(&self, delta: usize) -> Option<f64> {
        self.aggregate()
            .into_iter()
            .find(|a| a.delta == delta)
            .map(|a| a.mean_accuracy)
    }

    /// Least-squares trend of cell accuracy against delta.
    pub fn trend(&self) -> Option<TrendFit> {
        let pts: Vec<(f64, f64)> = self
            .results
            .iter()
            .map(|r| (r.delta as f64, r.accuracy))
            .collect();
        linear_trend(&pts)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test_month", "protocol", "delta", "accuracy"])?;
        for r in &self.results {
            w.write_record([
                r.test_month.to_string(),
                r.protocol.as_str().to_owned(),
                r.delta.to_string(),
                format!("{:.6}", r.accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delta", "mean_accuracy", "n_cells"])?;
        for a in self.aggregate() {
            w.write_record([
                a.delta.to_string(),
                format!("{:.6}", a.mean_accuracy),
                a.n_cells.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided p-value of the slope t-test.
    pub p_value: f64,
    pub n: usize,
}

pub fn linear_trend(points: &[(f64, f64)]) -> Option<TrendFit> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let p_value = if se == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        2.0 * t.sf((slope / se).abs())
    };
    Some(TrendFit {
        slope,
        intercept,
        p_value,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayAccuracy {
    pub day: NaiveDate,
    pub accuracy: f64,
    pub n_reports: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracySeries {
    pub points: Vec<DayAccuracy>,
}

impl AccuracySeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.accuracy).collect()
    }

    pub fn filter_range(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        Self {
            points: self
                .points
                .iter()
                .filter(|p| from.is_none_or(|f| p.day >= f) && to.is_none_or(|t| p.day <= t))
                .copied()
                .collect(),
        }
    }
}

/// Per-day accuracy keyed by the UTC opening day of each report. Each item
/// is `(opened_at, correct)`.
pub fn daily_accuracy<I>(outcomes: I) -> AccuracySeries
where
    I: IntoIterator<Item = (DateTime<Utc>, bool)>,
{
    let mut days: BTreeMap<NaiveDate, (usize, usize)> = BTreeMap::new();
    for (opened, correct) in outcomes {
        let e = days.entry(opened.date_naive()).or_default();
        e.1 += 1;
        if correct {
            e.0 += 1;
        }
    }
    AccuracySeries {
        points: days
            .into_iter()
            .map(|(day, (c, n))| DayAccuracy {
                day,
                accuracy: ratio(c, n),
                n_reports: n,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionTimes {
    pub mean_before_days: f64,
    pub mean_after_days: f64,
    pub n_before: usize,
    pub n_after: usize,
}

/// Mean open-to-close time of closed reports opened within `window_months`
/// before and after `deployment`. Reports are bucketed by opening time.
pub fn solution_time_report(
    reports: &[IssueReport],
    deployment: DateTime<Utc>,
    window_months: u32,
) -> Result<SolutionTimes, EvalError> {
    let lo = deployment
        .checked_sub_months(Months::new(window_months))
        .ok_or_else(|| EvalError::InvalidInput("window out of range".into()))?;
    let hi = deployment
        .checked_add_months(Months::new(window_months))
        .ok_or_else(|| EvalError::InvalidInput("window out of range".into()))?;
    let mut before = Vec::new();
    let mut after = Vec::new();
    for r in reports {
        let Some(closed) = r.closed_at.filter(|_| r.is_closed()) else {
            continue;
        };
        let days = (closed - r.opened_at).num_milliseconds() as f64 / 86_400_000.0;
        if r.opened_at >= lo && r.opened_at < deployment {
            before.push(days);
        } else if r.opened_at >= deployment && r.opened_at < hi {
            after.push(days);
        }
    }
    if before.is_empty() {
        return Err(EvalError::OneSidedData("before"));
    }
    if after.is_empty() {
        return Err(EvalError::OneSidedData("after"));
    }
    Ok(SolutionTimes {
        mean_before_days: mean_std(&before).0,
        mean_after_days: mean_std(&after).0,
        n_before: before.len(),
        n_after: after.len(),
    })
}

pub const HOURS_PER_PERSON_MONTH: f64 = 160.0;

/// Person-months saved per year when `reports_per_month` manual assignments
/// of `seconds_per_assignment` each are automated.
pub fn effort_report(
    reports_per_month: f64,
    seconds_per_assignment: f64,
) -> Result<f64, EvalError> {
    if !(reports_per_month >= 0.0 && reports_per_month.is_finite()) {
        return Err(EvalError::InvalidInput(format!(
            "reports per month {reports_per_month}"
        )));
    }
    if !(seconds_per_assignment > 0.0 && seconds_per_assignment.is_finite()) {
        return Err(EvalError::InvalidInput(format!(
            "seconds per assignment {seconds_per_assignment}"
        )));
    }
    Ok(reports_per_month * seconds_per_assignment * 12.0 / (3600.0 * HOURS_PER_PERSON_MONTH))
}
