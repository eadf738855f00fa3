//! Operational layer: model artifacts, the assignment service with its
//! feedback ledger and accuracy monitor, the HTTP API and configuration.

pub mod artifact;
pub mod config;
pub mod http;
pub mod ledger;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub use artifact::{train_job, train_on_reports, ArtifactError, ModelArtifact, TrainJob};
pub use config::ServiceConfig;
pub use http::{router, serve};
pub use ledger::{AssignmentRecord, Ledger, LedgerEvent};

use crate::classify::{Classifier, ClassifyError, FitConfig, LearnerSpec};
use crate::corpus::{CorpusError, TeamId, YearMonth};
use crate::driftmon::{DetectorConfig, DriftError, OnlineDetector};
use crate::eval::{daily_accuracy, AccuracySeries, EvalError};
use crate::explain::{explain, ExplainError, ExplainerConfig, Explanation};
use crate::textpipe::StopWords;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no model is loaded")]
    ServiceUnavailable,
    #[error("cannot assign: {0}")]
    AssignmentImpossible(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no training data: {0}")]
    NoTrainingData(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

impl ServiceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

/// A loaded artifact with its precomputed fingerprint.
#[derive(Debug)]
pub struct LoadedModel {
    pub artifact: ModelArtifact,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignRequest {
    pub report_id: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub opened_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub explain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignResponse {
    pub report_id: String,
    pub team: TeamId,
    pub model: String,
    pub explanation: Option<Explanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub report_id: String,
    pub final_team: TeamId,
    pub closed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStatus {
    pub day: NaiveDate,
    pub boundary: NaiveDate,
    pub pre_mean: f64,
    pub post_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStatus {
    pub series: AccuracySeries,
    pub change_points: Vec<NaiveDate>,
    pub alert: Option<DriftStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub format_version: u32,
    pub learner: String,
    pub fingerprint: String,
    pub classes: Vec<TeamId>,
    pub n_features: usize,
    pub training_span: (YearMonth, YearMonth),
    pub created_at: DateTime<Utc>,
    pub corpus_fingerprint: String,
    pub n_training_reports: usize,
}

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub detector: DetectorConfig,
    pub explainer: ExplainerConfig,
    pub learner: LearnerSpec,
    pub fit_config: FitConfig,
    pub stopwords: StopWords,
    pub corpus_path: Option<PathBuf>,
    pub artifact_path: Option<PathBuf>,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            explainer: ExplainerConfig::default(),
            learner: LearnerSpec::Single(crate::classify::ClassifierKind::LinearSvc),
            fit_config: FitConfig::default(),
            stopwords: StopWords::english(),
            corpus_path: None,
            artifact_path: None,
        }
    }
}

/// Shared service state. Assign calls read the current model through an
/// `Arc` snapshot, so a swap never affects a request in flight; ledger
/// writes go through one mutex.
pub struct AssignmentService {
    model: RwLock<Option<Arc<LoadedModel>>>,
    ledger: Mutex<Ledger>,
    settings: ServiceSettings,
}

impl AssignmentService {
    pub fn new(settings: ServiceSettings, ledger: Ledger) -> Self {
        Self {
            model: RwLock::new(None),
            ledger: Mutex::new(ledger),
            settings,
        }
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    /// Publishes a new model; returns the one it replaced.
    pub fn install(&self, artifact: ModelArtifact) -> Option<Arc<LoadedModel>> {
        let loaded = Arc::new(LoadedModel {
            fingerprint: artifact.model_fingerprint(),
            artifact,
        });
        log::info!(
            "serving model {} ({})",
            loaded.fingerprint,
            loaded.artifact.learner
        );
        self.model.write().expect("model lock").replace(loaded)
    }

    pub fn current(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().expect("model lock").clone()
    }

    pub fn assign(&self, req: AssignRequest) -> Result<AssignResponse, ServiceError> {
        if req.report_id.trim().is_empty() {
            return Err(ServiceError::BadRequest("report_id is empty".into()));
        }
        let model = self.current().ok_or(ServiceError::ServiceUnavailable)?;
        if self
            .ledger
            .lock()
            .expect("ledger lock")
            .contains(&req.report_id)
        {
            return Err(ServiceError::Conflict(format!(
                "report {} is already assigned",
                req.report_id
            )));
        }
        let art = &model.artifact;
        let tokens = art.pipeline.tokens(&req.summary, &req.description);
        if tokens.is_empty() {
            return Err(ServiceError::AssignmentImpossible(
                "the report has no usable text".into(),
            ));
        }
        let x = art.pipeline.vectorize_tokens(&tokens);
        if x.is_empty() {
            return Err(ServiceError::AssignmentImpossible(
                "none of the report's terms are known to the model".into(),
            ));
        }
        let team = art.model.predict(&x);
        let explanation = if req.explain {
            match explain(
                &req.report_id,
                &tokens,
                &art.model,
                &art.pipeline,
                &self.settings.explainer,
            ) {
                Ok(e) => Some(e),
                Err(ExplainError::Unsupported(why)) => {
                    log::debug!("no explanation for {}: {why}", req.report_id);
                    None
                }
                Err(e) => return Err(ServiceError::BadRequest(e.to_string())),
            }
        } else {
            None
        };
        let now = Utc::now();
        let record = AssignmentRecord {
            report_id: req.report_id.clone(),
            opened_at: req.opened_at.unwrap_or(now),
            predicted_team: team.clone(),
            predicted_at: now,
            model_fingerprint: model.fingerprint.clone(),
            final_team: None,
            closed_at: None,
        };
        self.ledger
            .lock()
            .expect("ledger lock")
            .record(LedgerEvent::Assigned(record))?;
        Ok(AssignResponse {
            report_id: req.report_id,
            team,
            model: model.fingerprint.clone(),
            explanation,
        })
    }

    pub fn feedback(&self, req: FeedbackRequest) -> Result<AssignmentRecord, ServiceError> {
        self.ledger
            .lock()
            .expect("ledger lock")
            .record(LedgerEvent::Closed {
                report_id: req.report_id,
                final_team: req.final_team,
                closed_at: req.closed_at,
            })
    }

    pub fn record(&self, report_id: &str) -> Option<AssignmentRecord> {
        self.ledger
            .lock()
            .expect("ledger lock")
            .get(report_id)
            .cloned()
    }

    /// Daily accuracy of closed assignments, optionally restricted to a date
    /// range, with the drift detector replayed over the whole series.
    pub fn accuracy(
        &self,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<AccuracyStatus, ServiceError> {
        let series = {
            let ledger = self.ledger.lock().expect("ledger lock");
            daily_accuracy(
                ledger
                    .records()
                    .filter_map(|r| r.correct().map(|c| (r.opened_at, c))),
            )
        };
        let mut det = OnlineDetector::new(self.settings.detector)?;
        let mut alert = None;
        for p in &series.points {
            if let Some(a) = det.push(p.accuracy) {
                alert = Some(a);
            }
        }
        let day = |i: usize| series.points[i].day;
        Ok(AccuracyStatus {
            change_points: det.change_points().into_iter().map(day).collect(),
            alert: alert.map(|a| DriftStatus {
                day: day(a.day - 1),
                boundary: day(a.boundary - 1),
                pre_mean: a.pre_mean,
                post_mean: a.post_mean,
            }),
            series: series.filter_range(from, to),
        })
    }

    pub fn model_info(&self) -> Result<ModelInfo, ServiceError> {
        let m = self.current().ok_or(ServiceError::ServiceUnavailable)?;
        let a = &m.artifact;
        Ok(ModelInfo {
            format_version: a.format_version,
            learner: a.learner.clone(),
            fingerprint: m.fingerprint.clone(),
            classes: a.classes().to_vec(),
            n_features: a.pipeline.dim(),
            training_span: a.training_span,
            created_at: a.created_at,
            corpus_fingerprint: a.corpus_fingerprint.clone(),
            n_training_reports: a.n_training_reports,
        })
    }

    /// Trains on the configured corpus as of `as_of` (default: the current
    /// month), persists the artifact if a path is configured, and swaps it in.
    pub fn retrain(
        &self,
        as_of: Option<YearMonth>,
        learner: Option<LearnerSpec>,
    ) -> Result<ModelInfo, ServiceError> {
        let corpus = self
            .settings
            .corpus_path
            .as_ref()
            .ok_or_else(|| ServiceError::BadRequest("no corpus path configured".into()))?;
        let job = TrainJob {
            as_of: as_of.unwrap_or_else(|| YearMonth::of(&Utc::now())),
            learner: learner.unwrap_or_else(|| self.settings.learner.clone()),
            fit_config: self.settings.fit_config.clone(),
            stopwords: self.settings.stopwords.clone(),
        };
        let loaded = crate::corpus::load_corpus(corpus, crate::corpus::CorpusFormat::Jsonl)?;
        let artifact = train_on_reports(&loaded.reports, &job)?;
        if let Some(path) = &self.settings.artifact_path {
            artifact.save(path)?;
        }
        self.install(artifact);
        self.model_info()
    }
}
