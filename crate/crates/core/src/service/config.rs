//! Service and CLI configuration, read from JSON or `key = value` lines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ServiceError, ServiceSettings};
use crate::classify::{FitConfig, LearnerSpec};
use crate::driftmon::DetectorConfig;
use crate::explain::ExplainerConfig;
use crate::textpipe::StopWords;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Kind name, `selected-3`, `best-5`, or `selected:knn,multinomial_nb,...`.
    pub learner: String,
    pub knn_k: usize,
    pub seed: u64,
    pub explain_k: usize,
    pub explain_samples: usize,
    pub explain_seed: u64,
    pub kernel_width: f64,
    pub penalty: f64,
    pub min_segment: usize,
    pub min_history: usize,
    pub corpus: Option<PathBuf>,
    pub artifact: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    /// Stop-word file; the built-in English list when unset.
    pub stopwords: Option<PathBuf>,
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        let ex = ExplainerConfig::default();
        let det = DetectorConfig::default();
        Self {
            learner: "linear_svc".into(),
            knn_k: fit.knn_k,
            seed: fit.seed,
            explain_k: ex.k,
            explain_samples: ex.n_samples,
            explain_seed: ex.seed,
            kernel_width: ex.kernel_width,
            penalty: det.penalty,
            min_segment: det.min_segment,
            min_history: det.min_history,
            corpus: None,
            artifact: None,
            ledger: None,
            stopwords: None,
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl ServiceConfig {
    /// JSON if the text starts with `{`, otherwise `key = value` lines with
    /// `#` comments. Values that parse as JSON scalars keep their type.
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let bad = |msg: String| ServiceError::BadRequest(msg);
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")));
        }
        let mut map = Map::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("config line {}: expected key = value", i + 1)))?;
            let value = value.trim();
            let parsed = match serde_json::from_str::<Value>(value) {
                Ok(v) if !v.is_object() && !v.is_array() => v,
                _ => Value::String(value.to_owned()),
            };
            map.insert(key.trim().to_owned(), parsed);
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| bad(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn learner_spec(&self) -> Result<LearnerSpec, ServiceError> {
        self.learner.parse().map_err(ServiceError::Classify)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            seed: self.seed,
            knn_k: self.knn_k,
            ..FitConfig::default()
        }
    }

    pub fn explainer(&self) -> ExplainerConfig {
        ExplainerConfig {
            k: self.explain_k,
            n_samples: self.explain_samples,
            kernel_width: self.kernel_width,
            seed: self.explain_seed,
            ..ExplainerConfig::default()
        }
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            penalty: self.penalty,
            min_segment: self.min_segment,
            min_history: self.min_history,
        }
    }

    pub fn stopword_list(&self) -> Result<StopWords, ServiceError> {
        match &self.stopwords {
            Some(p) => StopWords::from_file(p)
                .map_err(|e| ServiceError::BadRequest(format!("stop words: {e}"))),
            None => Ok(StopWords::english()),
        }
    }

    pub fn settings(&self) -> Result<ServiceSettings, ServiceError> {
        let explainer = self.explainer();
        explainer
            .validate()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(ServiceSettings {
            detector: self.detector(),
            explainer,
            learner: self.learner_spec()?,
            fit_config: self.fit_config(),
            stopwords: self.stopword_list()?,
            corpus_path: self.corpus.clone(),
            artifact_path: self.artifact.clone(),
        })
    }
}
