//! Versioned model artifact files and the training job that produces them.
//!
//! Layout: 8-byte magic, format version (u32 LE), payload length (u64 LE),
//! bincode payload, SHA-256 of the payload.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;
use crate::classify::{fit_learner, Classifier, FitConfig, LearnerSpec, Model};
use crate::corpus::{
    filter_closed, load_corpus, month_slice, write_jsonl, CorpusFormat, IssueReport, TeamId,
    YearMonth,
};
use crate::eval::{prepare, EvalError};
use crate::textpipe::{StopWords, TextError, TextPipeline};

pub const MAGIC: [u8; 8] = *b"TRIAGEM\0";
pub const FORMAT_VERSION: u32 = 1;
pub const TRAINING_MONTHS: i64 = 12;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a model artifact (bad magic)")]
    BadMagic,
    #[error("unsupported artifact format version {0}")]
    UnsupportedVersion(u32),
    #[error("artifact is truncated")]
    Truncated,
    #[error("artifact checksum mismatch")]
    ChecksumMismatch,
    #[error("artifact payload: {0}")]
    Codec(#[from] bincode::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub learner: String,
    pub pipeline: TextPipeline,
    pub model: Model,
    pub training_span: (YearMonth, YearMonth),
    pub created_at: DateTime<Utc>,
    /// SHA-256 of the training reports serialized as JSON lines.
    pub corpus_fingerprint: String,
    pub n_training_reports: usize,
    pub fit_config: FitConfig,
}

impl ModelArtifact {
    pub fn classes(&self) -> &[TeamId] {
        self.model.classes()
    }

    /// Content hash of the vocabulary and fitted parameters. Two artifacts
    /// with equal fingerprints make identical predictions.
    pub fn model_fingerprint(&self) -> String {
        let bytes = bincode::serialize(&(&self.pipeline, &self.model)).expect("model serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ArtifactError> {
        let payload = bincode::serialize(self)?;
        let mut out = Vec::with_capacity(payload.len() + 52);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&Sha256::digest(&payload));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        if bytes.len() < 20 {
            return Err(if bytes.starts_with(&MAGIC[..bytes.len().min(8)]) {
                ArtifactError::Truncated
            } else {
                ArtifactError::BadMagic
            });
        }
        if bytes[..8] != MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let end = 20usize.checked_add(len).ok_or(ArtifactError::Truncated)?;
        if bytes.len() != end + 32 {
            return Err(ArtifactError::Truncated);
        }
        let payload = &bytes[20..end];
        if Sha256::digest(payload)[..] != bytes[end..] {
            return Err(ArtifactError::ChecksumMismatch);
        }
        let artifact: ModelArtifact = bincode::deserialize(payload)?;
        if artifact.format_version != version {
            return Err(ArtifactError::UnsupportedVersion(artifact.format_version));
        }
        Ok(artifact)
    }

    /// Writes to a temporary file beside `path` and renames it into place,
    /// so readers never see a partial artifact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
        let path = path.as_ref();
        let io = |source| ArtifactError::Io {
            path: path.to_owned(),
            source,
        };
        let bytes = self.to_bytes()?;
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_owned(),
            _ => PathBuf::from("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
        tmp.write_all(&bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| ArtifactError::Io {
                path: path.to_owned(),
                source,
            })?;
        Self::from_bytes(&bytes)
    }
}

/// Months `as_of - 12 ..= as_of - 1`.
pub fn training_span(as_of: YearMonth) -> (YearMonth, YearMonth) {
    (as_of.offset(-TRAINING_MONTHS), as_of.offset(-1))
}

pub fn corpus_fingerprint(reports: &[IssueReport]) -> String {
    let mut buf = Vec::new();
    write_jsonl(reports, &mut buf).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}

#[derive(Debug, Clone)]
pub struct TrainJob {
    pub as_of: YearMonth,
    pub learner: LearnerSpec,
    pub fit_config: FitConfig,
    pub stopwords: StopWords,
}

/// Fits the learner on closed reports opened in the twelve months before
/// `as_of`.
pub fn train_on_reports(
    reports: &[IssueReport],
    job: &TrainJob,
) -> Result<ModelArtifact, ServiceError> {
    let span = training_span(job.as_of);
    let closed = filter_closed(reports);
    let slice = month_slice(&closed, span.0, span.1)?;
    if slice.is_empty() {
        return Err(ServiceError::NoTrainingData(format!(
            "no closed reports opened in {}..{}",
            span.0, span.1
        )));
    }
    let prepared = match prepare(&slice.reports, &job.stopwords) {
        Ok(p) => p,
        Err(EvalError::Text(TextError::EmptyTrainingSet)) => {
            return Err(ServiceError::NoTrainingData(
                "every report in the span has empty text".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let model = fit_learner(&job.learner, &prepared.training_set(), &job.fit_config)?;
    Ok(ModelArtifact {
        format_version: FORMAT_VERSION,
        learner: model.describe(),
        pipeline: prepared.pipeline,
        model,
        training_span: span,
        created_at: Utc::now(),
        corpus_fingerprint: corpus_fingerprint(&slice.reports),
        n_training_reports: prepared.y.len(),
        fit_config: job.fit_config.clone(),
    })
}

/// Loads the corpus, trains, and persists the artifact atomically.
pub fn train_job(
    corpus_path: impl AsRef<Path>,
    job: &TrainJob,
    output: impl AsRef<Path>,
) -> Result<ModelArtifact, ServiceError> {
    let loaded = load_corpus(corpus_path, CorpusFormat::Jsonl)?;
    for d in &loaded.diagnostics {
        log::warn!("corpus: {d}");
    }
    let artifact = train_on_reports(&loaded.reports, job)?;
    artifact.save(output)?;
    Ok(artifact)
}
