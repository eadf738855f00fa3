//! Local surrogate explanations of single assignments.
//!
//! The report's distinct terms are switched on and off, the model scores
//! every perturbed text, and a proximity-weighted ridge regression on the
//! binary presence features gives each term a signed weight for the
//! explained team. Short reports are enumerated exhaustively instead of
//! sampled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{Classifier, ClassifyError};
use crate::corpus::TeamId;
use crate::textpipe::TextPipeline;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("the report has no terms to explain")]
    NothingToExplain,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid explainer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    pub k: usize,
    pub n_samples: usize,
    /// Kernel width on the cosine distance between presence vectors.
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    /// Reports with at most this many distinct terms are enumerated exactly.
    pub exhaustive_max_terms: usize,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            k: 6,
            n_samples: 1000,
            kernel_width: 25.0,
            ridge_lambda: 1.0,
            exhaustive_max_terms: 12,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.k == 0 || self.n_samples == 0 {
            return Err(ExplainError::InvalidConfig(
                "k and n_samples must be positive".into(),
            ));
        }
        if !(self.kernel_width > 0.0 && self.ridge_lambda >= 0.0) {
            return Err(ExplainError::InvalidConfig(
                "kernel width must be positive, lambda nonnegative".into(),
            ));
        }
        if self.exhaustive_max_terms > 20 {
            return Err(ExplainError::InvalidConfig(
                "exhaustive enumeration is capped at 20 terms".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub report_id: String,
    #[serde(rename = "team")]
    pub predicted_team: TeamId,
    pub terms: Vec<TermWeight>,
    pub sample_count: usize,
    #[serde(rename = "fit")]
    pub local_fit_score: f64,
}

impl Explanation {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("explanation serializes")
    }

    /// One line per term: name, a signed bar scaled to the largest weight,
    /// and the weight to three decimals.
    pub fn render_text(&self) -> String {
        const HALF: usize = 20;
        let width = self
            .terms
            .iter()
            .map(|t| t.term.chars().count())
            .max()
            .unwrap_or(0);
        let max = self
            .terms
            .iter()
            .map(|t| t.weight.abs())
            .fold(0.0, f64::max);
        let mut out = format!(
            "{} -> {} (fit {:.3})\n",
            self.report_id, self.predicted_team, self.local_fit_score
        );
        for t in &self.terms {
            let len = if max > 0.0 {
                ((t.weight.abs() / max) * HALF as f64).round() as usize
            } else {
                0
            };
            let (left, right) = if t.weight < 0.0 {
                (format!("{:>HALF$}", "#".repeat(len)), String::new())
            } else {
                (" ".repeat(HALF), "#".repeat(len))
            };
            out.push_str(&format!(
                "{:<width$} {left}|{right:<HALF$} {:+.3}\n",
                t.term, t.weight
            ));
        }
        out
    }
}

/// One perturbed version of a report: which distinct terms it keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kept: Vec<bool>,
    pub proximity: f64,
}

fn proximity(kept: usize, total: usize, kernel_width: f64) -> f64 {
    // cosine between a binary subset vector and the all-ones vector
    let d = if kept == 0 {
        1.0
    } else {
        1.0 - (kept as f64 / total as f64).sqrt()
    };
    (-(d * d) / (kernel_width * kernel_width)).exp()
}

/// Random subsets of `n_terms` distinct terms, each kept with probability
/// one half. Sample 0 is always the full report.
pub fn sample_perturbations(
    n_terms: usize,
    n_samples: usize,
    kernel_width: f64,
    seed: u64,
) -> Result<Vec<Perturbation>, ExplainError> {
    if n_terms == 0 {
        return Err(ExplainError::NothingToExplain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_samples.max(1))
        .map(|i| {
            let kept: Vec<bool> = if i == 0 {
                vec![true; n_terms]
            } else {
                (0..n_terms).map(|_| rng.random_bool(0.5)).collect()
            };
            let n = kept.iter().filter(|&&k| k).count();
            Perturbation {
                proximity: proximity(n, n_terms, kernel_width),
                kept,
            }
        })
        .collect())
}

/// Every subset of `n_terms` terms, full set first, each proximity scaled by
/// `n_samples / 2^n_terms` so the total weight matches a sampled run.
pub fn enumerate_perturbations(
    n_terms: usize,
    n_samples: usize,
    kernel_width: f64,
) -> Result<Vec<Perturbation>, ExplainError> {
    if n_terms == 0 {
        return Err(ExplainError::NothingToExplain);
    }
    let total = 1usize << n_terms;
    let scale = n_samples as f64 / total as f64;
    Ok((0..total)
        .map(|m| {
            // m = 0 is the full report
            let kept: Vec<bool> = (0..n_terms).map(|j| (m >> j) & 1 == 0).collect();
            let n = kept.iter().filter(|&&k| k).count();
            Perturbation {
                proximity: scale * proximity(n, n_terms, kernel_width),
                kept,
            }
        })
        .collect())
}

fn distinct_terms(tokens: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    tokens
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

struct LocalFit {
    coefficients: Vec<f64>,
    r2: f64,
}

/// Weighted ridge regression with an unpenalized intercept on the columns
/// `features` of the presence matrix.
fn weighted_ridge(
    samples: &[Perturbation],
    targets: &[f64],
    features: &[usize],
    lambda: f64,
) -> LocalFit {
    let p = features.len() + 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for (s, &y) in samples.iter().zip(targets) {
        row[0] = 1.0;
        for (j, &f) in features.iter().enumerate() {
            row[j + 1] = if s.kept[f] { 1.0 } else { 0.0 };
        }
        let w = s.proximity;
        for i in 0..p {
            if row[i] == 0.0 {
                continue;
            }
            b[i] += w * row[i] * y;
            for j in 0..p {
                a[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    for i in 1..p {
        a[(i, i)] += lambda;
    }
    let beta = a
        .clone()
        .cholesky()
        .map(|c| c.solve(&b))
        .or_else(|| a.lu().solve(&b))
        .unwrap_or_else(|| DVector::zeros(p));

    let wsum: f64 = samples.iter().map(|s| s.proximity).sum();
    let ybar = samples
        .iter()
        .zip(targets)
        .map(|(s, y)| s.proximity * y)
        .sum::<f64>()
        / wsum;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (s, &y) in samples.iter().zip(targets) {
        let mut pred = beta[0];
        for (j, &f) in features.iter().enumerate() {
            if s.kept[f] {
                pred += beta[j + 1];
            }
        }
        ss_res += s.proximity * (y - pred).powi(2);
        ss_tot += s.proximity * (y - ybar).powi(2);
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    LocalFit {
        coefficients: beta.iter().skip(1).copied().collect(),
        r2: r2.clamp(0.0, 1.0),
    }
}

fn class_probabilities(
    model: &dyn Classifier,
    pipeline: &TextPipeline,
    tokens: &[String],
) -> Result<Vec<f64>, ExplainError> {
    Ok(model.predict_proba(&pipeline.vectorize_tokens(tokens))?)
}

fn explain_class(
    report_id: &str,
    tokens: &[String],
    model: &dyn Classifier,
    pipeline: &TextPipeline,
    class: usize,
    config: &ExplainerConfig,
) -> Result<Explanation, ExplainError> {
    let terms = distinct_terms(tokens);
    let samples = if terms.len() <= config.exhaustive_max_terms {
        enumerate_perturbations(terms.len(), config.n_samples, config.kernel_width)?
    } else {
        sample_perturbations(
            terms.len(),
            config.n_samples,
            config.kernel_width,
            config.seed,
        )?
    };
    let index: std::collections::HashMap<&str, usize> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let targets = samples
        .par_iter()
        .map(|s| {
            let kept: Vec<String> = tokens
                .iter()
                .filter(|t| s.kept[index[t.as_str()]])
                .cloned()
                .collect();
            Ok(class_probabilities(model, pipeline, &kept)?[class])
        })
        .collect::<Result<Vec<f64>, ExplainError>>()?;

    let all: Vec<usize> = (0..terms.len()).collect();
    let full = weighted_ridge(&samples, &targets, &all, config.ridge_lambda);
    let mut order = all;
    order.sort_by(|&a, &b| {
        full.coefficients[b]
            .abs()
            .total_cmp(&full.coefficients[a].abs())
            .then(a.cmp(&b))
    });
    order.truncate(config.k);
    let fit = weighted_ridge(&samples, &targets, &order, config.ridge_lambda);
    let mut weights: Vec<TermWeight> = order
        .iter()
        .zip(&fit.coefficients)
        .map(|(&i, &w)| TermWeight {
            term: terms[i].clone(),
            weight: w,
        })
        .collect();
    weights.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
    Ok(Explanation {
        report_id: report_id.to_owned(),
        predicted_team: model.classes()[class].clone(),
        terms: weights,
        sample_count: samples.len(),
        local_fit_score: fit.r2,
    })
}

fn check(
    model: &dyn Classifier,
    tokens: &[String],
    config: &ExplainerConfig,
) -> Result<(), ExplainError> {
    config.validate()?;
    if !model.supports_proba() {
        return Err(ExplainError::Unsupported(
            "the model does not provide class probabilities".into(),
        ));
    }
    if tokens.is_empty() {
        return Err(ExplainError::NothingToExplain);
    }
    Ok(())
}

/// Explains the most probable team for a preprocessed report.
pub fn explain(
    report_id: &str,
    tokens: &[String],
    model: &dyn Classifier,
    pipeline: &TextPipeline,
    config: &ExplainerConfig,
) -> Result<Explanation, ExplainError> {
    check(model, tokens, config)?;
    let p = class_probabilities(model, pipeline, tokens)?;
    explain_class(
        report_id,
        tokens,
        model,
        pipeline,
        crate::classify::argmax(&p),
        config,
    )
}

/// Explanations for the two most probable teams; ties go to the earlier class.
pub fn explain_top2(
    report_id: &str,
    tokens: &[String],
    model: &dyn Classifier,
    pipeline: &TextPipeline,
    config: &ExplainerConfig,
) -> Result<(Explanation, Explanation), ExplainError> {
    check(model, tokens, config)?;
    if model.classes().len() < 2 {
        return Err(ExplainError::Unsupported(
            "the model has fewer than two classes".into(),
        ));
    }
    let p = class_probabilities(model, pipeline, tokens)?;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    Ok((
        explain_class(report_id, tokens, model, pipeline, order[0], config)?,
        explain_class(report_id, tokens, model, pipeline, order[1], config)?,
    ))
}
