use serde::{Deserialize, Serialize};

use crate::textpipe::SparseVector;

/// Multinomial naive Bayes with additive smoothing. Input weights are used
/// directly as fractional term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub log_prior: Vec<f64>,
    /// `log_likelihood[c][t] = ln P(t | c)`.
    pub log_likelihood: Vec<Vec<f64>>,
}

impl NaiveBayesParams {
    pub fn joint_log_likelihood(&self, x: &SparseVector) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(&self.log_likelihood)
            .map(|(prior, ll)| {
                prior
                    + x.iter()
                        .filter(|&(i, _)| i < ll.len())
                        .map(|(i, w)| w * ll[i])
                        .sum::<f64>()
            })
            .collect()
    }
}

pub(super) fn fit(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    alpha: f64,
) -> NaiveBayesParams {
    let mut counts = vec![vec![0.0; dim]; n_classes];
    let mut docs = vec![0usize; n_classes];
    for (v, &c) in x.iter().zip(y) {
        docs[c] += 1;
        for (i, w) in v.iter() {
            counts[c][i] += w;
        }
    }
    let n = y.len() as f64;
    let log_prior = docs.iter().map(|&d| (d as f64 / n).ln()).collect();
    let log_likelihood = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + alpha * dim as f64;
            row.into_iter()
                .map(|c| ((c + alpha) / total).ln())
                .collect()
        })
        .collect();
    NaiveBayesParams {
        log_prior,
        log_likelihood,
    }
}
