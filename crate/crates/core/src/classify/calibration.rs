//! Platt scaling for the one-vs-rest linear SVM.

use serde::{Deserialize, Serialize};

use super::folds::{split, stratified_folds};
use super::{svm, ClassifyError, FitConfig, LinearParams};
use crate::textpipe::SparseVector;

/// `P(positive | s) = 1 / (1 + exp(a s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn apply(&self, score: f64) -> f64 {
        let f = self.a * score + self.b;
        // stable in both tails
        if f >= 0.0 {
            (-f).exp() / (1.0 + (-f).exp())
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

/// Fits Platt's sigmoid by Newton's method with backtracking on the
/// regularized targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn fit_sigmoid(scores: &[f64], positive: &[bool]) -> Sigmoid {
    let prior1 = positive.iter().filter(|&&p| p).count() as f64;
    let prior0 = positive.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&s, &ti)| {
                let f = s * a + b;
                if f >= 0.0 {
                    ti * f + (1.0 + (-f).exp()).ln()
                } else {
                    (ti - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let f = s * a + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Sigmoid { a, b }
}

/// Calibrated class probabilities: per-class sigmoids, renormalized.
pub(super) fn calibrated_proba(
    linear: &LinearParams,
    sigmoids: &[Sigmoid],
    x: &SparseVector,
) -> Vec<f64> {
    let mut p: Vec<f64> = linear
        .scores(x)
        .iter()
        .zip(sigmoids)
        .map(|(&s, sig)| sig.apply(s))
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|v| *v = u);
    }
    p
}

/// Fits sigmoids on out-of-fold decision scores, then the final SVM on all data.
pub(super) fn fit_calibrated_svc(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    config: &FitConfig,
) -> Result<(LinearParams, Vec<Sigmoid>), ClassifyError> {
    let k = config.calibration_folds.max(2);
    if x.len() < k {
        return Err(ClassifyError::InsufficientData(format!(
            "calibration needs at least {k} samples, got {}",
            x.len()
        )));
    }
    let fold_of = stratified_folds(y, n_classes, k, config.seed);
    let mut oof = vec![vec![0.0; n_classes]; x.len()];
    for f in 0..k {
        let (train, test) = split(&fold_of, f);
        let xt: Vec<SparseVector> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let fold_model = svm::fit_ovr(&xt, &yt, n_classes, dim, config);
        for &i in &test {
            oof[i] = fold_model.scores(&x[i]);
        }
    }
    let sigmoids = (0..n_classes)
        .map(|c| {
            let scores: Vec<f64> = oof.iter().map(|s| s[c]).collect();
            let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
            fit_sigmoid(&scores, &positive)
        })
        .collect();
    Ok((svm::fit_ovr(x, y, n_classes, dim, config), sigmoids))
}
