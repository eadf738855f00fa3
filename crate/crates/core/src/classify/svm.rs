//! Linear SVM trained by dual coordinate descent.
//!
//! Each binary problem minimizes `0.5 |w|^2 + C sum max(0, 1 - y_i w.x_i)`
//! where `x_i` is augmented with a constant bias feature of 1. The dual is
//! solved one coordinate at a time with projected-gradient stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{FitConfig, LinearParams};
use crate::textpipe::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSettings {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

/// Result of one binary problem: weights, bias, and the epochs used.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub converged: bool,
}

/// Trains one binary hinge-loss SVM. `positive[i]` marks the +1 samples.
pub fn train_binary(
    x: &[SparseVector],
    positive: &[bool],
    dim: usize,
    s: &DualSettings,
) -> BinarySvm {
    let n = x.len();
    let mut w = vec![0.0; dim];
    let mut bias = 0.0;
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x.iter().map(|v| v.norm().powi(2) + 1.0).collect();
    let sign: Vec<f64> = positive
        .iter()
        .map(|&p| if p { 1.0 } else { -1.0 })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    let mut epochs = 0;
    let mut converged = false;
    while epochs < s.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut max_pg = f64::NEG_INFINITY;
        let mut min_pg = f64::INFINITY;
        for &i in &order {
            let yi = sign[i];
            let g = yi * (x[i].dot_dense(&w) + bias) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == s.c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, s.c);
                let d = (alpha[i] - old) * yi;
                if d != 0.0 {
                    for (j, v) in x[i].iter() {
                        w[j] += d * v;
                    }
                    bias += d;
                }
            }
        }
        if n == 0 || max_pg - min_pg <= s.tol {
            converged = true;
            break;
        }
    }
    BinarySvm {
        weights: w,
        bias,
        epochs,
        converged,
    }
}

pub(super) fn settings(config: &FitConfig, class: usize) -> DualSettings {
    DualSettings {
        c: config.svc_c,
        tol: config.svc_tol,
        max_epochs: config.svc_max_epochs,
        seed: config
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(class as u64 + 1)),
    }
}

/// One-vs-rest linear SVM over `n_classes`.
pub fn fit_ovr(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    config: &FitConfig,
) -> LinearParams {
    let (weights, intercepts) = (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
            let m = train_binary(x, &positive, dim, &settings(config, c));
            (m.weights, m.bias)
        })
        .unzip();
    LinearParams {
        weights,
        intercepts,
    }
}
