//! Multinomial (softmax) logistic regression with L2 regularization.
//!
//! Minimizes `J = (1/n) sum_i CE_i + (lambda / 2n) |W|_F^2`; intercepts are
//! not penalized. The optimizer is full-batch gradient descent with an
//! Armijo backtracking line search seeded by the Barzilai-Borwein step.

use serde::{Deserialize, Serialize};

use crate::textpipe::SparseVector;

/// Per-class weight vectors and intercepts; the score of class `c` is `w_c.x + b_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LinearParams {
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| {
                b + x
                    .iter()
                    .filter(|&(i, _)| i < w.len())
                    .map(|(i, v)| v * w[i])
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }
}

/// The regularized softmax objective over a fixed data set. Parameters are
/// packed as `[W row-major (C x V), b (C)]`.
pub struct SoftmaxObjective<'a> {
    x: &'a [SparseVector],
    y: &'a [usize],
    n_classes: usize,
    dim: usize,
    lambda: f64,
}

impl<'a> SoftmaxObjective<'a> {
    pub fn new(
        x: &'a [SparseVector],
        y: &'a [usize],
        n_classes: usize,
        dim: usize,
        lambda: f64,
    ) -> Self {
        Self {
            x,
            y,
            n_classes,
            dim,
            lambda,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * (self.dim + 1)
    }

    pub fn pack(&self, p: &LinearParams) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        for w in &p.weights {
            theta.extend_from_slice(w);
        }
        theta.extend_from_slice(&p.intercepts);
        theta
    }

    pub fn unpack(&self, theta: &[f64]) -> LinearParams {
        let (w, b) = theta.split_at(self.n_classes * self.dim);
        LinearParams {
            weights: w
                .chunks(self.dim.max(1))
                .take(self.n_classes)
                .map(<[f64]>::to_vec)
                .collect(),
            intercepts: b.to_vec(),
        }
    }

    fn logits(&self, theta: &[f64], x: &SparseVector, out: &mut [f64]) {
        let bias = &theta[self.n_classes * self.dim..];
        for (c, z) in out.iter_mut().enumerate() {
            let row = &theta[c * self.dim..(c + 1) * self.dim];
            *z = bias[c] + x.iter().map(|(i, v)| v * row[i]).sum::<f64>();
        }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let n = self.x.len() as f64;
        let mut z = vec![0.0; self.n_classes];
        let mut loss = 0.0;
        for (x, &y) in self.x.iter().zip(self.y) {
            self.logits(theta, x, &mut z);
            loss += log_sum_exp(&z) - z[y];
        }
        let reg: f64 = theta[..self.n_classes * self.dim]
            .iter()
            .map(|w| w * w)
            .sum();
        loss / n + 0.5 * self.lambda * reg / n
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.x.len() as f64;
        let nw = self.n_classes * self.dim;
        let mut grad = vec![0.0; theta.len()];
        let mut z = vec![0.0; self.n_classes];
        let mut loss = 0.0;
        for (x, &y) in self.x.iter().zip(self.y) {
            self.logits(theta, x, &mut z);
            let lse = log_sum_exp(&z);
            loss += lse - z[y];
            for c in 0..self.n_classes {
                let r = (z[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                if r == 0.0 {
                    continue;
                }
                let row = &mut grad[c * self.dim..(c + 1) * self.dim];
                for (i, v) in x.iter() {
                    row[i] += r * v;
                }
                grad[nw + c] += r;
            }
        }
        let mut reg = 0.0;
        for (g, w) in grad[..nw].iter_mut().zip(&theta[..nw]) {
            reg += w * w;
            *g = *g / n + self.lambda * w / n;
        }
        for g in &mut grad[nw..] {
            *g /= n;
        }
        (loss / n + 0.5 * self.lambda * reg / n, grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// Outcome of the optimizer, kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub params: LinearParams,
    pub iterations: usize,
    pub gradient_inf_norm: f64,
}

pub fn minimize(obj: &SoftmaxObjective<'_>, tol: f64, max_iter: usize) -> Solution {
    let mut theta = vec![0.0; obj.n_params()];
    let (mut f, mut g) = obj.value_and_gradient(&theta);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut candidate = vec![0.0; theta.len()];
    while iterations < max_iter && inf_norm(&g) > tol {
        iterations += 1;
        let g_sq: f64 = g.iter().map(|v| v * v).sum();
        let mut t = step;
        let (f_new, g_new) = loop {
            for ((c, th), gr) in candidate.iter_mut().zip(&theta).zip(&g) {
                *c = th - t * gr;
            }
            let f_try = obj.value(&candidate);
            if f_try <= f - 1e-4 * t * g_sq || t < 1e-20 {
                break obj.value_and_gradient(&candidate);
            }
            t *= 0.5;
        };
        // Barzilai-Borwein estimate for the next trial step
        let mut sy = 0.0;
        let mut ss = 0.0;
        for ((cn, th), (gn, go)) in candidate.iter().zip(&theta).zip(g_new.iter().zip(&g)) {
            let s = cn - th;
            sy += s * (gn - go);
            ss += s * s;
        }
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };
        if f_new > f && t < 1e-20 {
            break;
        }
        std::mem::swap(&mut theta, &mut candidate);
        f = f_new;
        g = g_new;
    }
    Solution {
        params: obj.unpack(&theta),
        iterations,
        gradient_inf_norm: inf_norm(&g),
    }
}

pub(super) fn fit(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> LinearParams {
    let obj = SoftmaxObjective::new(x, y, n_classes, dim, lambda);
    minimize(&obj, tol, max_iter).params
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<SparseVector>, Vec<usize>) {
        let x = vec![
            SparseVector::from_pairs(vec![(0, 1.0)]),
            SparseVector::from_pairs(vec![(0, 0.6), (1, 0.8)]),
            SparseVector::from_pairs(vec![(1, 1.0)]),
            SparseVector::from_pairs(vec![(2, 1.0)]),
            SparseVector::from_pairs(vec![(1, 0.3), (2, 0.7)]),
        ];
        (x, vec![0, 0, 1, 2, 2])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = toy();
        let obj = SoftmaxObjective::new(&x, &y, 3, 3, 1.0);
        let theta: Vec<f64> = (0..obj.n_params())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
            .collect();
        let (_, g) = obj.value_and_gradient(&theta);
        for k in 0..theta.len() {
            let h = 1e-6;
            let mut p = theta.clone();
            p[k] += h;
            let up = obj.value(&p);
            p[k] -= 2.0 * h;
            let down = obj.value(&p);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-3),
                "param {k}: {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let (x, y) = toy();
        let obj = SoftmaxObjective::new(&x, &y, 3, 3, 1.0);
        let sol = minimize(&obj, 1e-6, 20_000);
        assert!(sol.gradient_inf_norm <= 1e-6);
        let (_, g) = obj.value_and_gradient(&obj.pack(&sol.params));
        assert!(inf_norm(&g) <= 1e-6);
    }
}
