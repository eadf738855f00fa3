//! CART decision trees (Gini impurity) over sparse nonnegative features,
//! and bagged random forests built from them.
//!
//! A split sends `x[feature] <= threshold` left. Absent features read as
//! zero, so every candidate split is evaluated from a feature's nonzero
//! entries plus the implicit block of zeros below them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FitConfig;
use crate::textpipe::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        distribution: Vec<f64>,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { distribution } => return distribution.clone(),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

pub(super) fn forest_proba(trees: &[DecisionTree], x: &SparseVector, n_classes: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_classes];
    for t in trees {
        for (a, p) in acc.iter_mut().zip(t.predict_proba(x)) {
            *a += p;
        }
    }
    let n = trees.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

pub(super) struct TreeSettings {
    max_depth: usize,
    min_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    max_features: Option<usize>,
}

impl TreeSettings {
    pub(super) fn from_config(config: &FitConfig, max_features: Option<usize>) -> Self {
        Self {
            max_depth: config.tree_max_depth,
            min_leaf: config.tree_min_leaf.max(1),
            max_features,
        }
    }
}

struct Builder<'a> {
    x: &'a [SparseVector],
    y: &'a [usize],
    n_classes: usize,
    settings: &'a TreeSettings,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    score: f64,
    feature: u32,
    threshold: f64,
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    // n * gini = n - sum(c^2)/n
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

impl<'a> Builder<'a> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let mut dist = vec![0.0; self.n_classes];
        for &s in samples {
            dist[self.y[s]] += 1.0;
        }
        let n = samples.len().max(1) as f64;
        dist.iter_mut().for_each(|d| *d /= n);
        self.nodes.push(TreeNode::Leaf { distribution: dist });
        self.nodes.len() - 1
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let mut totals = vec![0usize; self.n_classes];
        for &s in &samples {
            totals[self.y[s]] += 1;
        }
        let pure = totals.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.settings.max_depth || samples.len() < 2 * self.settings.min_leaf {
            return self.leaf(&samples);
        }
        let Some(best) = self.best_split(&samples, &totals) else {
            return self.leaf(&samples);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[s].get(best.feature) <= best.threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            distribution: Vec::new(),
        });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&mut self, samples: &[usize], totals: &[usize]) -> Option<BestSplit> {
        let n = samples.len();
        let mut by_feature: BTreeMap<u32, Vec<(f64, usize)>> = BTreeMap::new();
        for &s in samples {
            for &(f, v) in self.x[s].entries() {
                by_feature.entry(f).or_default().push((v, self.y[s]));
            }
        }
        // a feature is splittable when it takes at least two distinct values here
        let mut candidates: Vec<u32> = by_feature
            .iter()
            .filter(|(_, vals)| vals.len() < n || vals.iter().any(|&(v, _)| v != vals[0].0))
            .map(|(&f, _)| f)
            .collect();
        if let Some(m) = self.settings.max_features {
            candidates.shuffle(&mut self.rng);
            candidates.truncate(m.max(1));
            candidates.sort_unstable();
        }

        let parent = gini_sum(totals, n);
        let min_leaf = self.settings.min_leaf;
        let mut best: Option<BestSplit> = None;
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for f in candidates {
            let vals = by_feature.get_mut(&f).expect("candidate has values");
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            // start with the zero block on the left
            right.copy_from_slice(totals);
            left.iter_mut().for_each(|c| *c = 0);
            for &(_, c) in vals.iter() {
                right[c] -= 1;
            }
            let zeros = n - vals.len();
            for c in 0..self.n_classes {
                left[c] = right[c];
                right[c] = totals[c] - left[c];
            }
            let mut n_left = zeros;
            let mut prev = 0.0;
            for j in 0..=vals.len() {
                let boundary = j == vals.len() || (n_left > 0 && vals[j].0 != prev);
                if boundary && j < vals.len() && n_left >= min_leaf && n - n_left >= min_leaf {
                    let score = gini_sum(&left, n_left) + gini_sum(&right, n - n_left);
                    if score < parent - 1e-12
                        && best.as_ref().is_none_or(|b| score < b.score - 1e-12)
                    {
                        best = Some(BestSplit {
                            score,
                            feature: f,
                            threshold: 0.5 * (prev + vals[j].0),
                        });
                    }
                }
                if j < vals.len() {
                    let (v, c) = vals[j];
                    left[c] += 1;
                    right[c] -= 1;
                    n_left += 1;
                    prev = v;
                }
            }
        }
        best
    }
}

pub(super) fn fit_tree(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    settings: &TreeSettings,
    seed: u64,
) -> DecisionTree {
    fit_tree_on(x, y, n_classes, settings, seed, (0..x.len()).collect())
}

fn fit_tree_on(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    settings: &TreeSettings,
    seed: u64,
    samples: Vec<usize>,
) -> DecisionTree {
    let mut b = Builder {
        x,
        y,
        n_classes,
        settings,
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    b.build(samples, 0);
    DecisionTree { nodes: b.nodes }
}

/// Bootstrap-aggregated trees with `sqrt(V)` candidate features per split.
pub(super) fn fit_forest(
    x: &[SparseVector],
    y: &[usize],
    n_classes: usize,
    dim: usize,
    config: &FitConfig,
) -> Vec<DecisionTree> {
    let max_features = ((dim as f64).sqrt().floor() as usize).max(1);
    let settings = TreeSettings::from_config(config, Some(max_features));
    (0..config.forest_trees)
        .into_par_iter()
        .map(|t| {
            let seed = config.seed ^ (t as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
            fit_tree_on(x, y, n_classes, &settings, rng.random(), sample)
        })
        .collect()
}
