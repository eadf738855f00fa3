use serde::{Deserialize, Serialize};

use crate::textpipe::SparseVector;

/// Stored training vectors for cosine-similarity k-nearest-neighbour voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub n_classes: usize,
    pub vectors: Vec<SparseVector>,
    pub labels: Vec<usize>,
    norms: Vec<f64>,
}

const ZERO_DISTANCE: f64 = 1e-12;

impl KnnParams {
    pub fn fit(x: &[SparseVector], y: &[usize], n_classes: usize, k: usize) -> Self {
        Self {
            k: k.max(1),
            n_classes,
            vectors: x.to_vec(),
            labels: y.to_vec(),
            norms: x.iter().map(SparseVector::norm).collect(),
        }
    }

    /// Distance-weighted votes (weight `1 / (1 - cos)`) of the `k` most
    /// similar training vectors. Exact matches, when present, take the
    /// whole vote. Ties in similarity keep the earlier training vector.
    pub fn votes(&self, x: &SparseVector) -> Vec<f64> {
        let xn = x.norm();
        let mut sims: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (v, &n))| {
                let s = if xn > 0.0 && n > 0.0 {
                    x.dot(v) / (xn * n)
                } else {
                    0.0
                };
                (s, i)
            })
            .collect();
        let k = self.k.min(sims.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if k < sims.len() {
            sims.select_nth_unstable_by(k - 1, cmp);
            sims.truncate(k);
        }
        sims.sort_by(cmp);

        let mut votes = vec![0.0; self.n_classes];
        let exact: Vec<usize> = sims
            .iter()
            .filter(|(s, _)| 1.0 - s <= ZERO_DISTANCE)
            .map(|&(_, i)| i)
            .collect();
        if !exact.is_empty() {
            for i in exact {
                votes[self.labels[i]] += 1.0;
            }
        } else {
            for (s, i) in sims {
                votes[self.labels[i]] += 1.0 / (1.0 - s);
            }
        }
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_wins() {
        let x = vec![
            SparseVector::from_pairs(vec![(0, 1.0)]),
            SparseVector::from_pairs(vec![(0, 0.7), (1, 0.7)]),
            SparseVector::from_pairs(vec![(1, 1.0)]),
        ];
        let knn = KnnParams::fit(&x, &[0, 1, 1], 2, 1);
        assert_eq!(knn.votes(&x[0]), vec![1.0, 0.0]);
        let knn3 = KnnParams::fit(&x, &[0, 1, 1], 2, 3);
        let v = knn3.votes(&x[0]);
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn weighted_vote_prefers_closer_neighbours() {
        let x = vec![
            SparseVector::from_pairs(vec![(0, 1.0)]),
            SparseVector::from_pairs(vec![(1, 1.0)]),
            SparseVector::from_pairs(vec![(1, 1.0), (2, 1.0)]),
        ];
        let knn = KnnParams::fit(&x, &[0, 1, 1], 2, 3);
        let q = SparseVector::from_pairs(vec![(0, 0.9), (1, 0.1)]);
        let v = knn.votes(&q);
        assert!(v[0] > v[1]);
    }
}
