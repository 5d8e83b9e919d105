//! Random-forest regressor used as the optimizer's surrogate.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub min_leaf: usize,
    /// Fraction of features each tree may split on.
    pub feature_subsample: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { trees: 10, min_leaf: 3, feature_subsample: 0.8 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

fn mean(idx: &[usize], y: &[f64]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &mut [usize], features: &[usize], min_leaf: usize) -> Node {
    let n = idx.len();
    let node_mean = mean(idx, y);
    if n < 2 * min_leaf || idx.iter().all(|&i| y[i] == y[idx[0]]) {
        return Node::Leaf(node_mean);
    }

    // (sse, feature, threshold)
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in features {
        idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let total: f64 = idx.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let yi = y[idx[k]];
            s += yi;
            sq += yi * yi;
            let left = k + 1;
            if left < min_leaf || n - left < min_leaf {
                continue;
            }
            let (lo, hi) = (x[idx[k]][f], x[idx[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let right = (n - left) as f64;
            let sse = (sq - s * s / left as f64) + ((total_sq - sq) - (total - s).powi(2) / right);
            if best.is_none_or(|b| sse < b.0) {
                best = Some((sse, f, 0.5 * (lo + hi)));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return Node::Leaf(node_mean);
    };
    idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
    let split = idx.partition_point(|&i| x[i][feature] <= threshold);
    let (l, r) = idx.split_at_mut(split);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, l, features, min_leaf)),
        right: Box::new(grow(x, y, r, features, min_leaf)),
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Node>,
}

impl RandomForest {
    /// Bootstrap-resampled regression trees, each restricted to a random
    /// subset of the features.
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, rng: &mut Rng) -> Self {
        assert!(!x.is_empty() && x.len() == y.len(), "forest needs matching, non-empty data");
        let d = x[0].len();
        let n_features = ((cfg.feature_subsample * d as f64).round() as usize).clamp(1, d);
        let trees = (0..cfg.trees.max(1))
            .map(|_| {
                let mut idx: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
                let mut features = index::sample(rng, d, n_features).into_vec();
                features.sort_unstable();
                grow(x, y, &mut idx, &features, cfg.min_leaf.max(1))
            })
            .collect();
        RandomForest { trees }
    }

    /// Mean and variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let m = preds.iter().sum::<f64>() / preds.len() as f64;
        let var = preds.iter().map(|p| (p - m).powi(2)).sum::<f64>() / preds.len() as f64;
        (m, var)
    }
}
