//! Probability-averaging tree ensembles: single decision trees and random
//! forests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::tree::{fit_classification, Tree, TreeParams};
use crate::seeding;

/// Trees in a random forest.
pub const RF_TREES: usize = 100;

/// Candidate features per split, ⌊√18⌋.
pub const RF_CANDIDATE_FEATURES: usize = 4;

/// An ensemble whose prediction is the weighted mean of per-tree class
/// distributions. Weights are normalised to sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub weights: Vec<f64>,
    pub n_classes: usize,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<Tree>, n_classes: usize) -> Self {
        let w = 1.0 / trees.len() as f64;
        let weights = vec![w; trees.len()];
        TreeEnsemble {
            trees,
            weights,
            n_classes,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for (tree, w) in self.trees.iter().zip(&self.weights) {
            for (slot, v) in acc.iter_mut().zip(tree.predict(x)) {
                *slot += w * v;
            }
        }
        acc
    }

    /// Weight-averaged expected leaf value: the model output when no feature
    /// is known.
    pub fn expected_value(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for (tree, w) in self.trees.iter().zip(&self.weights) {
            for (slot, v) in acc.iter_mut().zip(tree.expected_value()) {
                *slot += w * v;
            }
        }
        acc
    }
}

/// A single CART tree grown to purity on all features.
pub fn train_decision_tree(x: &[Vec<f64>], y: &[u8], n_classes: usize) -> TreeEnsemble {
    let params = TreeParams {
        n_classes,
        max_depth: None,
        n_candidate_features: None,
    };
    // No feature subsampling happens, so the stream is never drawn from.
    let mut rng = seeding::substream(0, "dt");
    TreeEnsemble::new(vec![fit_classification(x, y, &params, &mut rng)], n_classes)
}

/// A random forest: each tree sees a bootstrap resample of the rows and
/// 4 candidate features per split, and is grown to purity. Every tree draws
/// from its own seed substream, so the forest is reproducible tree by tree.
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[u8],
    n_classes: usize,
    seed: u64,
) -> TreeEnsemble {
    train_random_forest_sized(x, y, n_classes, seed, RF_TREES)
}

/// As [`train_random_forest`] with an explicit tree count (tests use smaller
/// forests).
pub fn train_random_forest_sized(
    x: &[Vec<f64>],
    y: &[u8],
    n_classes: usize,
    seed: u64,
    n_trees: usize,
) -> TreeEnsemble {
    let n = x.len();
    let params = TreeParams {
        n_classes,
        max_depth: None,
        n_candidate_features: Some(RF_CANDIDATE_FEATURES.min(x[0].len())),
    };
    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = seeding::substream(seed, &format!("rf-tree-{t}"));
            let mut bx = Vec::with_capacity(n);
            let mut by = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                bx.push(x[i].clone());
                by.push(y[i]);
            }
            fit_classification(&bx, &by, &params, &mut rng)
        })
        .collect();
    TreeEnsemble::new(trees, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn blobs(n_per: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        // Three well-separated clusters in 5 features; filler features vary
        // but carry no signal.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for class in 0..3u8 {
            for i in 0..n_per {
                let jitter = (i as f64 * 0.37).sin() * 0.3;
                let center = class as f64 * 10.0;
                x.push(vec![
                    center + jitter,
                    center - jitter,
                    (i % 7) as f64,
                    (i % 3) as f64,
                    0.5,
                ]);
                y.push(class);
            }
        }
        (x, y)
    }

    #[test]
    fn forest_probabilities_sum_to_one() {
        let (x, y) = blobs(15);
        let forest = train_random_forest_sized(&x, &y, 10, 7, 20);
        for xi in &x {
            let p = forest.predict_proba(xi);
            assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = blobs(12);
        let a = train_random_forest_sized(&x, &y, 10, 42, 15);
        let b = train_random_forest_sized(&x, &y, 10, 42, 15);
        assert_eq!(a, b);
        let c = train_random_forest_sized(&x, &y, 10, 43, 15);
        let probe = vec![5.0, 5.0, 1.0, 1.0, 0.5];
        // Different seed, different trees (probabilities may still agree on
        // easy points, so compare structure).
        assert_ne!(a.trees, c.trees);
        let pa = a.predict_proba(&probe);
        let pb = b.predict_proba(&probe);
        assert_eq!(pa, pb);
    }

    #[test]
    fn forest_of_identical_trees_equals_one_tree() {
        let (x, y) = blobs(10);
        let single = train_decision_tree(&x, &y, 10);
        let tree = single.trees[0].clone();
        let many = TreeEnsemble::new(vec![tree.clone(), tree.clone(), tree], 10);
        for xi in &x {
            let a = single.predict_proba(xi);
            let b = many.predict_proba(xi);
            for (u, v) in a.iter().zip(&b) {
                assert_relative_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn removing_a_tree_moves_probabilities_by_at_most_range_over_t() {
        let (x, y) = blobs(12);
        let forest = train_random_forest_sized(&x, &y, 10, 3, 12);
        let t = forest.trees.len() as f64;
        // Global per-class spread across all leaves of all trees.
        let mut lo = vec![f64::INFINITY; 10];
        let mut hi = vec![f64::NEG_INFINITY; 10];
        for tree in &forest.trees {
            for node in 0..tree.n_nodes() {
                if tree.is_leaf(node) {
                    for k in 0..10 {
                        lo[k] = lo[k].min(tree.values[node][k]);
                        hi[k] = hi[k].max(tree.values[node][k]);
                    }
                }
            }
        }
        for xi in x.iter().take(8) {
            let full = forest.predict_proba(xi);
            for drop in 0..forest.trees.len() {
                let kept: Vec<Tree> = forest
                    .trees
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, tr)| tr.clone())
                    .collect();
                let smaller = TreeEnsemble::new(kept, 10);
                let partial = smaller.predict_proba(xi);
                for k in 0..10 {
                    let bound = (hi[k] - lo[k]).max(0.0) / t + 1e-12;
                    assert!(
                        (full[k] - partial[k]).abs() <= bound,
                        "class {k}: moved {} > bound {bound}",
                        (full[k] - partial[k]).abs()
                    );
                }
            }
        }
    }
}
