//! Gradient-boosted trees: one-vs-all softmax boosting.
//!
//! Each round fits one depth-capped regression tree per class to the softmax
//! residuals and adds it to that class's score with a fixed learning rate.
//! Leaf outputs take the standard multiclass Newton step.

use serde::{Deserialize, Serialize};

use crate::models::tree::{fit_regression, Tree};

pub const GBT_ROUNDS: usize = 100;
pub const GBT_LEARNING_RATE: f64 = 0.1;
pub const GBT_MAX_DEPTH: usize = 6;

/// Boosted model: `trees[round][class]` are scalar-leaf regression trees;
/// class scores are learning-rate-weighted tree sums fed through a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_classes: usize,
    pub learning_rate: f64,
    pub trees: Vec<Vec<Tree>>,
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl GbtModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_classes];
        for round in &self.trees {
            for (k, tree) in round.iter().enumerate() {
                f[k] += self.learning_rate * tree.predict(x)[0];
            }
        }
        f
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }
}

/// Trains with the pinned defaults: 100 rounds, learning rate 0.1, depth 6.
pub fn train_gbt(x: &[Vec<f64>], y: &[u8], n_classes: usize) -> GbtModel {
    train_gbt_sized(x, y, n_classes, GBT_ROUNDS)
}

/// As [`train_gbt`] with an explicit round count (tests use fewer rounds).
pub fn train_gbt_sized(x: &[Vec<f64>], y: &[u8], n_classes: usize, rounds: usize) -> GbtModel {
    let n = x.len();
    let k_f = n_classes as f64;
    let mut scores = vec![vec![0.0; n_classes]; n];
    let mut all_rounds = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
        let mut round_trees = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            let residuals: Vec<f64> = (0..n)
                .map(|i| f64::from(y[i] as usize == class) - probs[i][class])
                .collect();
            // Newton step for the multiclass log-loss on the rows of a leaf.
            let leaf_value = |rows: &[usize]| {
                let num: f64 = rows.iter().map(|&i| residuals[i]).sum();
                let den: f64 = rows
                    .iter()
                    .map(|&i| residuals[i].abs() * (1.0 - residuals[i].abs()))
                    .sum();
                if den.abs() < 1e-12 {
                    0.0
                } else {
                    (k_f - 1.0) / k_f * num / den
                }
            };
            let tree = fit_regression(x, &residuals, GBT_MAX_DEPTH, &leaf_value);
            for (i, row_scores) in scores.iter_mut().enumerate() {
                row_scores[class] += GBT_LEARNING_RATE * tree.predict(&x[i])[0];
            }
            round_trees.push(tree);
        }
        all_rounds.push(round_trees);
    }
    GbtModel {
        n_classes,
        learning_rate: GBT_LEARNING_RATE,
        trees: all_rounds,
    }
}
