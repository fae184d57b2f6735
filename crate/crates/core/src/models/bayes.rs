//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

/// Variance floor preventing degenerate likelihoods on constant features.
pub const BAYES_VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class feature Gaussians with class priors. Classes absent from
/// training keep a zero prior and zero posterior probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub n_classes: usize,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl BayesModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let log_posteriors: Vec<Option<f64>> = (0..self.n_classes)
            .map(|k| {
                if self.priors[k] <= 0.0 {
                    return None;
                }
                let mut lp = self.priors[k].ln();
                for ((v, mean), var) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
                    let d = v - mean;
                    lp += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var);
                }
                Some(lp)
            })
            .collect();
        let max = log_posteriors
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = log_posteriors
            .iter()
            .map(|lp| lp.map_or(0.0, |v| (v - max).exp()))
            .collect();
        let total: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|v| v / total).collect()
    }
}

pub fn train_bayes(x: &[Vec<f64>], y: &[u8], n_classes: usize) -> BayesModel {
    let m = x[0].len();
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![vec![0.0; m]; n_classes];
    for (xi, yi) in x.iter().zip(y) {
        let k = *yi as usize;
        counts[k] += 1;
        for (slot, v) in means[k].iter_mut().zip(xi) {
            *slot += v;
        }
    }
    for (mean_row, count) in means.iter_mut().zip(&counts) {
        if *count > 0 {
            for slot in mean_row {
                *slot /= *count as f64;
            }
        }
    }
    let mut variances = vec![vec![0.0; m]; n_classes];
    for (xi, yi) in x.iter().zip(y) {
        let k = *yi as usize;
        for ((slot, v), mean) in variances[k].iter_mut().zip(xi).zip(&means[k]) {
            let d = v - mean;
            *slot += d * d;
        }
    }
    for (var_row, count) in variances.iter_mut().zip(&counts) {
        for slot in var_row {
            if *count > 0 {
                *slot = (*slot / *count as f64).max(BAYES_VARIANCE_FLOOR);
            } else {
                *slot = BAYES_VARIANCE_FLOOR;
            }
        }
    }
    let n = x.len() as f64;
    BayesModel {
        n_classes,
        priors: counts.iter().map(|c| *c as f64 / n).collect(),
        means,
        variances,
    }
}
