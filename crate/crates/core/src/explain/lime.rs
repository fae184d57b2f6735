//! Sparse linear surrogate explanations.
//!
//! The explainer perturbs one instance inside a Gaussian neighbourhood,
//! queries the model for the predicted class's probability at each sample,
//! and fits a weighted ridge regression whose coefficients are the
//! relevance scores. Only the `top_d` coefficients by magnitude are kept.
//! Works with any model family, unlike the Shapley explainer.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::models::Model;
use crate::network::N_FEATURES;
use crate::seeding;
use crate::{Error, Result};

use super::{Explanation, Method};

/// Neighbourhood samples drawn per explained instance.
pub const LIME_SAMPLES: usize = 5000;

/// Coefficients kept per explanation.
pub const LIME_TOP_FEATURES: usize = 5;

/// Ridge penalty on the surrogate coefficients (the intercept is free).
pub const LIME_RIDGE_LAMBDA: f64 = 1.0;

/// Floor on background standard deviations, so constant features neither
/// divide by zero nor produce degenerate samplers.
pub const LIME_STD_FLOOR: f64 = 1e-9;

/// Surrogate explainer settings. The kernel width applies to distances in
/// background-standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub top_d: usize,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl LimeConfig {
    /// Defaults: 5000 samples, kernel width 0.75·√18, 5 kept features,
    /// ridge penalty 1.
    pub fn new(seed: u64) -> Self {
        LimeConfig {
            n_samples: LIME_SAMPLES,
            kernel_width: 0.75 * (N_FEATURES as f64).sqrt(),
            top_d: LIME_TOP_FEATURES,
            ridge_lambda: LIME_RIDGE_LAMBDA,
            seed,
        }
    }
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig::new(0)
    }
}

/// Per-feature mean and population standard deviation of the background
/// rows, with the deviation floored at [`LIME_STD_FLOOR`].
pub fn background_moments(background: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let m = background[0].len();
    let n = background.len() as f64;
    let mut mean = vec![0.0; m];
    for row in background {
        for (slot, v) in mean.iter_mut().zip(row) {
            *slot += v;
        }
    }
    for slot in &mut mean {
        *slot /= n;
    }
    let mut var = vec![0.0; m];
    for row in background {
        for j in 0..m {
            let d = row[j] - mean[j];
            var[j] += d * d;
        }
    }
    let std = var
        .iter()
        .map(|v| (v / n).sqrt().max(LIME_STD_FLOOR))
        .collect();
    Ok((mean, std))
}

/// Draws the perturbation neighbourhood: row 0 is the instance itself, and
/// each later row perturbs every feature independently with
/// Normal(x_j, std_j). Sampling order is row-major, so the stream of draws
/// is pinned and reproducible from the same generator state.
pub fn sample_neighborhood(
    x: &[f64],
    std: &[f64],
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let normals: Vec<Normal<f64>> = x
        .iter()
        .zip(std)
        .map(|(&xj, &sj)| Normal::new(xj, sj).expect("floored std is positive"))
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    samples.push(x.to_vec());
    for _ in 1..n_samples {
        samples.push(normals.iter().map(|nj| nj.sample(rng)).collect());
    }
    samples
}

/// Explains one prediction with a local sparse linear surrogate.
///
/// The target is always the model's predicted class. Samples are weighted
/// by exp(−d²/width²) with d the Euclidean distance to the instance in
/// background-standardized units, and the ridge fit runs on standardized,
/// weighted-centered features so the intercept stays unpenalized. The
/// per-instance generator is derived from `(cfg.seed, tower_id)`, making
/// each explanation independent of batch order.
pub fn lime_explain(
    model: &Model,
    tower_id: &str,
    x: &[f64],
    background: &[Vec<f64>],
    cfg: &LimeConfig,
) -> Result<Explanation> {
    let m = x.len();
    let (mean, std) = background_moments(background)?;
    assert_eq!(mean.len(), m, "background and instance widths differ");

    let mut rng = seeding::substream(cfg.seed, &format!("lime-{tower_id}"));
    let samples = sample_neighborhood(x, &std, cfg.n_samples, &mut rng);
    let n = samples.len();

    let predicted = model.predict(x);
    let target = predicted as usize;
    let y: Vec<f64> = samples
        .iter()
        .map(|z| model.predict_proba(z)[target])
        .collect();

    let width2 = cfg.kernel_width * cfg.kernel_width;
    let weights: Vec<f64> = samples
        .iter()
        .map(|z| {
            let d2: f64 = (0..m)
                .map(|j| {
                    let d = (z[j] - x[j]) / std[j];
                    d * d
                })
                .sum();
            (-d2 / width2).exp()
        })
        .collect();

    let standardized = DMatrix::from_fn(n, m, |i, j| (samples[i][j] - mean[j]) / std[j]);
    let weight_sum: f64 = weights.iter().sum();
    let mut col_mean = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            col_mean[j] += weights[i] * standardized[(i, j)];
        }
    }
    for slot in &mut col_mean {
        *slot /= weight_sum;
    }
    let y_mean = weights
        .iter()
        .zip(&y)
        .map(|(w, yi)| w * yi)
        .sum::<f64>()
        / weight_sum;

    let centered = DMatrix::from_fn(n, m, |i, j| standardized[(i, j)] - col_mean[j]);
    let weighted = DMatrix::from_fn(n, m, |i, j| weights[i] * centered[(i, j)]);
    let y_centered = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let gram = centered.transpose() * &weighted
        + DMatrix::identity(m, m) * cfg.ridge_lambda;
    let rhs = weighted.transpose() * y_centered;
    let beta = gram
        .lu()
        .solve(&rhs)
        .expect("ridge system is positive definite");

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    let mut relevance = vec![0.0; m];
    for &j in order.iter().take(cfg.top_d.min(m)) {
        relevance[j] = beta[j];
    }

    Ok(Explanation {
        tower_id: tower_id.to_string(),
        method: Method::Lime,
        predicted_class: predicted,
        target_class: predicted,
        base_value: None,
        relevance,
    })
}
