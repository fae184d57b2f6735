//! Multinomial logistic regression.
//!
//! Full-batch gradient descent with a backtracking line search on internally
//! standardized features. Descent stops when the gradient norm falls below
//! 1e-6 (or at the iteration cap, whichever comes first).

use serde::{Deserialize, Serialize};

use crate::models::boost::softmax;

pub const LOG_GRAD_TOLERANCE: f64 = 1e-6;
pub const LOG_MAX_ITER: usize = 10_000;

/// Weights act on standardized features; the stored means and stds replay
/// the standardization at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// Row per class, column per feature.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LogisticModel {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_means.iter().zip(&self.feature_stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardize(x);
        let scores: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(wi, zi)| wi * zi).sum::<f64>())
            .collect();
        softmax(&scores)
    }
}

struct Standardized {
    rows: Vec<Vec<f64>>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

fn standardize_columns(x: &[Vec<f64>]) -> Standardized {
    let n = x.len() as f64;
    let m = x[0].len();
    let mut means = vec![0.0; m];
    for row in x {
        for (slot, v) in means.iter_mut().zip(row) {
            *slot += v;
        }
    }
    for slot in &mut means {
        *slot /= n;
    }
    let mut vars = vec![0.0; m];
    for row in x {
        for ((slot, v), mean) in vars.iter_mut().zip(row).zip(&means) {
            let d = v - mean;
            *slot += d * d;
        }
    }
    let stds: Vec<f64> = vars.iter().map(|v| (v / n).sqrt().max(1e-9)).collect();
    let rows = x
        .iter()
        .map(|row| {
            row.iter()
                .zip(means.iter().zip(&stds))
                .map(|(v, (mean, std))| (v - mean) / std)
                .collect()
        })
        .collect();
    Standardized { rows, means, stds }
}

fn mean_log_loss(z: &[Vec<f64>], y: &[u8], w: &[Vec<f64>], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (zi, yi) in z.iter().zip(y) {
        let scores: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(wk, bk)| bk + wk.iter().zip(zi).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let p = softmax(&scores);
        total -= p[*yi as usize].max(1e-300).ln();
    }
    total / z.len() as f64
}

/// Gradient of the mean log-loss in (weights, intercepts), flattened per
/// class.
fn gradient(z: &[Vec<f64>], y: &[u8], w: &[Vec<f64>], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = w.len();
    let m = w[0].len();
    let n = z.len() as f64;
    let mut gw = vec![vec![0.0; m]; k];
    let mut gb = vec![0.0; k];
    for (zi, yi) in z.iter().zip(y) {
        let scores: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(wk, bk)| bk + wk.iter().zip(zi).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let p = softmax(&scores);
        for class in 0..k {
            let err = p[class] - f64::from(*yi as usize == class);
            gb[class] += err;
            for (slot, zv) in gw[class].iter_mut().zip(zi) {
                *slot += err * zv;
            }
        }
    }
    for row in &mut gw {
        for slot in row {
            *slot /= n;
        }
    }
    for slot in &mut gb {
        *slot /= n;
    }
    (gw, gb)
}

fn grad_norm(gw: &[Vec<f64>], gb: &[f64]) -> f64 {
    let sum: f64 = gw
        .iter()
        .flatten()
        .chain(gb)
        .map(|g| g * g)
        .sum();
    sum.sqrt()
}

pub fn train_logistic(x: &[Vec<f64>], y: &[u8], n_classes: usize) -> LogisticModel {
    let std = standardize_columns(x);
    let m = std.rows[0].len();
    let mut w = vec![vec![0.0; m]; n_classes];
    let mut b = vec![0.0; n_classes];
    let mut step = 1.0;
    let mut loss = mean_log_loss(&std.rows, y, &w, &b);
    for _ in 0..LOG_MAX_ITER {
        let (gw, gb) = gradient(&std.rows, y, &w, &b);
        if grad_norm(&gw, &gb) < LOG_GRAD_TOLERANCE {
            break;
        }
        // Backtracking line search; the accepted step seeds the next try.
        step *= 2.0;
        loop {
            let wt: Vec<Vec<f64>> = w
                .iter()
                .zip(&gw)
                .map(|(wk, gk)| wk.iter().zip(gk).map(|(a, g)| a - step * g).collect())
                .collect();
            let bt: Vec<f64> = b.iter().zip(&gb).map(|(a, g)| a - step * g).collect();
            let trial = mean_log_loss(&std.rows, y, &wt, &bt);
            if trial < loss || step < 1e-12 {
                w = wt;
                b = bt;
                loss = trial;
                break;
            }
            step /= 2.0;
        }
    }
    LogisticModel {
        n_classes,
        feature_means: std.means,
        feature_stds: std.stds,
        weights: w,
        intercepts: b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_blobs() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let noise = (i as f64 * 0.9).sin() * 0.4;
            x.push(vec![i as f64 * 0.1 + noise, -(i as f64) * 0.05]);
            y.push(0);
            x.push(vec![5.0 + i as f64 * 0.1 - noise, 3.0]);
            y.push(7);
        }
        (x, y)
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (x, y) = two_blobs();
        let model = train_logistic(&x, &y, 10);
        for xi in &x {
            let p = model.predict_proba(xi);
            assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn separable_classes_are_learned() {
        let (x, y) = two_blobs();
        let model = train_logistic(&x, &y, 10);
        for (xi, yi) in x.iter().zip(&y) {
            let p = model.predict_proba(xi);
            let arg = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(arg, *yi as usize);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = two_blobs();
        let a = train_logistic(&x, &y, 10);
        let b = train_logistic(&x, &y, 10);
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_reaches_tolerance_on_noisy_data() {
        // Overlapping classes keep the optimum finite, so the gradient can
        // actually reach the tolerance.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.25;
            x.push(vec![t.sin(), t.cos()]);
            y.push((i % 2) as u8);
        }
        let model = train_logistic(&x, &y, 2);
        let std = standardize_columns(&x);
        let (gw, gb) = gradient(&std.rows, &y, &model.weights, &model.intercepts);
        assert!(grad_norm(&gw, &gb) < LOG_GRAD_TOLERANCE);
    }
}
