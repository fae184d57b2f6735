//! Evaluation metrics: accuracy, MAE on class indices, the MAE ratio, the
//! confusion matrix, and urban/rural disaggregated accuracies.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, N_CLASSES};
use crate::geo::Urbanicity;
use crate::models::Model;

/// Largest possible absolute error between two of the ten classes.
pub const MAE_MAX: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub mae: f64,
    /// mae / 9, the error normalised by its maximum.
    pub mae_ratio: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    /// `None` when the sub-population is empty (undefined, not zero).
    pub acc_urban: Option<f64>,
    pub acc_rural: Option<f64>,
    pub n_urban: usize,
    pub n_rural: usize,
}

/// Accuracy, MAE, MAE ratio, and confusion matrix of paired predictions and
/// labels.
pub fn prediction_metrics(pred: &[u8], truth: &[u8]) -> (f64, f64, f64, Vec<Vec<usize>>) {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    let mut confusion = vec![vec![0usize; N_CLASSES]; N_CLASSES];
    let mut hits = 0usize;
    let mut abs_err = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        confusion[*t as usize][*p as usize] += 1;
        if p == t {
            hits += 1;
        }
        abs_err += (f64::from(*p) - f64::from(*t)).abs();
    }
    let acc = hits as f64 / n;
    let mae = abs_err / n;
    (acc, mae, mae / MAE_MAX, confusion)
}

fn subpopulation_accuracy(
    pred: &[u8],
    rows: &FeatureTable,
    which: Urbanicity,
) -> (Option<f64>, usize) {
    let mut hits = 0usize;
    let mut count = 0usize;
    for (p, row) in pred.iter().zip(&rows.rows) {
        if row.urbanicity == which {
            count += 1;
            if *p == row.class {
                hits += 1;
            }
        }
    }
    if count == 0 {
        (None, 0)
    } else {
        (Some(hits as f64 / count as f64), count)
    }
}

/// Evaluates a model on a labeled table, including the urban/rural
/// disaggregation.
pub fn evaluate(model: &Model, test: &FeatureTable) -> Metrics {
    let pred: Vec<u8> = test.rows.iter().map(|r| model.predict(&r.features)).collect();
    let truth: Vec<u8> = test.rows.iter().map(|r| r.class).collect();
    let (acc, mae, mae_ratio, confusion) = prediction_metrics(&pred, &truth);
    let (acc_urban, n_urban) = subpopulation_accuracy(&pred, test, Urbanicity::Urban);
    let (acc_rural, n_rural) = subpopulation_accuracy(&pred, test, Urbanicity::Rural);
    Metrics {
        acc,
        mae,
        mae_ratio,
        confusion,
        acc_urban,
        acc_rural,
        n_urban,
        n_rural,
    }
}

/// Writes the confusion matrix as CSV: header `true_class,pred_0..pred_9`,
/// one row per true class.
pub fn write_confusion_csv(path: &std::path::Path, confusion: &[Vec<usize>]) -> crate::Result<()> {
    let mut out = String::from("true_class");
    for k in 0..N_CLASSES {
        out.push_str(&format!(",pred_{k}"));
    }
    out.push('\n');
    for (t, row) in confusion.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| crate::geo::io::io_err(path, e))
}
