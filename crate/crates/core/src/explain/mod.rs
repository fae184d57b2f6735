//! Local explanations for trained classifiers.
//!
//! Two explainers produce per-feature relevance scores for individual
//! predictions. [`lime`] fits a sparse linear surrogate in a sampled
//! neighbourhood of the instance and works with any probabilistic model.
//! [`shap`] computes exact path-dependent Shapley values and requires a
//! tree ensemble. [`aggregate`] turns collections of either into
//! feature-by-class mean matrices for reporting.

pub mod aggregate;
pub mod lime;
pub mod shap;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo::io::{io_err, parse_err, require_exists};
use crate::{Error, Result};

pub use aggregate::{
    aggregate_explanations, write_aggregate_csv, AggregateMatrix, ClassMode, PopulationFilter,
};
pub use lime::{lime_explain, LimeConfig};
pub use shap::{brute_force_shapley, ensemble_shap, tree_shap, tree_shap_all, tree_shap_matrix};

/// Which explainer produced a relevance vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Lime,
    Shap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lime => "LIME",
            Method::Shap => "SHAP",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "LIME" | "lime" => Ok(Method::Lime),
            "SHAP" | "shap" => Ok(Method::Shap),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// One explained prediction: per-feature relevance for `target_class`.
///
/// Surrogate explanations always target the predicted class and carry no
/// base value. Shapley explanations may target any class; `base_value` is
/// the model's expected probability for that class over the training
/// distribution, and relevance sums to the predicted probability minus it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub tower_id: String,
    pub method: Method,
    pub predicted_class: u8,
    pub target_class: u8,
    pub base_value: Option<f64>,
    pub relevance: Vec<f64>,
}

/// Writes explanations as JSON lines, one object per line.
pub fn write_explanations_jsonl(path: &Path, explanations: &[Explanation]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for e in explanations {
        let line = serde_json::to_string(e)
            .map_err(|e| parse_err(path, 0, format!("serialize: {e}")))?;
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads explanations written by [`write_explanations_jsonl`].
pub fn read_explanations_jsonl(path: &Path) -> Result<Vec<Explanation>> {
    require_exists(path)?;
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Explanation =
            serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        out.push(e);
    }
    Ok(out)
}

/// Checks that a batch shares one method and one feature-schema width,
/// returning that method. Empty batches and mixed batches are rejected.
pub(crate) fn batch_method(explanations: &[Explanation]) -> Result<Method> {
    let first = explanations.first().ok_or(Error::MixedExplanations)?;
    let width = first.relevance.len();
    for e in explanations {
        if e.method != first.method || e.relevance.len() != width {
            return Err(Error::MixedExplanations);
        }
    }
    Ok(first.method)
}
