//! From-scratch ordinal-as-multiclass classifiers.
//!
//! Five model families share one interface: a 10-class probability vector
//! per input, argmax prediction with ties broken toward the lower class, and
//! a versioned JSON serialization that reloads bit-exactly.

pub mod bayes;
pub mod boost;
pub mod forest;
pub mod linear;
pub mod metrics;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, N_CLASSES};
use crate::error::{Error, Result};
use crate::geo::io::{io_err, parse_err, require_exists};

pub use bayes::BayesModel;
pub use boost::GbtModel;
pub use forest::TreeEnsemble;
pub use linear::LogisticModel;
pub use metrics::{evaluate, Metrics};
pub use tree::Tree;

/// On-disk model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "dt")]
    DecisionTree,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "gbt")]
    GradientBoostedTrees,
    #[serde(rename = "log")]
    LogisticRegression,
    #[serde(rename = "bay")]
    GaussianNaiveBayes,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoostedTrees,
        ModelKind::LogisticRegression,
        ModelKind::GaussianNaiveBayes,
    ];

    /// Short code used in file names and config lists.
    pub fn code(&self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::GradientBoostedTrees => "gbt",
            ModelKind::LogisticRegression => "log",
            ModelKind::GaussianNaiveBayes => "bay",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dt" => Ok(ModelKind::DecisionTree),
            "rf" => Ok(ModelKind::RandomForest),
            "gbt" => Ok(ModelKind::GradientBoostedTrees),
            "log" => Ok(ModelKind::LogisticRegression),
            "bay" => Ok(ModelKind::GaussianNaiveBayes),
            other => Err(format!(
                "unknown model kind {other:?} (expected dt, rf, gbt, log, or bay)"
            )),
        }
    }
}

/// What to train: the family and the seed its randomness derives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub seed: u64,
}

/// A trained classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model")]
pub enum Model {
    #[serde(rename = "dt")]
    DecisionTree(TreeEnsemble),
    #[serde(rename = "rf")]
    RandomForest(TreeEnsemble),
    #[serde(rename = "gbt")]
    GradientBoostedTrees(GbtModel),
    #[serde(rename = "log")]
    LogisticRegression(LogisticModel),
    #[serde(rename = "bay")]
    GaussianNaiveBayes(BayesModel),
}

/// Index of the largest probability, ties broken toward the lower class.
pub fn argmax_class(p: &[f64]) -> u8 {
    let mut best = 0usize;
    for (k, v) in p.iter().enumerate().skip(1) {
        if *v > p[best] {
            best = k;
        }
    }
    best as u8
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::DecisionTree(_) => ModelKind::DecisionTree,
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::GradientBoostedTrees(_) => ModelKind::GradientBoostedTrees,
            Model::LogisticRegression(_) => ModelKind::LogisticRegression,
            Model::GaussianNaiveBayes(_) => ModelKind::GaussianNaiveBayes,
        }
    }

    /// Class probabilities; non-negative and summing to 1 within 1e-9.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Model::DecisionTree(m) | Model::RandomForest(m) => m.predict_proba(x),
            Model::GradientBoostedTrees(m) => m.predict_proba(x),
            Model::LogisticRegression(m) => m.predict_proba(x),
            Model::GaussianNaiveBayes(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        argmax_class(&self.predict_proba(x))
    }

    /// The underlying ensemble when the model's probabilities are plain
    /// cover-free averages of leaf distributions, which is what the Shapley
    /// tree explainer requires. `None` for boosted, linear, and Bayes models.
    pub fn probability_ensemble(&self) -> Option<&TreeEnsemble> {
        match self {
            Model::DecisionTree(m) | Model::RandomForest(m) => Some(m),
            _ => None,
        }
    }
}

fn table_to_xy(table: &FeatureTable) -> (Vec<Vec<f64>>, Vec<u8>) {
    let x = table.rows.iter().map(|r| r.features.to_vec()).collect();
    let y = table.rows.iter().map(|r| r.class).collect();
    (x, y)
}

/// Trains one model. Fails on an empty table or one where a single class is
/// present.
pub fn train(spec: &ModelSpec, table: &FeatureTable) -> Result<Model> {
    if table.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let counts = table.class_counts();
    let present: Vec<usize> = (0..N_CLASSES).filter(|k| counts[*k] > 0).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass(present[0]));
    }
    let (x, y) = table_to_xy(table);
    Ok(match spec.kind {
        ModelKind::DecisionTree => {
            Model::DecisionTree(forest::train_decision_tree(&x, &y, N_CLASSES))
        }
        ModelKind::RandomForest => {
            Model::RandomForest(forest::train_random_forest(&x, &y, N_CLASSES, spec.seed))
        }
        ModelKind::GradientBoostedTrees => {
            Model::GradientBoostedTrees(boost::train_gbt(&x, &y, N_CLASSES))
        }
        ModelKind::LogisticRegression => {
            Model::LogisticRegression(linear::train_logistic(&x, &y, N_CLASSES))
        }
        ModelKind::GaussianNaiveBayes => {
            Model::GaussianNaiveBayes(bayes::train_bayes(&x, &y, N_CLASSES))
        }
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string(&file).expect("model serializes");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(parse_err(
            path,
            1,
            format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            ),
        ));
    }
    Ok(file.model)
}
