//! Mean relevance matrices over batches of explanations.
//!
//! A batch of per-instance explanations collapses into one
//! features-by-classes matrix of mean relevance, with per-cell counts
//! recording how many instances fed each cell. Batches can be restricted
//! to urban or rural towers, and Shapley batches can populate all class
//! columns instead of only the predicted ones.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::N_CLASSES;
use crate::geo::io::io_err;
use crate::geo::Urbanicity;
use crate::network::{FEATURE_NAMES, N_FEATURES};
use crate::{Error, Result};

use super::{batch_method, Explanation, Method};

/// Which (instance, class) pairs feed the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMode {
    /// Each instance contributes one column: its predicted class.
    PredictedOnly,
    /// Each instance contributes every class column. Shapley only, since
    /// the surrogate explains nothing but the predicted class.
    AllClasses,
}

/// Which towers feed the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationFilter {
    All,
    Urban,
    Rural,
}

impl PopulationFilter {
    fn admits(&self, u: Urbanicity) -> bool {
        match self {
            PopulationFilter::All => true,
            PopulationFilter::Urban => u == Urbanicity::Urban,
            PopulationFilter::Rural => u == Urbanicity::Rural,
        }
    }
}

/// Mean relevance per (feature, class) cell with the instance count that
/// produced it. Cells with count 0 hold mean 0 and are written as empty
/// CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMatrix {
    pub method: Method,
    pub class_mode: ClassMode,
    pub population_filter: PopulationFilter,
    pub mean: Vec<Vec<f64>>,
    pub count: Vec<Vec<usize>>,
}

/// Collapses a batch of explanations into a mean relevance matrix.
///
/// Contributions are sorted by (tower id, target class) before summing, so
/// the result is bitwise independent of input order. Population filters
/// look towers up in `urbanicity`; a tower missing from the map is an
/// error rather than a silent drop.
pub fn aggregate_explanations(
    explanations: &[Explanation],
    class_mode: ClassMode,
    population_filter: PopulationFilter,
    urbanicity: &BTreeMap<String, Urbanicity>,
) -> Result<AggregateMatrix> {
    let method = batch_method(explanations)?;
    if class_mode == ClassMode::AllClasses && method == Method::Lime {
        return Err(Error::AllClassesUnsupported);
    }
    let n_features = explanations[0].relevance.len();

    let mut kept: Vec<&Explanation> = Vec::new();
    for (index, e) in explanations.iter().enumerate() {
        if class_mode == ClassMode::PredictedOnly && e.target_class != e.predicted_class {
            continue;
        }
        if population_filter != PopulationFilter::All {
            let u = urbanicity
                .get(&e.tower_id)
                .copied()
                .ok_or_else(|| Error::UnknownTower {
                    index,
                    id: e.tower_id.clone(),
                })?;
            if !population_filter.admits(u) {
                continue;
            }
        }
        kept.push(e);
    }
    kept.sort_by(|a, b| {
        a.tower_id
            .cmp(&b.tower_id)
            .then(a.target_class.cmp(&b.target_class))
    });

    let mut sum = vec![vec![0.0; N_CLASSES]; n_features];
    let mut count = vec![vec![0usize; N_CLASSES]; n_features];
    for e in kept {
        let class = e.target_class as usize;
        assert!(class < N_CLASSES, "target class out of range");
        for (f, v) in e.relevance.iter().enumerate() {
            sum[f][class] += v;
            count[f][class] += 1;
        }
    }
    let mean = sum
        .iter()
        .zip(&count)
        .map(|(srow, crow)| {
            srow.iter()
                .zip(crow)
                .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(AggregateMatrix {
        method,
        class_mode,
        population_filter,
        mean,
        count,
    })
}

/// Writes the matrix as CSV: one row per feature, one column per class,
/// empty fields where no instance contributed.
pub fn write_aggregate_csv(path: &Path, matrix: &AggregateMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header = String::from("feature");
    for k in 0..N_CLASSES {
        header.push_str(&format!(",class_{k}"));
    }
    writeln!(out, "{header}").map_err(|e| io_err(path, e))?;
    for (f, (mrow, crow)) in matrix.mean.iter().zip(&matrix.count).enumerate() {
        let name = if matrix.mean.len() == N_FEATURES {
            FEATURE_NAMES[f].to_string()
        } else {
            format!("f{f}")
        };
        let mut line = name;
        for (m, c) in mrow.iter().zip(crow) {
            line.push(',');
            if *c > 0 {
                line.push_str(&format!("{m}"));
            }
        }
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn shap(id: &str, predicted: u8, target: u8, relevance: Vec<f64>) -> Explanation {
        Explanation {
            tower_id: id.to_string(),
            method: Method::Shap,
            predicted_class: predicted,
            target_class: target,
            base_value: Some(0.1),
            relevance,
        }
    }

    fn towns() -> BTreeMap<String, Urbanicity> {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), Urbanicity::Urban);
        m.insert("b".to_string(), Urbanicity::Rural);
        m.insert("c".to_string(), Urbanicity::Urban);
        m
    }

    #[test]
    fn means_and_counts_are_per_cell() {
        let batch = vec![
            shap("a", 2, 2, vec![1.0, 3.0]),
            shap("b", 2, 2, vec![3.0, 5.0]),
            shap("c", 4, 4, vec![10.0, -2.0]),
        ];
        let m = aggregate_explanations(
            &batch,
            ClassMode::PredictedOnly,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        assert_eq!(m.mean[0][2], 2.0);
        assert_eq!(m.mean[1][2], 4.0);
        assert_eq!(m.count[0][2], 2);
        assert_eq!(m.mean[0][4], 10.0);
        assert_eq!(m.count[1][4], 1);
        assert_eq!(m.count[0][0], 0);
        assert_eq!(m.mean[0][0], 0.0);
    }

    #[test]
    fn predicted_only_skips_off_class_rows() {
        let batch = vec![
            shap("a", 2, 2, vec![1.0]),
            shap("a", 2, 7, vec![100.0]),
        ];
        let predicted = aggregate_explanations(
            &batch,
            ClassMode::PredictedOnly,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        assert_eq!(predicted.count[0][7], 0);
        let all = aggregate_explanations(
            &batch,
            ClassMode::AllClasses,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        assert_eq!(all.count[0][7], 1);
        assert_eq!(all.mean[0][7], 100.0);
    }

    #[test]
    fn input_order_never_changes_the_result() {
        let batch = vec![
            shap("a", 2, 2, vec![0.1, 0.7]),
            shap("b", 2, 2, vec![0.3, -0.2]),
            shap("c", 2, 2, vec![-0.9, 0.55]),
            shap("a", 3, 3, vec![0.25, 0.45]),
        ];
        let forward = aggregate_explanations(
            &batch,
            ClassMode::AllClasses,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        let mut reversed = batch.clone();
        reversed.reverse();
        let backward = aggregate_explanations(
            &reversed,
            ClassMode::AllClasses,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn filtering_commutes_with_aggregation() {
        let batch = vec![
            shap("a", 1, 1, vec![0.4]),
            shap("b", 1, 1, vec![0.6]),
            shap("c", 1, 1, vec![0.8]),
        ];
        let urban_only: Vec<Explanation> = batch
            .iter()
            .filter(|e| e.tower_id != "b")
            .cloned()
            .collect();
        let filtered = aggregate_explanations(
            &batch,
            ClassMode::PredictedOnly,
            PopulationFilter::Urban,
            &towns(),
        )
        .unwrap();
        let manual = aggregate_explanations(
            &urban_only,
            ClassMode::PredictedOnly,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        assert_eq!(filtered.mean, manual.mean);
        assert_eq!(filtered.count, manual.count);
    }

    #[test]
    fn lime_cannot_aggregate_all_classes() {
        let batch = vec![Explanation {
            tower_id: "a".into(),
            method: Method::Lime,
            predicted_class: 1,
            target_class: 1,
            base_value: None,
            relevance: vec![0.5],
        }];
        assert!(matches!(
            aggregate_explanations(
                &batch,
                ClassMode::AllClasses,
                PopulationFilter::All,
                &towns()
            ),
            Err(Error::AllClassesUnsupported)
        ));
    }

    #[test]
    fn unmapped_towers_fail_population_filters() {
        let batch = vec![shap("zz", 1, 1, vec![0.5])];
        match aggregate_explanations(
            &batch,
            ClassMode::PredictedOnly,
            PopulationFilter::Rural,
            &towns(),
        ) {
            Err(Error::UnknownTower { id, .. }) => assert_eq!(id, "zz"),
            other => panic!("expected UnknownTower, got {other:?}"),
        }
    }

    #[test]
    fn csv_leaves_empty_cells_for_zero_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let batch = vec![shap("a", 2, 2, vec![1.5, -0.25])];
        let m = aggregate_explanations(
            &batch,
            ClassMode::PredictedOnly,
            PopulationFilter::All,
            &towns(),
        )
        .unwrap();
        write_aggregate_csv(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("feature,class_0,"));
        assert_eq!(lines[1], "f0,,,1.5,,,,,,,");
        assert_eq!(lines[2], "f1,,,-0.25,,,,,,,");
    }
}
