//! The ordinal learning problem: binning, subsampling, and splits.
//!
//! Electrification rates are binned into ten 0.1-wide classes (the last bin
//! closed at 1.0). Because fully electrified cells dominate, class 9 is
//! subsampled down to the mean class count on training sets. The data is
//! split 7:3 into model-train and model-test, and model-test is split 7:3
//! again into the explanation train and test sets.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geo::io::{io_err, parse_err, require_exists};
use crate::geo::Urbanicity;
use crate::network::{FEATURE_NAMES, N_FEATURES};
use crate::seeding;

/// Number of ordinal classes.
pub const N_CLASSES: usize = 10;

/// One labeled tower row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub tower_id: String,
    pub features: [f64; N_FEATURES],
    pub rate: f64,
    pub class: u8,
    pub density: f64,
    pub urbanicity: Urbanicity,
}

/// A labeled feature table; row order is meaningful and preserved by every
/// transformation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows per class, indices 0..=9.
    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        let mut counts = [0; N_CLASSES];
        for row in &self.rows {
            counts[row.class as usize] += 1;
        }
        counts
    }

    /// Share of rows in the top class; the imbalance statistic.
    pub fn imbalance(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.class_counts()[N_CLASSES - 1] as f64 / self.rows.len() as f64
    }
}

/// Maps a rate in [0,1] to its class: 0.1-wide half-open bins, the last bin
/// closed so that 1.0 falls in class 9.
pub fn bin_label(rate: f64) -> u8 {
    ((rate * 10.0).floor().clamp(0.0, 9.0)) as u8
}

/// Reduces class 9 to the rounded mean of the ten pre-subsampling class
/// counts, dropping uniformly chosen rows without replacement. A class-9
/// count at or below the mean is left untouched. Row order is preserved.
pub fn subsample_majority(table: &FeatureTable, seed: u64) -> FeatureTable {
    let counts = table.class_counts();
    let mean = counts.iter().sum::<usize>() as f64 / N_CLASSES as f64;
    let target = mean.round() as usize;
    let majority = counts[N_CLASSES - 1];
    if majority <= target {
        return table.clone();
    }
    let nine_positions: Vec<usize> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.class as usize == N_CLASSES - 1)
        .map(|(i, _)| i)
        .collect();
    let mut rng = seeding::substream(seed, "subsample");
    let mut shuffled = nine_positions.clone();
    shuffled.shuffle(&mut rng);
    let keep: HashSet<usize> = shuffled.into_iter().take(target).collect();
    FeatureTable {
        rows: table
            .rows
            .iter()
            .enumerate()
            .filter(|(i, r)| r.class as usize != N_CLASSES - 1 || keep.contains(i))
            .map(|(_, r)| r.clone())
            .collect(),
    }
}

/// Splits rows uniformly at random: part A gets round(ratio·N) rows. Both
/// parts keep the input row order.
pub fn split(table: &FeatureTable, ratio: f64, seed: u64) -> (FeatureTable, FeatureTable) {
    let n = table.len();
    let take = (ratio * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeding::substream(seed, "split");
    order.shuffle(&mut rng);
    let chosen: HashSet<usize> = order.into_iter().take(take).collect();
    let (mut a, mut b) = (Vec::with_capacity(take), Vec::with_capacity(n - take));
    for (i, row) in table.rows.iter().enumerate() {
        if chosen.contains(&i) {
            a.push(row.clone());
        } else {
            b.push(row.clone());
        }
    }
    (FeatureTable { rows: a }, FeatureTable { rows: b })
}

/// Which of the four sets a tower belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    ModelTrain,
    ModelTest,
    ExplTrain,
    ExplTest,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::ModelTrain => "model_train",
            SplitTag::ModelTest => "model_test",
            SplitTag::ExplTrain => "expl_train",
            SplitTag::ExplTest => "expl_test",
        })
    }
}

impl std::str::FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "model_train" => Ok(SplitTag::ModelTrain),
            "model_test" => Ok(SplitTag::ModelTest),
            "expl_train" => Ok(SplitTag::ExplTrain),
            "expl_test" => Ok(SplitTag::ExplTest),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// The two-stage partition. `model_test` is the full first-stage holdout and
/// equals `expl_train` ∪ `expl_test`; subsampling is applied later, by the
/// consumer of each training set.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub model_train: FeatureTable,
    pub model_test: FeatureTable,
    pub expl_train: FeatureTable,
    pub expl_test: FeatureTable,
}

/// 7:3 split of the table, then 7:3 split of the holdout.
pub fn two_stage_split(table: &FeatureTable, seed: u64) -> SplitDataset {
    let (model_train, model_test) = split(table, 0.7, seeding::derive_seed(seed, "stage-model"));
    let (expl_train, expl_test) = split(&model_test, 0.7, seeding::derive_seed(seed, "stage-expl"));
    SplitDataset {
        model_train,
        model_test,
        expl_train,
        expl_test,
    }
}

fn feature_header() -> String {
    let mut cols = vec!["tower_id"];
    cols.extend(FEATURE_NAMES);
    cols.extend(["rate", "class", "density", "urbanicity"]);
    cols.join(",")
}

/// Writes the labeled feature table
/// (`tower_id,cn_te,…,sn_ratio,rate,class,density,urbanicity`).
pub fn write_feature_table(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut out = feature_header();
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.tower_id);
        for v in &row.features {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            row.rate, row.class, row.density, row.urbanicity
        ));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    require_exists(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != N_FEATURES + 5 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, got {}", N_FEATURES + 5, record.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64> {
            record[idx]
                .parse()
                .map_err(|_| parse_err(path, line, format!("column {idx}: not a number")))
        };
        let mut features = [0.0; N_FEATURES];
        for (k, slot) in features.iter_mut().enumerate() {
            *slot = num(k + 1)?;
        }
        rows.push(FeatureRow {
            tower_id: record[0].to_string(),
            features,
            rate: num(N_FEATURES + 1)?,
            class: record[N_FEATURES + 2]
                .parse()
                .map_err(|_| parse_err(path, line, "class: not an integer"))?,
            density: num(N_FEATURES + 3)?,
            urbanicity: record[N_FEATURES + 4]
                .parse()
                .map_err(|m: String| parse_err(path, line, m))?,
        });
    }
    Ok(FeatureTable { rows })
}

/// Writes the split assignment (`tower_id,split_tag`), one row per tower,
/// using the leaf tags (model_train, expl_train, expl_test).
pub fn write_splits_csv(path: &Path, splits: &SplitDataset) -> Result<()> {
    let mut out = String::from("tower_id,split_tag\n");
    for (table, tag) in [
        (&splits.model_train, SplitTag::ModelTrain),
        (&splits.expl_train, SplitTag::ExplTrain),
        (&splits.expl_test, SplitTag::ExplTest),
    ] {
        for row in &table.rows {
            out.push_str(&format!("{},{}\n", row.tower_id, tag));
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Rebuilds the four tables from a feature table and a split assignment.
pub fn read_splits_csv(path: &Path, table: &FeatureTable) -> Result<SplitDataset> {
    require_exists(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut tags: std::collections::HashMap<String, SplitTag> = std::collections::HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let tag: SplitTag = record
            .get(1)
            .ok_or_else(|| parse_err(path, line, "missing split_tag"))?
            .parse()
            .map_err(|m: String| parse_err(path, line, m))?;
        tags.insert(record[0].to_string(), tag);
    }
    let mut splits = SplitDataset {
        model_train: FeatureTable::default(),
        model_test: FeatureTable::default(),
        expl_train: FeatureTable::default(),
        expl_test: FeatureTable::default(),
    };
    for row in &table.rows {
        match tags.get(&row.tower_id) {
            Some(SplitTag::ModelTrain) => splits.model_train.rows.push(row.clone()),
            Some(SplitTag::ExplTrain) => {
                splits.expl_train.rows.push(row.clone());
                splits.model_test.rows.push(row.clone());
            }
            Some(SplitTag::ExplTest) | Some(SplitTag::ModelTest) => {
                if tags.get(&row.tower_id) == Some(&SplitTag::ExplTest) {
                    splits.expl_test.rows.push(row.clone());
                }
                splits.model_test.rows.push(row.clone());
            }
            None => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    message: format!("tower {} has no split tag", row.tower_id),
                })
            }
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: usize, class: u8) -> FeatureRow {
        FeatureRow {
            tower_id: format!("t{id}"),
            features: [id as f64; N_FEATURES],
            rate: class as f64 / 10.0 + 0.05,
            class,
            density: 100.0,
            urbanicity: Urbanicity::Rural,
        }
    }

    fn table_with_counts(counts: &[usize; N_CLASSES]) -> FeatureTable {
        let mut rows = Vec::new();
        for (class, count) in counts.iter().enumerate() {
            for _ in 0..*count {
                rows.push(row(rows.len(), class as u8));
            }
        }
        FeatureTable { rows }
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_label(0.0), 0);
        assert_eq!(bin_label(0.1), 1);
        assert_eq!(bin_label(0.95), 9);
        assert_eq!(bin_label(1.0), 9);
        assert_eq!(bin_label(0.8999999), 8);
    }

    #[test]
    fn subsample_reduces_class_nine_to_the_mean() {
        let mut counts = [10; N_CLASSES];
        counts[9] = 110;
        let table = table_with_counts(&counts);
        // Mean over all ten classes: (9·10 + 110)/10 = 20.
        let reduced = subsample_majority(&table, 3);
        let after = reduced.class_counts();
        assert_eq!(after[9], 20);
        assert_eq!(&after[..9], &counts[..9]);
    }

    #[test]
    fn subsample_is_a_noop_when_balanced() {
        let table = table_with_counts(&[5; N_CLASSES]);
        let reduced = subsample_majority(&table, 3);
        assert_eq!(reduced.rows, table.rows);
    }

    #[test]
    fn subsample_is_deterministic_and_membership_only() {
        let mut counts = [3; N_CLASSES];
        counts[9] = 40;
        let table = table_with_counts(&counts);
        let a = subsample_majority(&table, 11);
        let b = subsample_majority(&table, 11);
        assert_eq!(a.rows, b.rows);
        let originals: HashSet<&str> = table.rows.iter().map(|r| r.tower_id.as_str()).collect();
        for kept in &a.rows {
            assert!(originals.contains(kept.tower_id.as_str()));
        }
        let c = subsample_majority(&table, 12);
        assert_ne!(
            a.rows.iter().map(|r| &r.tower_id).collect::<Vec<_>>(),
            c.rows.iter().map(|r| &r.tower_id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn split_sizes_round() {
        let table = table_with_counts(&[10; N_CLASSES]);
        let (a, b) = split(&table, 0.7, 5);
        assert_eq!((a.len(), b.len()), (70, 30));
        let (a2, b2) = split(&table, 0.7, 5);
        assert_eq!(a.rows, a2.rows);
        assert_eq!(b.rows, b2.rows);
    }

    #[test]
    fn two_stage_sizes_match_the_published_arithmetic() {
        let rows: Vec<FeatureRow> = (0..1587).map(|i| row(i, (i % 10) as u8)).collect();
        let table = FeatureTable { rows };
        let splits = two_stage_split(&table, 7);
        assert_eq!(splits.model_train.len(), 1111);
        assert_eq!(splits.model_test.len(), 476);
        assert_eq!(splits.expl_train.len(), 333);
        assert_eq!(splits.expl_test.len(), 143);
    }

    #[test]
    fn feature_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let table = table_with_counts(&[2, 0, 1, 0, 0, 0, 0, 0, 0, 3]);
        write_feature_table(&path, &table).unwrap();
        assert_eq!(read_feature_table(&path).unwrap(), table);
        let header = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string();
        assert!(header.starts_with("tower_id,cn_te,"));
        assert!(header.ends_with("sn_ratio,rate,class,density,urbanicity"));
    }

    #[test]
    fn splits_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.csv");
        let table = table_with_counts(&[10; N_CLASSES]);
        let splits = two_stage_split(&table, 9);
        write_splits_csv(&path, &splits).unwrap();
        let back = read_splits_csv(&path, &table).unwrap();
        assert_eq!(back.model_train.rows, splits.model_train.rows);
        assert_eq!(back.model_test.rows, splits.model_test.rows);
        assert_eq!(back.expl_train.rows, splits.expl_train.rows);
        assert_eq!(back.expl_test.rows, splits.expl_test.rows);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bin_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bin_label(lo) <= bin_label(hi));
        }

        #[test]
        fn split_partitions(n in 1usize..60, seed in 0u64..1000) {
            let rows: Vec<FeatureRow> = (0..n).map(|i| row(i, (i % 10) as u8)).collect();
            let table = FeatureTable { rows };
            let (a, b) = split(&table, 0.7, seed);
            prop_assert_eq!(a.len() + b.len(), n);
            prop_assert_eq!(a.len(), (0.7 * n as f64).round() as usize);
            let mut ids: Vec<&str> = a
                .rows
                .iter()
                .chain(&b.rows)
                .map(|r| r.tower_id.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
