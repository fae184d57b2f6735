//! Binary decision trees in flat-array form.
//!
//! One node layout serves classification trees (leaf values are class
//! distributions), regression trees (leaf values are scalars, used by
//! boosting), and the Shapley explainers, which need per-node training
//! covers to weight conditional expectations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sentinel for "no child" in the flat arrays.
pub const NO_CHILD: i32 = -1;

/// A binary decision tree. Node j splits on `feature[j]` at `threshold[j]`;
/// rows with value <= threshold go left. Leaves have `NO_CHILD` children.
/// `cover[j]` counts the training rows that passed through node j, and
/// `values[j]` is the node's output vector (class distribution or scalar),
/// meaningful at leaves and cover-averaged at internal nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub children_left: Vec<i32>,
    pub children_right: Vec<i32>,
    pub feature: Vec<usize>,
    pub threshold: Vec<f64>,
    pub cover: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Tree {
    pub fn n_nodes(&self) -> usize {
        self.children_left.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children_left[node] == NO_CHILD
    }

    /// Index of the leaf the input falls into.
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = if x[self.feature[node]] <= self.threshold[node] {
                self.children_left[node] as usize
            } else {
                self.children_right[node] as usize
            };
        }
        node
    }

    /// Output vector of the matching leaf.
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        &self.values[self.leaf_for(x)]
    }

    /// Depth of the deepest leaf; a single leaf has depth 0.
    pub fn max_depth(&self) -> usize {
        fn walk(tree: &Tree, node: usize) -> usize {
            if tree.is_leaf(node) {
                0
            } else {
                1 + walk(tree, tree.children_left[node] as usize)
                    .max(walk(tree, tree.children_right[node] as usize))
            }
        }
        walk(self, 0)
    }

    /// Cover-weighted mean of the leaf values: the expected output when every
    /// split is taken both ways with training-frequency weights.
    pub fn expected_value(&self) -> Vec<f64> {
        let dim = self.values[0].len();
        let mut acc = vec![0.0; dim];
        let mut total = 0.0;
        for node in 0..self.n_nodes() {
            if self.is_leaf(node) {
                for (slot, v) in acc.iter_mut().zip(&self.values[node]) {
                    *slot += self.cover[node] * v;
                }
                total += self.cover[node];
            }
        }
        for slot in &mut acc {
            *slot /= total;
        }
        acc
    }
}

/// Options for growing a classification tree.
#[derive(Debug, Clone)]
pub struct TreeParams {
    pub n_classes: usize,
    /// `None` grows to purity.
    pub max_depth: Option<usize>,
    /// Features considered per split; `None` tries all.
    pub n_candidate_features: Option<usize>,
}

struct FlatBuilder {
    children_left: Vec<i32>,
    children_right: Vec<i32>,
    feature: Vec<usize>,
    threshold: Vec<f64>,
    cover: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl FlatBuilder {
    fn new() -> Self {
        FlatBuilder {
            children_left: Vec::new(),
            children_right: Vec::new(),
            feature: Vec::new(),
            threshold: Vec::new(),
            cover: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, cover: f64, value: Vec<f64>) -> usize {
        self.children_left.push(NO_CHILD);
        self.children_right.push(NO_CHILD);
        self.feature.push(0);
        self.threshold.push(0.0);
        self.cover.push(cover);
        self.values.push(value);
        self.children_left.len() - 1
    }

    fn finish(self) -> Tree {
        Tree {
            children_left: self.children_left,
            children_right: self.children_right,
            feature: self.feature,
            threshold: self.threshold,
            cover: self.cover,
            values: self.values,
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|c| {
            let p = *c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// The best (feature, threshold, weighted impurity) over the candidates, or
/// `None` when no split separates the rows.
fn best_classification_split(
    x: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    candidates: &[usize],
    n_classes: usize,
) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted: Vec<usize> = rows.to_vec();
    for &f in candidates {
        sorted.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]));
        let mut left_counts = vec![0usize; n_classes];
        let mut right_counts = vec![0usize; n_classes];
        for &i in sorted.iter() {
            right_counts[y[i] as usize] += 1;
        }
        for k in 0..n - 1 {
            let i = sorted[k];
            left_counts[y[i] as usize] += 1;
            right_counts[y[i] as usize] -= 1;
            let (a, b) = (x[i][f], x[sorted[k + 1]][f]);
            if a == b {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            let score = (n_left as f64 * gini(&left_counts, n_left)
                + n_right as f64 * gini(&right_counts, n_right))
                / n as f64;
            if best.map_or(true, |(_, _, s)| score < s - 1e-12) {
                best = Some((f, (a + b) / 2.0, score));
            }
        }
    }
    best
}

/// Grows a CART classification tree with Gini impurity. Candidate features
/// are resampled per node when `n_candidate_features` is set; leaf values are
/// class distributions.
pub fn fit_classification(
    x: &[Vec<f64>],
    y: &[u8],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty(), "cannot fit a tree to zero rows");
    let n_features = x[0].len();
    let all_features: Vec<usize> = (0..n_features).collect();
    let mut builder = FlatBuilder::new();
    let rows: Vec<usize> = (0..x.len()).collect();
    grow_classification(
        x,
        y,
        &rows,
        0,
        params,
        &all_features,
        rng,
        &mut builder,
    );
    builder.finish()
}

#[allow(clippy::too_many_arguments)]
fn grow_classification(
    x: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    depth: usize,
    params: &TreeParams,
    all_features: &[usize],
    rng: &mut ChaCha8Rng,
    builder: &mut FlatBuilder,
) -> usize {
    let mut counts = vec![0usize; params.n_classes];
    for &i in rows {
        counts[y[i] as usize] += 1;
    }
    let distribution: Vec<f64> = counts
        .iter()
        .map(|c| *c as f64 / rows.len() as f64)
        .collect();
    let node = builder.push(rows.len() as f64, distribution);

    let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    if pure || depth_capped || rows.len() < 2 {
        return node;
    }

    let candidates: Vec<usize> = match params.n_candidate_features {
        Some(m) if m < all_features.len() => {
            let mut picked: Vec<usize> = all_features
                .choose_multiple(rng, m)
                .copied()
                .collect();
            picked.sort_unstable();
            picked
        }
        _ => all_features.to_vec(),
    };
    let Some((feature, threshold, _)) =
        best_classification_split(x, y, rows, &candidates, params.n_classes)
    else {
        return node;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| x[i][feature] <= threshold);
    let left = grow_classification(x, y, &left_rows, depth + 1, params, all_features, rng, builder);
    let right =
        grow_classification(x, y, &right_rows, depth + 1, params, all_features, rng, builder);
    builder.feature[node] = feature;
    builder.threshold[node] = threshold;
    builder.children_left[node] = left as i32;
    builder.children_right[node] = right as i32;
    node
}

/// The best squared-error split, or `None` when no split separates the rows.
fn best_regression_split(
    x: &[Vec<f64>],
    t: &[f64],
    rows: &[usize],
) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    let n_features = x[rows[0]].len();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted: Vec<usize> = rows.to_vec();
    for f in 0..n_features {
        sorted.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]));
        let (mut ls, mut ls2) = (0.0, 0.0);
        let (mut rs, mut rs2) = (0.0, 0.0);
        for &i in sorted.iter() {
            rs += t[i];
            rs2 += t[i] * t[i];
        }
        for k in 0..n - 1 {
            let i = sorted[k];
            ls += t[i];
            ls2 += t[i] * t[i];
            rs -= t[i];
            rs2 -= t[i] * t[i];
            let (a, b) = (x[i][f], x[sorted[k + 1]][f]);
            if a == b {
                continue;
            }
            let n_left = (k + 1) as f64;
            let n_right = (n - k - 1) as f64;
            // Sum of within-side squared errors.
            let score = (ls2 - ls * ls / n_left) + (rs2 - rs * rs / n_right);
            if best.map_or(true, |(_, _, s)| score < s - 1e-12) {
                best = Some((f, (a + b) / 2.0, score));
            }
        }
    }
    best
}

/// Grows a depth-capped regression tree on squared error. `leaf_value` turns
/// the row set of a leaf into its scalar output, which lets boosting install
/// Newton-step leaf weights instead of plain means.
pub fn fit_regression(
    x: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    assert_eq!(x.len(), targets.len());
    assert!(!x.is_empty(), "cannot fit a tree to zero rows");
    let mut builder = FlatBuilder::new();
    let rows: Vec<usize> = (0..x.len()).collect();
    grow_regression(x, targets, &rows, 0, max_depth, leaf_value, &mut builder);
    // Internal node values become cover-weighted means of their children,
    // back to front so children are final before their parents.
    for node in (0..builder.children_left.len()).rev() {
        if builder.children_left[node] != NO_CHILD {
            let l = builder.children_left[node] as usize;
            let r = builder.children_right[node] as usize;
            let total = builder.cover[l] + builder.cover[r];
            builder.values[node] = vec![
                (builder.cover[l] * builder.values[l][0]
                    + builder.cover[r] * builder.values[r][0])
                    / total,
            ];
        }
    }
    builder.finish()
}

fn grow_regression(
    x: &[Vec<f64>],
    t: &[f64],
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    builder: &mut FlatBuilder,
) -> usize {
    let node = builder.push(rows.len() as f64, vec![0.0]);
    let split = if depth >= max_depth || rows.len() < 2 {
        None
    } else {
        best_regression_split(x, t, rows)
    };
    match split {
        Some((feature, threshold, _)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][feature] <= threshold);
            let left =
                grow_regression(x, t, &left_rows, depth + 1, max_depth, leaf_value, builder);
            let right =
                grow_regression(x, t, &right_rows, depth + 1, max_depth, leaf_value, builder);
            builder.feature[node] = feature;
            builder.threshold[node] = threshold;
            builder.children_left[node] = left as i32;
            builder.children_right[node] = right as i32;
        }
        None => builder.values[node] = vec![leaf_value(rows)],
    }
    node
}

/// Generates a random tree with consistent covers (children sum to their
/// parent), for explainer tests and benchmarks. Interior probability decays
/// with depth; thresholds lie in (0, 1) so inputs drawn from the unit cube
/// exercise both branches.
pub fn random_tree(
    rng: &mut ChaCha8Rng,
    n_features: usize,
    max_depth: usize,
    n_outputs: usize,
) -> Tree {
    fn grow(
        rng: &mut ChaCha8Rng,
        depth: usize,
        max_depth: usize,
        n_features: usize,
        n_outputs: usize,
        cover: f64,
        builder: &mut FlatBuilder,
    ) -> usize {
        let node = builder.push(cover, Vec::new());
        let split = depth < max_depth && rng.gen::<f64>() < 0.8;
        if split {
            let fraction = rng.gen_range(0.2..0.8);
            let left = grow(
                rng,
                depth + 1,
                max_depth,
                n_features,
                n_outputs,
                cover * fraction,
                builder,
            );
            let right = grow(
                rng,
                depth + 1,
                max_depth,
                n_features,
                n_outputs,
                cover * (1.0 - fraction),
                builder,
            );
            builder.feature[node] = rng.gen_range(0..n_features);
            builder.threshold[node] = rng.gen_range(0.05..0.95);
            builder.children_left[node] = left as i32;
            builder.children_right[node] = right as i32;
            builder.values[node] = (0..n_outputs)
                .map(|k| {
                    (builder.cover[left] * builder.values[left][k]
                        + builder.cover[right] * builder.values[right][k])
                        / builder.cover[node]
                })
                .collect();
        } else {
            builder.values[node] = (0..n_outputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
        node
    }
    let mut builder = FlatBuilder::new();
    grow(rng, 0, max_depth, n_features, n_outputs, 100.0, &mut builder);
    builder.finish()
}
