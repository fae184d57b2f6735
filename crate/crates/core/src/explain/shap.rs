//! Exact Shapley values for tree ensembles.
//!
//! The value function is path-dependent: features in the coalition follow
//! the instance down each tree, absent features descend both branches
//! weighted by training cover. [`brute_force_shapley`] evaluates that game
//! over all coalitions and is the reference the fast path is tested
//! against. [`tree_shap_matrix`] computes identical values in polynomial
//! time by pushing a weighted path of unique features down the tree, and
//! handles every output class in a single traversal.

use crate::models::{Model, Tree, TreeEnsemble};
use crate::{Error, Result};

use super::{Explanation, Method};

/// Exhaustive enumeration is capped at this many features; beyond it the
/// 2^M coalition table stops being a practical oracle.
pub const MAX_EXACT_FEATURES: usize = 12;

/// Expected tree output when coalition members (set bits of `mask`) follow
/// the instance and every other split averages its children by cover.
fn masked_expectation(tree: &Tree, x: &[f64], mask: u64) -> Vec<f64> {
    fn walk(tree: &Tree, node: usize, x: &[f64], mask: u64, weight: f64, acc: &mut [f64]) {
        if tree.is_leaf(node) {
            for (slot, v) in acc.iter_mut().zip(&tree.values[node]) {
                *slot += weight * v;
            }
            return;
        }
        let f = tree.feature[node];
        let left = tree.children_left[node] as usize;
        let right = tree.children_right[node] as usize;
        if mask >> f & 1 == 1 {
            let next = if x[f] <= tree.threshold[node] {
                left
            } else {
                right
            };
            walk(tree, next, x, mask, weight, acc);
        } else {
            let c = tree.cover[node];
            walk(tree, left, x, mask, weight * tree.cover[left] / c, acc);
            walk(tree, right, x, mask, weight * tree.cover[right] / c, acc);
        }
    }
    let mut acc = vec![0.0; tree.values[0].len()];
    walk(tree, 0, x, mask, 1.0, &mut acc);
    acc
}

/// Shapley values for one tree and one output class by direct enumeration
/// of all feature coalitions. O(2^M · nodes); the oracle the fast explainer
/// is validated against.
pub fn brute_force_shapley(tree: &Tree, x: &[f64], target_class: usize) -> Result<Vec<f64>> {
    let m = x.len();
    if m > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeaturesForExact(m));
    }
    let table: Vec<f64> = (0..1u64 << m)
        .map(|mask| masked_expectation(tree, x, mask)[target_class])
        .collect();
    let mut factorial = vec![1.0; m + 1];
    for i in 1..=m {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; m];
    for f in 0..m {
        let bit = 1u64 << f;
        for mask in 0..1u64 << m {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = factorial[s] * factorial[m - 1 - s] / factorial[m];
            phi[f] += weight * (table[(mask | bit) as usize] - table[mask as usize]);
        }
    }
    Ok(phi)
}

/// One entry of the path of unique features carried down the tree: the
/// splitting feature, the fractions of paths that flow through when the
/// feature is excluded (`zero`) or included (`one`), and the permutation
/// weight of coalitions of each size.
#[derive(Clone, Copy)]
struct PathElement {
    feature: isize,
    zero: f64,
    one: f64,
    weight: f64,
}

/// Grows the path by one feature, updating the coalition-size weights.
fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: isize) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

/// Removes the element at `index`, undoing its [`extend`].
fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let l = path.len() - 1;
    let one = path[index].one;
    let zero = path[index].zero;
    if one != 0.0 {
        let mut next = path[l].weight;
        for i in (0..l).rev() {
            let tmp = path[i].weight;
            path[i].weight = next * (l + 1) as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (l - i) as f64 / (l + 1) as f64;
        }
    } else {
        for i in (0..l).rev() {
            path[i].weight = path[i].weight * (l + 1) as f64 / (zero * (l - i) as f64);
        }
    }
    for i in index..l {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Sum of the weights [`unwind`] at `index` would leave behind, without
/// mutating the path.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let l = path.len() - 1;
    let one = path[index].one;
    let zero = path[index].zero;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[l].weight;
        for i in (0..l).rev() {
            let tmp = next / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (l - i) as f64;
        }
    } else {
        for i in (0..l).rev() {
            total += path[i].weight / (zero * (l - i) as f64);
        }
    }
    total * (l + 1) as f64
}

fn recurse(
    tree: &Tree,
    node: usize,
    mut path: Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: isize,
    x: &[f64],
    phi: &mut [Vec<f64>],
) {
    extend(&mut path, parent_zero, parent_one, parent_feature);
    if tree.is_leaf(node) {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let el = path[i];
            let scale = w * (el.one - el.zero);
            for (slot, v) in phi[el.feature as usize].iter_mut().zip(&tree.values[node]) {
                *slot += scale * v;
            }
        }
        return;
    }
    let f = tree.feature[node];
    let left = tree.children_left[node] as usize;
    let right = tree.children_right[node] as usize;
    let (hot, cold) = if x[f] <= tree.threshold[node] {
        (left, right)
    } else {
        (right, left)
    };
    let cover = tree.cover[node];
    let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
    if let Some(k) = path.iter().position(|el| el.feature == f as isize) {
        incoming_zero = path[k].zero;
        incoming_one = path[k].one;
        unwind(&mut path, k);
    }
    recurse(
        tree,
        hot,
        path.clone(),
        incoming_zero * tree.cover[hot] / cover,
        incoming_one,
        f as isize,
        x,
        phi,
    );
    recurse(
        tree,
        cold,
        path,
        incoming_zero * tree.cover[cold] / cover,
        0.0,
        f as isize,
        x,
        phi,
    );
}

/// Shapley values for every feature and every output class of one tree,
/// as a features-by-classes matrix. Row f column k agrees with
/// [`brute_force_shapley`] for class k, but runs in O(leaves · depth²).
pub fn tree_shap_matrix(tree: &Tree, x: &[f64]) -> Vec<Vec<f64>> {
    let k = tree.values[0].len();
    let mut phi = vec![vec![0.0; k]; x.len()];
    recurse(tree, 0, Vec::new(), 1.0, 1.0, -1, x, &mut phi);
    phi
}

/// Shapley values for a weighted ensemble: the weighted sum of per-tree
/// matrices, plus the matching base values. For every class k,
/// `base[k] + sum of column k` equals the ensemble's predicted probability.
pub fn ensemble_shap(ensemble: &TreeEnsemble, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut phi = vec![vec![0.0; ensemble.n_classes]; x.len()];
    for (tree, w) in ensemble.trees.iter().zip(&ensemble.weights) {
        let tp = tree_shap_matrix(tree, x);
        for (acc_row, t_row) in phi.iter_mut().zip(&tp) {
            for (slot, v) in acc_row.iter_mut().zip(t_row) {
                *slot += w * v;
            }
        }
    }
    (ensemble.expected_value(), phi)
}

/// Explains one prediction of a tree-ensemble model for one target class.
/// Models whose probabilities are not plain leaf averages are rejected
/// with [`Error::NotTreeEnsemble`].
pub fn tree_shap(
    model: &Model,
    tower_id: &str,
    x: &[f64],
    target_class: u8,
) -> Result<Explanation> {
    let ensemble = model.probability_ensemble().ok_or(Error::NotTreeEnsemble)?;
    let (base, phi) = ensemble_shap(ensemble, x);
    let k = target_class as usize;
    Ok(Explanation {
        tower_id: tower_id.to_string(),
        method: Method::Shap,
        predicted_class: model.predict(x),
        target_class,
        base_value: Some(base[k]),
        relevance: phi.iter().map(|row| row[k]).collect(),
    })
}

/// Explains one prediction for every class at once, reusing a single set
/// of tree traversals. Returns one explanation per class, ascending.
pub fn tree_shap_all(model: &Model, tower_id: &str, x: &[f64]) -> Result<Vec<Explanation>> {
    let ensemble = model.probability_ensemble().ok_or(Error::NotTreeEnsemble)?;
    let (base, phi) = ensemble_shap(ensemble, x);
    let predicted = model.predict(x);
    Ok((0..ensemble.n_classes)
        .map(|k| Explanation {
            tower_id: tower_id.to_string(),
            method: Method::Shap,
            predicted_class: predicted,
            target_class: k as u8,
            base_value: Some(base[k]),
            relevance: phi.iter().map(|row| row[k]).collect(),
        })
        .collect())
}
