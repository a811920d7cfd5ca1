//! Feature attribution for fitted models.
//!
//! Tree models are explained with path-dependent TreeSHAP: the value of a
//! feature coalition is the tree's expected output when the coalition's
//! features follow `x` and every other split is averaged over the training
//! cover stored on the nodes. [`brute_force_shapley`] evaluates the same
//! game by enumerating coalitions and serves as an independent check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LinearModel, Matrix, Model, TreeNode};

/// Largest feature count accepted by [`brute_force_shapley`].
pub const BRUTE_FORCE_FEATURE_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Impurity,
    ShapMeanAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub importance: Vec<f64>,
    /// No split (or no attribution mass) anywhere in the model.
    pub degenerate: bool,
}

impl ImportanceReport {
    /// Feature indices sorted by importance descending (ties by index).
    pub fn ranking(&self) -> Vec<usize> {
        rank_descending(&self.importance)
    }
}

pub(crate) fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub base_value: f64,
    pub phi: Vec<f64>,
}

impl ShapExplanation {
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

fn trees_of(model: &Model) -> Option<(&[TreeNode], usize)> {
    match model {
        Model::RandomForest(m) => Some((&m.trees, m.n_features)),
        Model::GradientBoosting(m) => Some((&m.trees, m.n_features)),
        Model::Linear(_) => None,
    }
}

/// Normalized SSE-reduction importance. Each split credits its feature with
/// `gain / root_cover`, summed over all trees, then scaled to sum to 1.
pub fn impurity_importance(model: &Model) -> Result<ImportanceReport> {
    let (trees, p) = trees_of(model)
        .ok_or_else(|| Error::Config("impurity importance needs a tree ensemble".into()))?;
    let mut importance = vec![0.0; p];
    for tree in trees {
        let root = tree.cover() as f64;
        tree.for_each_split(&mut |f, _, gain| importance[f] += gain / root);
    }
    let total: f64 = importance.iter().sum();
    let degenerate = total <= 0.0;
    if !degenerate {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ImportanceReport {
        method: ImportanceMethod::Impurity,
        importance,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let denom = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero_fraction * path[i].weight * (l - i) as f64 / denom;
    }
}

/// Remove element `i` from the path, undoing its contribution to the
/// permutation weights.
fn unwind_path(path: &[PathElement], i: usize) -> Vec<PathElement> {
    let l = path.len() - 1;
    let mut out = path.to_vec();
    let one = path[i].one_fraction;
    let zero = path[i].zero_fraction;
    let mut next = out[l].weight;
    let denom = (l + 1) as f64;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = out[j].weight;
            out[j].weight = next * denom / ((j + 1) as f64 * one);
            next = tmp - out[j].weight * zero * (l - j) as f64 / denom;
        } else {
            out[j].weight = out[j].weight * denom / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        out[j].feature = out[j + 1].feature;
        out[j].zero_fraction = out[j + 1].zero_fraction;
        out[j].one_fraction = out[j + 1].one_fraction;
    }
    out.truncate(l);
    out
}

fn recurse(
    node: &TreeNode,
    x: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    match node {
        TreeNode::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w: f64 = unwind_path(&path, i).iter().map(|e| e.weight).sum();
                let e = path[i];
                let f = e.feature.expect("non-root path elements carry a feature");
                phi[f] += w * (e.one_fraction - e.zero_fraction) * value;
            }
        }
        TreeNode::Split {
            feature: split,
            threshold,
            n,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if x[*split] <= *threshold { (left, right) } else { (right, left) };
            let cover = *n as f64;
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*split)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                path = unwind_path(&path, k);
            }
            recurse(
                hot,
                x,
                phi,
                path.clone(),
                incoming_zero * hot.cover() as f64 / cover,
                incoming_one,
                Some(*split),
            );
            recurse(
                cold,
                x,
                phi,
                path,
                incoming_zero * cold.cover() as f64 / cover,
                0.0,
                Some(*split),
            );
        }
    }
}

/// Polynomial-time Shapley values of one tree for row `x`.
pub fn tree_shap_single(tree: &TreeNode, x: &[f64]) -> ShapExplanation {
    let mut phi = vec![0.0; x.len()];
    recurse(tree, x, &mut phi, Vec::new(), 1.0, 1.0, None);
    ShapExplanation {
        base_value: tree.expected_value(),
        phi,
    }
}

/// Exact TreeSHAP for a forest or boosted ensemble, aggregated with the
/// model's own prediction formula.
pub fn tree_shap(model: &Model, x: &[f64]) -> Result<ShapExplanation> {
    let (trees, p) = trees_of(model)
        .ok_or_else(|| Error::Config("tree_shap needs a tree ensemble; use linear_attribution".into()))?;
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: x.len(),
        });
    }
    let mut base = 0.0;
    let mut phi = vec![0.0; p];
    for tree in trees {
        let e = tree_shap_single(tree, x);
        base += e.base_value;
        for (a, b) in phi.iter_mut().zip(&e.phi) {
            *a += b;
        }
    }
    let (offset, scale) = match model {
        Model::RandomForest(_) => (0.0, 1.0 / trees.len() as f64),
        Model::GradientBoosting(m) => (m.init_value, m.learning_rate),
        Model::Linear(_) => unreachable!(),
    };
    phi.iter_mut().for_each(|v| *v *= scale);
    Ok(ShapExplanation {
        base_value: offset + scale * base,
        phi,
    })
}

/// Exact attributions for a linear model with independent features:
/// `phi_i = beta_i * (x_i - mean_i)`, base value = prediction at the means.
pub fn linear_attribution(model: &LinearModel, x: &[f64], feature_means: &[f64]) -> Result<ShapExplanation> {
    let p = model.coefficients.len();
    if x.len() != p || feature_means.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: x.len().min(feature_means.len()),
        });
    }
    Ok(ShapExplanation {
        base_value: model.predict_row(feature_means),
        phi: model
            .coefficients
            .iter()
            .zip(x.iter().zip(feature_means))
            .map(|(b, (v, m))| b * (v - m))
            .collect(),
    })
}

fn coalition_value(node: &TreeNode, x: &[f64], coalition: u32) -> f64 {
    match node {
        TreeNode::Leaf { value, .. } => *value,
        TreeNode::Split {
            feature,
            threshold,
            n,
            left,
            right,
            ..
        } => {
            if coalition & (1 << feature) != 0 {
                let next = if x[*feature] <= *threshold { left } else { right };
                coalition_value(next, x, coalition)
            } else {
                let n = *n as f64;
                (left.cover() as f64 * coalition_value(left, x, coalition)
                    + right.cover() as f64 * coalition_value(right, x, coalition))
                    / n
            }
        }
    }
}

/// Shapley values by enumerating all `2^p` coalitions of the tree's
/// cover-weighted conditional expectation game.
pub fn brute_force_shapley(tree: &TreeNode, x: &[f64]) -> Result<Vec<f64>> {
    let p = x.len();
    if p > BRUTE_FORCE_FEATURE_LIMIT {
        return Err(Error::TooManyFeatures {
            count: p,
            limit: BRUTE_FORCE_FEATURE_LIMIT,
        });
    }
    if let Some(f) = tree.max_feature_index() {
        if f >= p {
            return Err(Error::DimensionMismatch {
                expected: f + 1,
                actual: p,
            });
        }
    }
    let values: Vec<f64> = (0..1u32 << p).map(|s| coalition_value(tree, x, s)).collect();
    let fact: Vec<f64> = (0..=p).scan(1.0, |acc, k| {
        if k > 0 {
            *acc *= k as f64;
        }
        Some(*acc)
    })
    .collect();
    let mut phi = vec![0.0; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in 0..1u32 << p {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let weight = fact[size] * fact[p - size - 1] / fact[p];
            *phi_i += weight * (values[(s | bit) as usize] - values[s as usize]);
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub mean_abs_shap: Vec<f64>,
    /// Largest absolute gap between `base + sum(phi)` and the prediction.
    pub max_local_accuracy_error: f64,
    pub method: String,
}

impl ShapSummary {
    pub fn ranking(&self) -> Vec<usize> {
        rank_descending(&self.mean_abs_shap)
    }
}

/// Explain one row with the method appropriate to the model family.
/// Linear models use `background` column means as the reference point.
pub fn explain_row(model: &Model, x: &[f64], background: &Matrix) -> Result<ShapExplanation> {
    match model {
        Model::Linear(m) => {
            let means: Vec<f64> = background
                .columns()
                .iter()
                .map(|c| c.iter().sum::<f64>() / c.len().max(1) as f64)
                .collect();
            linear_attribution(m, x, &means)
        }
        _ => tree_shap(model, x),
    }
}

/// Mean |phi| per feature over the rows of `x`.
pub fn shap_summary(model: &Model, x: &Matrix, background: &Matrix) -> Result<ShapSummary> {
    let p = model.n_features();
    if x.n_cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: x.n_cols(),
        });
    }
    let per_row: Vec<(Vec<f64>, f64)> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let e = explain_row(model, &row, background)?;
            let err = (e.total() - model.predict_row(&row)?).abs();
            Ok((e.phi, err))
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; p];
    let mut max_err: f64 = 0.0;
    for (phi, err) in &per_row {
        for (s, v) in sums.iter_mut().zip(phi) {
            *s += v.abs();
        }
        max_err = max_err.max(*err);
    }
    let n = per_row.len().max(1) as f64;
    Ok(ShapSummary {
        mean_abs_shap: sums.into_iter().map(|s| s / n).collect(),
        max_local_accuracy_error: max_err,
        method: match model {
            Model::Linear(_) => "linear",
            _ => "tree_path_dependent",
        }
        .to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(value: f64, n: u64) -> Box<TreeNode> {
        Box::new(TreeNode::Leaf { value, n })
    }

    fn stump(feature: usize, threshold: f64, l: (f64, u64), r: (f64, u64)) -> TreeNode {
        TreeNode::Split {
            feature,
            threshold,
            n: l.1 + r.1,
            gain: 1.0,
            left: leaf(l.0, l.1),
            right: leaf(r.0, r.1),
        }
    }

    #[test]
    fn leaf_only_tree_has_zero_phi() {
        let t = TreeNode::Leaf { value: 3.0, n: 10 };
        let e = tree_shap_single(&t, &[1.0, 2.0]);
        assert_eq!(e.base_value, 3.0);
        assert_eq!(e.phi, vec![0.0, 0.0]);
        assert_eq!(brute_force_shapley(&t, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn stump_hand_value() {
        // p_left = 0.3, p_right = 0.7, x goes left.
        let t = stump(0, 0.5, (2.0, 3), (10.0, 7));
        let expected = 2.0 - (0.3 * 2.0 + 0.7 * 10.0);
        let e = tree_shap_single(&t, &[0.1, 99.0]);
        assert!((e.phi[0] - expected).abs() < 1e-12);
        assert_eq!(e.phi[1], 0.0);
        let bf = brute_force_shapley(&t, &[0.1, 99.0]).unwrap();
        assert!((bf[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn symmetric_features_share_credit() {
        // y = 1 iff both x0 > 0.5 and x1 > 0.5, balanced covers.
        let sub = |f| stump(f, 0.5, (0.0, 25), (1.0, 25));
        let t = TreeNode::Split {
            feature: 0,
            threshold: 0.5,
            n: 100,
            gain: 1.0,
            left: Box::new(TreeNode::Split {
                feature: 1,
                threshold: 0.5,
                n: 50,
                gain: 0.0,
                left: leaf(0.0, 25),
                right: leaf(0.0, 25),
            }),
            right: Box::new(sub(1)),
        };
        let x = [1.0, 1.0];
        let bf = brute_force_shapley(&t, &x).unwrap();
        let ts = tree_shap_single(&t, &x).phi;
        assert!((bf[0] - bf[1]).abs() < 1e-12);
        assert!((ts[0] - ts[1]).abs() < 1e-12);
    }

    #[test]
    fn brute_force_limit() {
        let t = TreeNode::Leaf { value: 0.0, n: 1 };
        assert!(matches!(
            brute_force_shapley(&t, &[0.0; 16]),
            Err(Error::TooManyFeatures { .. })
        ));
    }

    #[test]
    fn linear_attribution_sums_to_prediction() {
        let m = LinearModel {
            kind: crate::models::LinearKind::Ols,
            alpha: None,
            intercept: 0.5,
            coefficients: vec![2.0, -1.0],
            rank_deficient: false,
        };
        let e = linear_attribution(&m, &[3.0, 4.0], &[1.0, 1.0]).unwrap();
        assert_eq!(e.phi, vec![4.0, -3.0]);
        assert!((e.total() - m.predict_row(&[3.0, 4.0])).abs() < 1e-12);
    }
}
