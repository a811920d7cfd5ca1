//! CART regression trees grown by greedy variance reduction.
//!
//! Rows carry integer weights so a bootstrap sample is a weight vector over
//! the original rows rather than a copied matrix. Each feature's row order is
//! sorted once per dataset ([`Presorted`]) and partitioned stably as the tree
//! grows, so no node re-sorts.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::rng::Xoshiro256StarStar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left. `n` is the weighted
    /// training cover and `gain` the SSE reduction of the split.
    Split {
        feature: usize,
        threshold: f64,
        n: u64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { value: f64, n: u64 },
}

impl TreeNode {
    pub fn cover(&self) -> u64 {
        match self {
            TreeNode::Split { n, .. } | TreeNode::Leaf { n, .. } => *n,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_matrix_row(&self, x: &Matrix, i: usize) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x.get(i, *feature) <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Cover-weighted mean of the leaf values.
    pub fn expected_value(&self) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { n, left, right, .. } => {
                let n = *n as f64;
                (left.cover() as f64 * left.expected_value() + right.cover() as f64 * right.expected_value()) / n
            }
        }
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => [Some(*feature), left.max_feature_index(), right.max_feature_index()]
                .into_iter()
                .flatten()
                .max(),
        }
    }

    /// Visit every split as `(feature, cover, gain)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, u64, f64)) {
        if let TreeNode::Split {
            feature,
            n,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *n, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: u64,
    pub feature_fraction: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_split: 2,
            feature_fraction: 1.0,
        }
    }
}

/// Per-feature row orders sorted ascending by value (ties by row index).
#[derive(Debug, Clone)]
pub struct Presorted {
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let orders = x
            .columns()
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { orders }
    }

    pub fn order(&self, feature: usize) -> &[u32] {
        &self.orders[feature]
    }
}

/// Borrowed training view: a subset of feature columns with their orders.
pub(crate) struct TrainView<'a> {
    pub cols: Vec<&'a [f64]>,
    pub orders: Vec<&'a [u32]>,
    pub n_rows: usize,
}

impl<'a> TrainView<'a> {
    pub fn full(x: &'a Matrix, pre: &'a Presorted) -> Self {
        Self::subset(x, pre, &(0..x.n_cols()).collect::<Vec<_>>())
    }

    pub fn subset(x: &'a Matrix, pre: &'a Presorted, features: &[usize]) -> Self {
        Self {
            cols: features.iter().map(|&j| x.column(j)).collect(),
            orders: features.iter().map(|&j| pre.order(j)).collect(),
            n_rows: x.n_rows(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn predict_row(&self, tree: &TreeNode, i: usize) -> f64 {
        let mut node = tree;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if self.cols[*feature][i] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Fit a single tree on all rows with unit weights.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams, rng: &mut Xoshiro256StarStar) -> TreeNode {
    assert_eq!(x.n_rows(), y.len(), "row count mismatch");
    let pre = Presorted::new(x);
    grow(&TrainView::full(x, &pre), y, None, params, rng)
}

struct Grower<'a, 'b> {
    view: &'a TrainView<'b>,
    y: &'a [f64],
    weights: Option<&'a [u32]>,
    params: &'a TreeParams,
    goes_left: Vec<bool>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_, '_> {
    fn weight(&self, row: u32) -> f64 {
        self.weights.map_or(1.0, |w| w[row as usize] as f64)
    }

    fn node(&mut self, rows: Vec<u32>, lists: Vec<Vec<u32>>, depth: usize, rng: &mut Xoshiro256StarStar) -> TreeNode {
        let mut w_sum = 0.0;
        let mut y_sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &rows {
            let w = self.weight(r);
            let y = self.y[r as usize];
            w_sum += w;
            y_sum += w * y;
            lo = lo.min(y);
            hi = hi.max(y);
        }
        let cover = w_sum as u64;
        let leaf = TreeNode::Leaf {
            value: y_sum / w_sum,
            n: cover,
        };
        if depth >= self.params.max_depth || cover < self.params.min_samples_split || lo == hi {
            return leaf;
        }
        let Some(best) = self.best_split(&lists, w_sum, y_sum, rng) else {
            return leaf;
        };

        let col = self.view.cols[best.feature];
        for &r in &rows {
            self.goes_left[r as usize] = col[r as usize] <= best.threshold;
        }
        let (rows_l, rows_r) = self.partition(&rows);
        let mut lists_l = Vec::with_capacity(lists.len());
        let mut lists_r = Vec::with_capacity(lists.len());
        for list in &lists {
            let (l, r) = self.partition(list);
            lists_l.push(l);
            lists_r.push(r);
        }
        drop(lists);
        let left = self.node(rows_l, lists_l, depth + 1, rng);
        let right = self.node(rows_r, lists_r, depth + 1, rng);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            n: cover,
            gain: best.gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn partition(&self, list: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let mut l = Vec::new();
        let mut r = Vec::new();
        for &row in list {
            if self.goes_left[row as usize] {
                l.push(row);
            } else {
                r.push(row);
            }
        }
        (l, r)
    }

    fn candidate_features(&self, rng: &mut Xoshiro256StarStar) -> Vec<usize> {
        let p = self.view.n_features();
        let k = ((self.params.feature_fraction * p as f64).round() as usize).clamp(1, p);
        if k >= p {
            return (0..p).collect();
        }
        let mut all: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = i + rng.below(p - i);
            all.swap(i, j);
        }
        let mut chosen = all[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }

    /// Best split by SSE reduction `wl*wr/w * (mean_l - mean_r)^2`; ties keep
    /// the lowest feature index, then the smallest threshold.
    fn best_split(&self, lists: &[Vec<u32>], w_sum: f64, y_sum: f64, rng: &mut Xoshiro256StarStar) -> Option<Best> {
        let mut best: Option<Best> = None;
        for f in self.candidate_features(rng) {
            let col = self.view.cols[f];
            let list = &lists[f];
            let mut wl = 0.0;
            let mut sl = 0.0;
            for pair in list.windows(2) {
                let (a, b) = (pair[0] as usize, pair[1] as usize);
                let w = self.weight(pair[0]);
                wl += w;
                sl += w * self.y[a];
                let (xa, xb) = (col[a], col[b]);
                if xa == xb {
                    continue;
                }
                let wr = w_sum - wl;
                let sr = y_sum - sl;
                let diff = sl / wl - sr / wr;
                let gain = wl * wr / w_sum * diff * diff;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * xa + 0.5 * xb;
                    if threshold >= xb || threshold < xa {
                        threshold = xa;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Grow a tree on the rows of `view` with nonzero weight.
pub(crate) fn grow(
    view: &TrainView<'_>,
    y: &[f64],
    weights: Option<&[u32]>,
    params: &TreeParams,
    rng: &mut Xoshiro256StarStar,
) -> TreeNode {
    let active = |r: &u32| weights.is_none_or(|w| w[*r as usize] > 0);
    let rows: Vec<u32> = (0..view.n_rows as u32).filter(active).collect();
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let lists: Vec<Vec<u32>> = view
        .orders
        .iter()
        .map(|o| o.iter().copied().filter(active).collect())
        .collect();
    let mut grower = Grower {
        view,
        y,
        weights,
        params,
        goes_left: vec![false; view.n_rows],
    };
    grower.node(rows, lists, 0, rng)
}
