use serde::{Deserialize, Serialize};

use super::matrix::{check_shape, ensure_finite_target, Matrix};
use super::metrics::mean_squared_error;
use super::tree::{grow, Presorted, TrainView, TreeNode, TreeParams};
use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingConfig {
    pub n_iterations: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_split: u64,
    pub seed: u64,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            n_iterations: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_split: 2,
            seed: 42,
        }
    }
}

impl BoostingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Squared-error gradient boosting:
/// `prediction = init_value + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub init_value: f64,
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub max_depth: usize,
    pub min_samples_split: u64,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
    /// Training MSE before the first tree and after each iteration.
    #[serde(default)]
    pub train_mse: Vec<f64>,
}

impl BoostedModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.init_value + self.learning_rate * self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .map(|i| {
                self.init_value
                    + self.learning_rate * self.trees.iter().map(|t| t.predict_matrix_row(x, i)).sum::<f64>()
            })
            .collect())
    }
}

pub fn fit_gradient_boosting(x: &Matrix, y: &[f64], cfg: &BoostingConfig) -> Result<BoostedModel> {
    check_shape(x, y)?;
    x.ensure_finite("feature matrix")?;
    ensure_finite_target(y)?;
    cfg.validate()?;
    let pre = Presorted::new(x);
    Ok(fit_boosting_view(&TrainView::full(x, &pre), y, cfg))
}

pub(crate) fn fit_boosting_view(view: &TrainView<'_>, y: &[f64], cfg: &BoostingConfig) -> BoostedModel {
    let n = y.len();
    let init_value = y.iter().sum::<f64>() / n as f64;
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        feature_fraction: 1.0,
    };
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let mut current = vec![init_value; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_iterations);
    let mut train_mse = Vec::with_capacity(cfg.n_iterations + 1);
    train_mse.push(mean_squared_error(y, &current));
    for _ in 0..cfg.n_iterations {
        for ((r, yi), f) in residual.iter_mut().zip(y).zip(&current) {
            *r = yi - f;
        }
        let tree = grow(view, &residual, None, &params, &mut rng);
        for (i, f) in current.iter_mut().enumerate() {
            *f += cfg.learning_rate * view.predict_row(&tree, i);
        }
        train_mse.push(mean_squared_error(y, &current));
        trees.push(tree);
    }
    BoostedModel {
        init_value,
        learning_rate: cfg.learning_rate,
        n_iterations: cfg.n_iterations,
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        seed: cfg.seed,
        n_features: view.n_features(),
        trees,
        train_mse,
    }
}
