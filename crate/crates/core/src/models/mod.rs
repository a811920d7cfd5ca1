//! Regressors used across the pipeline: OLS, ridge, CART trees, random
//! forests and gradient boosting, plus MSE/R² evaluation.

mod boosting;
mod forest;
mod linear;
mod matrix;
mod metrics;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boosting::{fit_gradient_boosting, BoostedModel, BoostingConfig};
pub use forest::{fit_random_forest, ForestConfig, ForestModel};
pub use linear::{fit_ols, fit_ridge, LinearKind, LinearModel};
pub use matrix::Matrix;
pub use metrics::{evaluate, EvalMetrics};
pub use tree::{fit_tree, Presorted, TreeNode, TreeParams};

pub(crate) use boosting::fit_boosting_view;
pub(crate) use forest::fit_forest_view;
pub(crate) use tree::TrainView;

use crate::error::{Error, Result};

/// A trained model of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    RandomForest(ForestModel),
    GradientBoosting(BoostedModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.coefficients.len(),
            Model::RandomForest(m) => m.n_features,
            Model::GradientBoosting(m) => m.n_features,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::RandomForest(m) => m.predict(x),
            Model::GradientBoosting(m) => m.predict(x),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(match self {
            Model::Linear(m) => m.predict_row(x),
            Model::RandomForest(m) => m.predict_row(x),
            Model::GradientBoosting(m) => m.predict_row(x),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Model family plus hyperparameters, as written in pipeline configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols,
    Ridge { alpha: f64 },
    RandomForest(ForestConfig),
    GradientBoosting(BoostingConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::GradientBoosting(BoostingConfig::default())
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ols => "linear_regression",
            ModelSpec::Ridge { .. } => "ridge_regression",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::GradientBoosting(_) => "gradient_boosting",
        }
    }

    /// Same hyperparameters with the seed replaced (no-op for linear models).
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::RandomForest(c) => ModelSpec::RandomForest(ForestConfig { seed, ..c }),
            ModelSpec::GradientBoosting(c) => ModelSpec::GradientBoosting(BoostingConfig { seed, ..c }),
            other => other,
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Model> {
        Ok(match self {
            ModelSpec::Ols => Model::Linear(fit_ols(x, y)?),
            ModelSpec::Ridge { alpha } => Model::Linear(fit_ridge(x, y, *alpha)?),
            ModelSpec::RandomForest(c) => Model::RandomForest(fit_random_forest(x, y, c)?),
            ModelSpec::GradientBoosting(c) => Model::GradientBoosting(fit_gradient_boosting(x, y, c)?),
        })
    }
}
