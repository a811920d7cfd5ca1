use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{check_shape, ensure_finite_target, Matrix};
use super::tree::{grow, Presorted, TrainView, TreeNode, TreeParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Xoshiro256StarStar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: u64,
    pub feature_fraction: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 5,
            min_samples_split: 2,
            feature_fraction: 1.0,
            seed: 42,
        }
    }
}

impl ForestConfig {
    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            feature_fraction: self.feature_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("random forest needs n_estimators >= 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::Config("feature_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Bagged regression trees; the prediction is the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: u64,
    pub feature_fraction: f64,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                self.trees.iter().map(|t| t.predict_matrix_row(x, i)).sum::<f64>() / self.trees.len() as f64
            })
            .collect())
    }
}

pub fn fit_random_forest(x: &Matrix, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    check_shape(x, y)?;
    x.ensure_finite("feature matrix")?;
    ensure_finite_target(y)?;
    cfg.validate()?;
    let pre = Presorted::new(x);
    Ok(fit_forest_view(&TrainView::full(x, &pre), y, cfg))
}

/// Tree `i` draws its bootstrap and feature samples from a generator seeded
/// with `derive_seed(cfg.seed, i)`, so the forest does not depend on how
/// trees are scheduled across threads.
pub(crate) fn fit_forest_view(view: &TrainView<'_>, y: &[f64], cfg: &ForestConfig) -> ForestModel {
    let n = view.n_rows;
    let params = cfg.tree_params();
    let trees = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(cfg.seed, i as u64));
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.below(n)] += 1;
            }
            grow(view, y, Some(&counts), &params, &mut rng)
        })
        .collect();
    ForestModel {
        n_estimators: cfg.n_estimators,
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        feature_fraction: cfg.feature_fraction,
        seed: cfg.seed,
        n_features: view.n_features(),
        trees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_sample_predicts_its_target() {
        let x = Matrix::from_rows(&vec![vec![1.0, 2.0]; 5]).unwrap();
        let m = fit_random_forest(&x, &[0.7; 5], &ForestConfig::default()).unwrap();
        assert_eq!(m.trees.len(), 100);
        assert!((m.predict_row(&[1.0, 2.0]) - 0.7).abs() < 1e-12);
        assert!((m.predict_row(&[-9.0, 9.0]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_forest() {
        let x = Matrix::from_rows(&(0..50).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let cfg = ForestConfig {
            n_estimators: 10,
            ..ForestConfig::default()
        };
        let a = fit_random_forest(&x, &y, &cfg).unwrap();
        let b = fit_random_forest(&x, &y, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
