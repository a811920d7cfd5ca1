//! Two-layer factor filtering.
//!
//! Layer 1 drops factors whose pooled correlation with the target exceeds
//! `target_corr_threshold` (they leak the target). Layer 2 walks factor pairs
//! in order and, whenever a live pair is correlated above
//! `pairwise_corr_threshold`, drops the member less correlated with the
//! target. The survivors are then searched exhaustively for the
//! `subset_size` combination with the best held-out R².

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorPanel;
use crate::models::{evaluate, fit_boosting_view, fit_forest_view, ForestConfig, Matrix, ModelSpec, Presorted, TrainView};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub target_corr_threshold: f64,
    pub pairwise_corr_threshold: f64,
    pub subset_size: usize,
    pub scoring_model: ModelSpec,
    /// Fraction of distinct dates (oldest first) used for training.
    pub split: f64,
    pub max_combinations: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            target_corr_threshold: 0.1,
            pairwise_corr_threshold: 0.75,
            subset_size: 10,
            scoring_model: ModelSpec::RandomForest(ForestConfig {
                n_estimators: 25,
                ..ForestConfig::default()
            }),
            split: 0.8,
            max_combinations: 10_000,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.target_corr_threshold) || !unit(self.pairwise_corr_threshold) {
            return Err(Error::Config("correlation thresholds must lie in (0, 1)".into()));
        }
        if self.subset_size == 0 {
            return Err(Error::Config("subset_size must be >= 1".into()));
        }
        if !unit(self.split) {
            return Err(Error::Config("split must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// One of the columns had zero variance over the usable rows.
    pub degenerate: bool,
}

/// Pearson correlation over rows where both values are finite. Zero-variance
/// columns (or fewer than two usable rows) give `r = 0` flagged degenerate.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let degenerate = Correlation { r: 0.0, degenerate: true };
    if pairs.len() < 2 {
        return Ok(degenerate);
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(degenerate);
    }
    Ok(Correlation {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCorrelation {
    pub factor: String,
    pub corr: f64,
    pub abs_corr: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDrop {
    pub dropped: String,
    pub kept: String,
    pub pair_corr: f64,
    pub dropped_target_corr: f64,
    pub kept_target_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: SelectionConfig,
    pub layer1_kept: Vec<TargetCorrelation>,
    pub layer1_dropped: Vec<TargetCorrelation>,
    pub low_corr_factors: Vec<String>,
    pub layer2_dropped: Vec<PairDrop>,
    pub best_subset: Vec<String>,
    pub best_score: f64,
    pub evaluated_count: u64,
    pub train_rows: usize,
    pub test_rows: usize,
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Layer 1 over every column of `fp`: returns `(kept, dropped)`.
pub fn layer1_filter(fp: &FactorPanel, cfg: &SelectionConfig) -> Result<(Vec<TargetCorrelation>, Vec<TargetCorrelation>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (name, col) in fp.columns() {
        let c = pearson(col, &fp.ret)?;
        let entry = TargetCorrelation {
            factor: name.to_string(),
            corr: c.r,
            abs_corr: c.r.abs(),
            degenerate: c.degenerate,
        };
        if entry.abs_corr > cfg.target_corr_threshold {
            dropped.push(entry);
        } else {
            kept.push(entry);
        }
    }
    Ok((kept, dropped))
}

/// Layer 2 over `kept` (in the given order): returns `(low_corr_factors, dropped)`.
pub fn layer2_decorrelate(fp: &FactorPanel, kept: &[String], cfg: &SelectionConfig) -> Result<(Vec<String>, Vec<PairDrop>)> {
    let cols: Vec<&[f64]> = kept.iter().map(|n| fp.require(n)).collect::<Result<_>>()?;
    let target: Vec<f64> = cols
        .iter()
        .map(|c| pearson(c, &fp.ret).map(|r| r.r.abs()))
        .collect::<Result<_>>()?;
    let mut alive = vec![true; kept.len()];
    let mut dropped = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            if !(alive[i] && alive[j]) {
                continue;
            }
            let r = pearson(cols[i], cols[j])?.r;
            if r.abs() <= cfg.pairwise_corr_threshold {
                continue;
            }
            let (loser, winner) = if target[i] < target[j] { (i, j) } else { (j, i) };
            alive[loser] = false;
            dropped.push(PairDrop {
                dropped: kept[loser].clone(),
                kept: kept[winner].clone(),
                pair_corr: r,
                dropped_target_corr: target[loser],
                kept_target_corr: target[winner],
            });
        }
    }
    let survivors = kept.iter().zip(&alive).filter(|(_, &a)| a).map(|(n, _)| n.clone()).collect();
    Ok((survivors, dropped))
}

/// Row indices for a chronological split: the first `fraction` of distinct
/// dates train, the rest test. Both sides get at least one date.
pub fn chronological_split(fp: &FactorPanel, fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let dates = fp.dates();
    if dates.len() < 2 {
        return Err(Error::Empty("chronological split needs at least two distinct dates"));
    }
    let n_train = ((fraction * dates.len() as f64).floor() as usize).clamp(1, dates.len() - 1);
    let cutoff = dates[n_train];
    let (train, test): (Vec<usize>, Vec<usize>) = (0..fp.n_rows()).partition(|&i| fp.keys[i].1 < cutoff);
    Ok((train, test))
}

pub fn feature_matrix(fp: &FactorPanel, features: &[String], rows: &[usize]) -> Result<Matrix> {
    let cols = features
        .iter()
        .map(|f| fp.require(f).map(|c| rows.iter().map(|&i| c[i]).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    if cols.is_empty() {
        return Ok(Matrix::empty_columns(rows.len()));
    }
    Matrix::from_columns(cols)
}

pub fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Shared train/test data for scoring many feature subsets.
pub struct SubsetScorer {
    train: Matrix,
    test: Matrix,
    y_train: Vec<f64>,
    y_test: Vec<f64>,
    presorted: Presorted,
    model: ModelSpec,
}

impl SubsetScorer {
    pub fn new(fp: &FactorPanel, pool: &[String], split: f64, model: ModelSpec) -> Result<Self> {
        let (train_idx, test_idx) = chronological_split(fp, split)?;
        let train = feature_matrix(fp, pool, &train_idx)?;
        let test = feature_matrix(fp, pool, &test_idx)?;
        let presorted = Presorted::new(&train);
        Ok(Self {
            y_train: train_idx.iter().map(|&i| fp.ret[i]).collect(),
            y_test: test_idx.iter().map(|&i| fp.ret[i]).collect(),
            train,
            test,
            presorted,
            model,
        })
    }

    pub fn train_rows(&self) -> usize {
        self.train.n_rows()
    }

    pub fn test_rows(&self) -> usize {
        self.test.n_rows()
    }

    /// Held-out R² of the scoring model trained on `features` (indices into
    /// the pool) with the given seed.
    pub fn score(&self, features: &[usize], seed: u64) -> Result<f64> {
        let test = self.test.select_columns(features);
        let pred = match self.model.with_seed(seed) {
            ModelSpec::RandomForest(cfg) => {
                cfg.validate()?;
                let view = TrainView::subset(&self.train, &self.presorted, features);
                fit_forest_view(&view, &self.y_train, &cfg).predict(&test)?
            }
            ModelSpec::GradientBoosting(cfg) => {
                cfg.validate()?;
                let view = TrainView::subset(&self.train, &self.presorted, features);
                fit_boosting_view(&view, &self.y_train, &cfg).predict(&test)?
            }
            linear => linear.fit(&self.train.select_columns(features), &self.y_train)?.predict(&test)?,
        };
        Ok(evaluate(&self.y_test, &pred)?.r2)
    }
}

/// Seed for the model scoring combination number `index`.
pub fn combination_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

fn model_seed(spec: &ModelSpec) -> u64 {
    match spec {
        ModelSpec::RandomForest(c) => c.seed,
        ModelSpec::GradientBoosting(c) => c.seed,
        _ => 0,
    }
}

pub struct SubsetResult {
    pub best_subset: Vec<String>,
    pub best_score: f64,
    pub evaluated_count: u64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Exhaustive search over `subset_size` combinations of `pool`. Ties keep
/// the first combination in lexicographic order.
pub fn subset_search(fp: &FactorPanel, pool: &[String], cfg: &SelectionConfig) -> Result<SubsetResult> {
    if pool.is_empty() {
        return Err(Error::Empty("no factors left for subset search"));
    }
    let scorer = SubsetScorer::new(fp, pool, cfg.split, cfg.scoring_model)?;
    let base_seed = model_seed(&cfg.scoring_model);
    let (combos, count) = if pool.len() <= cfg.subset_size {
        (vec![(0..pool.len()).collect::<Vec<_>>()], 1)
    } else {
        let required = n_choose_k(pool.len(), cfg.subset_size);
        if required > cfg.max_combinations as u128 {
            return Err(Error::CombinationBudget {
                required,
                budget: cfg.max_combinations,
            });
        }
        (combinations(pool.len(), cfg.subset_size), required as u64)
    };
    let scores: Vec<f64> = combos
        .par_iter()
        .enumerate()
        .map(|(i, c)| scorer.score(c, combination_seed(base_seed, i as u64)))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(SubsetResult {
        best_subset: combos[best].iter().map(|&j| pool[j].clone()).collect(),
        best_score: scores[best],
        evaluated_count: count,
        train_rows: scorer.train_rows(),
        test_rows: scorer.test_rows(),
    })
}

/// Run both layers and the subset search over every column of `fp`.
pub fn select_factors(fp: &FactorPanel, cfg: &SelectionConfig) -> Result<SelectionReport> {
    cfg.validate()?;
    let (layer1_kept, layer1_dropped) = layer1_filter(fp, cfg)?;
    let kept_names: Vec<String> = layer1_kept.iter().map(|e| e.factor.clone()).collect();
    let (low_corr_factors, layer2_dropped) = layer2_decorrelate(fp, &kept_names, cfg)?;
    let search = subset_search(fp, &low_corr_factors, cfg)?;
    Ok(SelectionReport {
        config: *cfg,
        layer1_kept,
        layer1_dropped,
        low_corr_factors,
        layer2_dropped,
        best_subset: search.best_subset,
        best_score: search.best_score,
        evaluated_count: search.evaluated_count,
        train_rows: search.train_rows,
        test_rows: search.test_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().r - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().r + 1.0).abs() < 1e-15);
        let c = pearson(&[5.0; 3], &[1.0, 7.0, 2.0]).unwrap();
        assert_eq!(c, Correlation { r: 0.0, degenerate: true });
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_skips_non_finite_rows() {
        let c = pearson(&[1.0, f64::NAN, 2.0, 3.0], &[2.0, 100.0, 4.0, 6.0]).unwrap();
        assert!((c.r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let c = combinations(4, 2);
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(n_choose_k(32, 10), 64_512_240);
        assert_eq!(combinations(6, 3).len(), 20);
    }

    fn panel(cols: &[(&str, Vec<f64>)], ret: Vec<f64>) -> FactorPanel {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let keys = (0..ret.len()).map(|i| (1, start + chrono::Days::new(i as u64))).collect();
        let mut fp = FactorPanel::new(keys, ret);
        for (n, v) in cols {
            fp.push_column(*n, v.clone());
        }
        fp
    }

    #[test]
    fn layer2_keeps_more_target_correlated() {
        // f1 and f2 = 2*f1 are perfectly collinear; f1 tracks the target better.
        let n = 200;
        let f1: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| ((i * 53) % 97) as f64).collect();
        let ret: Vec<f64> = f1.iter().zip(&noise).map(|(a, b)| 0.08 * a + b).collect();
        let f2: Vec<f64> = f1.iter().map(|v| 2.0 * v).collect();
        let fp = panel(&[("f1", f1), ("f2", f2.clone())], ret);
        let (kept, dropped) =
            layer2_decorrelate(&fp, &["f1".into(), "f2".into()], &SelectionConfig::default()).unwrap();
        // Equal |corr| with the target: the later factor is dropped.
        assert_eq!(kept, vec!["f1".to_string()]);
        assert_eq!(dropped[0].dropped, "f2");
    }

    #[test]
    fn chronological_split_respects_dates() {
        let fp = panel(&[("x", vec![0.0; 10])], vec![0.0; 10]);
        let (train, test) = chronological_split(&fp, 0.8).unwrap();
        assert_eq!(train, (0..8).collect::<Vec<_>>());
        assert_eq!(test, vec![8, 9]);
    }
}
