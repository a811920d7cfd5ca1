//! Rolling walk-forward backtest: fit on a trailing block of calendar
//! months, rank the following month's stocks by predicted return, hold the
//! top `top_k` equally weighted, and compare against the equal-weighted
//! mean of every stock in the test window.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorPanel;
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::selection::feature_matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub train_months: usize,
    pub test_months: usize,
    pub top_k: usize,
    pub model: ModelSpec,
    /// Empty means "use the selected subset" when run through the pipeline.
    pub features: Vec<String>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            train_months: 36,
            test_months: 1,
            top_k: 100,
            model: ModelSpec::default(),
            features: Vec::new(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_months == 0 || self.test_months == 0 || self.top_k == 0 {
            return Err(Error::Config(
                "train_months, test_months and top_k must all be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Months since year 0, so consecutive calendar months differ by one.
pub fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    /// Month offset of the first training month from the first data month.
    pub offset: usize,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    #[serde(skip)]
    train_months: (i64, i64),
    #[serde(skip)]
    test_months: (i64, i64),
}

impl Window {
    pub fn in_train(&self, d: NaiveDate) -> bool {
        let m = month_index(d);
        self.train_months.0 <= m && m < self.train_months.1
    }

    pub fn in_test(&self, d: NaiveDate) -> bool {
        let m = month_index(d);
        self.test_months.0 <= m && m < self.test_months.1
    }
}

/// Windows advance by `test_months`; window `i` trains on months
/// `[i, i + train_months)` counted from the first data month and tests on the
/// following `test_months`. Windows whose train or test block holds no dates
/// are skipped.
pub fn make_windows(dates: &[NaiveDate], train_months: usize, test_months: usize) -> Result<Vec<Window>> {
    let required = train_months + test_months;
    let (Some(first), Some(last)) = (dates.iter().min(), dates.iter().max()) else {
        return Err(Error::InsufficientHistory { required, available: 0 });
    };
    let first_month = month_index(*first);
    let span = (month_index(*last) - first_month + 1) as usize;
    if span < required {
        return Err(Error::InsufficientHistory {
            required,
            available: span,
        });
    }
    let mut windows = Vec::new();
    let mut offset = 0;
    while offset + required <= span {
        let train = (first_month + offset as i64, first_month + (offset + train_months) as i64);
        let test = (train.1, train.1 + test_months as i64);
        let within = |range: (i64, i64)| {
            let mut ds = dates.iter().filter(move |d| {
                let m = month_index(**d);
                range.0 <= m && m < range.1
            });
            let first = ds.next().copied();
            first.map(|f| ds.fold((f, f), |(lo, hi), d| (lo.min(*d), hi.max(*d))))
        };
        if let (Some((train_start, train_end)), Some((test_start, test_end))) = (within(train), within(test)) {
            windows.push(Window {
                index: windows.len(),
                offset,
                train_start,
                train_end,
                test_start,
                test_end,
                train_months: train,
                test_months: test,
            });
        }
        offset += test_months;
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two returns.
    pub std: Option<f64>,
    /// `mean / std`, unannualized, zero risk-free rate; `None` when the
    /// standard deviation is undefined or zero.
    pub sharpe: Option<f64>,
    pub cumulative: Vec<f64>,
}

pub fn cumulative_returns(returns: &[f64]) -> Vec<f64> {
    let mut growth = 1.0;
    returns
        .iter()
        .map(|r| {
            growth *= 1.0 + r;
            growth - 1.0
        })
        .collect()
}

pub fn portfolio_stats(returns: &[f64]) -> PortfolioStats {
    let n = returns.len();
    let mean = if n == 0 {
        f64::NAN
    } else {
        returns.iter().sum::<f64>() / n as f64
    };
    let std = (n >= 2).then(|| {
        let ss: f64 = returns.iter().map(|r| (r - mean) * (r - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    let sharpe = std.filter(|&s| s > 0.0).map(|s| mean / s);
    PortfolioStats {
        mean,
        std,
        sharpe,
        cumulative: cumulative_returns(returns),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    #[serde(flatten)]
    pub window: Window,
    /// Holdings in rank order.
    pub members: Vec<i64>,
    pub universe_size: usize,
    pub portfolio_return: f64,
    pub benchmark_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub windows: Vec<WindowResult>,
    pub cumulative_portfolio: Vec<f64>,
    pub cumulative_benchmark: Vec<f64>,
    pub portfolio: PortfolioStats,
    pub benchmark: PortfolioStats,
}

impl BacktestReport {
    pub fn portfolio_returns(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.portfolio_return).collect()
    }

    pub fn benchmark_returns(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.benchmark_return).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_curves_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("window,end_date,portfolio_return,benchmark_return,cum_portfolio,cum_benchmark\n");
        for (i, w) in self.windows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                w.window.index,
                w.window.test_end.format("%Y-%m-%d"),
                w.portfolio_return,
                w.benchmark_return,
                self.cumulative_portfolio[i],
                self.cumulative_benchmark[i]
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Produces one predicted return per test row of a window.
pub trait WindowPredictor: Sync {
    fn predict(&self, fp: &FactorPanel, window: &Window, train_rows: &[usize], test_rows: &[usize]) -> Result<Vec<f64>>;
}

/// Fits the configured model on the window's training rows.
pub struct ModelPredictor {
    pub model: ModelSpec,
    pub features: Vec<String>,
}

fn model_seed(spec: &ModelSpec) -> u64 {
    match spec {
        ModelSpec::RandomForest(c) => c.seed,
        ModelSpec::GradientBoosting(c) => c.seed,
        _ => 0,
    }
}

impl WindowPredictor for ModelPredictor {
    fn predict(&self, fp: &FactorPanel, window: &Window, train_rows: &[usize], test_rows: &[usize]) -> Result<Vec<f64>> {
        let x_train = feature_matrix(fp, &self.features, train_rows)?;
        let y_train: Vec<f64> = train_rows.iter().map(|&i| fp.ret[i]).collect();
        let spec = self
            .model
            .with_seed(derive_seed(model_seed(&self.model), window.index as u64));
        let model = spec.fit(&x_train, &y_train)?;
        model.predict(&feature_matrix(fp, &self.features, test_rows)?)
    }
}

/// Ranks by each stock's realized mean test-period return; an upper bound
/// for any model.
pub struct PerfectForesight;

impl WindowPredictor for PerfectForesight {
    fn predict(&self, fp: &FactorPanel, _: &Window, _: &[usize], test_rows: &[usize]) -> Result<Vec<f64>> {
        let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for &i in test_rows {
            let e = sums.entry(fp.keys[i].0).or_insert((0.0, 0));
            e.0 += fp.ret[i];
            e.1 += 1;
        }
        Ok(test_rows
            .iter()
            .map(|&i| {
                let (s, n) = sums[&fp.keys[i].0];
                s / n as f64
            })
            .collect())
    }
}

pub fn run_backtest(fp: &FactorPanel, cfg: &BacktestConfig) -> Result<BacktestReport> {
    if cfg.features.is_empty() {
        return Err(Error::Empty("backtest feature list"));
    }
    for f in &cfg.features {
        fp.require(f)?;
    }
    let predictor = ModelPredictor {
        model: cfg.model,
        features: cfg.features.clone(),
    };
    run_backtest_with(fp, cfg, &predictor)
}

pub fn run_backtest_with(fp: &FactorPanel, cfg: &BacktestConfig, predictor: &dyn WindowPredictor) -> Result<BacktestReport> {
    cfg.validate()?;
    let windows = make_windows(&fp.dates(), cfg.train_months, cfg.test_months)?;
    let results: Vec<WindowResult> = windows
        .into_par_iter()
        .map(|w| run_window(fp, cfg, predictor, w))
        .collect::<Result<_>>()?;
    let portfolio_returns: Vec<f64> = results.iter().map(|r| r.portfolio_return).collect();
    let benchmark_returns: Vec<f64> = results.iter().map(|r| r.benchmark_return).collect();
    let portfolio = portfolio_stats(&portfolio_returns);
    let benchmark = portfolio_stats(&benchmark_returns);
    Ok(BacktestReport {
        config: cfg.clone(),
        cumulative_portfolio: portfolio.cumulative.clone(),
        cumulative_benchmark: benchmark.cumulative.clone(),
        windows: results,
        portfolio,
        benchmark,
    })
}

fn run_window(fp: &FactorPanel, cfg: &BacktestConfig, predictor: &dyn WindowPredictor, window: Window) -> Result<WindowResult> {
    let train_rows: Vec<usize> = (0..fp.n_rows()).filter(|&i| window.in_train(fp.keys[i].1)).collect();
    let test_rows: Vec<usize> = (0..fp.n_rows()).filter(|&i| window.in_test(fp.keys[i].1)).collect();
    let max_train = train_rows.iter().map(|&i| fp.keys[i].1).max();
    let min_test = test_rows.iter().map(|&i| fp.keys[i].1).min();
    match (max_train, min_test) {
        (Some(a), Some(b)) if a < b => {}
        _ => {
            return Err(Error::Config(format!(
                "window {} violates point-in-time ordering",
                window.index
            )))
        }
    }
    let predictions = predictor.predict(fp, &window, &train_rows, &test_rows)?;

    // Per stock: first test row's prediction, mean realized return.
    struct Stock {
        prediction: f64,
        ret_sum: f64,
        rows: usize,
    }
    let mut stocks: BTreeMap<i64, Stock> = BTreeMap::new();
    for (&i, &p) in test_rows.iter().zip(&predictions) {
        let s = stocks.entry(fp.keys[i].0).or_insert(Stock {
            prediction: p,
            ret_sum: 0.0,
            rows: 0,
        });
        s.ret_sum += fp.ret[i];
        s.rows += 1;
    }
    let realized: BTreeMap<i64, f64> = stocks.iter().map(|(&id, s)| (id, s.ret_sum / s.rows as f64)).collect();

    let mut ranked: Vec<(i64, f64)> = stocks.iter().map(|(&id, s)| (id, s.prediction)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let members: Vec<i64> = ranked.iter().take(cfg.top_k).map(|r| r.0).collect();

    let mut held = members.clone();
    held.sort_unstable();
    let portfolio_return = held.iter().map(|id| realized[id]).sum::<f64>() / held.len() as f64;
    let benchmark_return = realized.values().sum::<f64>() / realized.len() as f64;
    Ok(WindowResult {
        window,
        members,
        universe_size: realized.len(),
        portfolio_return,
        benchmark_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month_ends(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| {
                let y = 2019 + (i / 12) as i32;
                let m = (i % 12) as u32 + 1;
                NaiveDate::from_ymd_opt(y, m, 1).unwrap()
            })
            .collect()
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&month_ends(37), 36, 1).unwrap().len(), 1);
        assert_eq!(make_windows(&month_ends(48), 36, 1).unwrap().len(), 12);
        let w = make_windows(&month_ends(40), 36, 2).unwrap();
        assert_eq!(w.len(), 2);
        let dates = month_ends(40);
        assert_eq!((w[0].test_start, w[0].test_end), (dates[36], dates[37]));
        assert_eq!((w[1].test_start, w[1].test_end), (dates[38], dates[39]));
    }

    #[test]
    fn insufficient_history() {
        match make_windows(&month_ends(36), 36, 1) {
            Err(Error::InsufficientHistory { required, available }) => {
                assert_eq!((required, available), (37, 36));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_test_month_is_skipped() {
        let mut dates = month_ends(39);
        dates.remove(37);
        let w = make_windows(&dates, 36, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].test_start, dates[37]);
        assert_eq!(w[1].offset, 2);
    }

    #[test]
    fn stats_examples() {
        let s = portfolio_stats(&[0.01; 5]);
        assert!((s.mean - 0.01).abs() < 1e-15);
        assert_eq!(s.std, Some(0.0));
        assert_eq!(s.sharpe, None);
        let s = portfolio_stats(&[0.1, -0.1]);
        assert!((s.cumulative[0] - 0.1).abs() < 1e-15);
        assert!((s.cumulative[1] + 0.01).abs() < 1e-15);
        let s = portfolio_stats(&[0.3]);
        assert_eq!((s.std, s.sharpe), (None, None));
    }
}
