//! Rolling 36-month train / 1-month test backtest of a top-k portfolio,
//! compared against the same engine driven by realized returns.
//!
//! cargo run --release --example walk_forward_backtest

use factorforge::backtest::{run_backtest, run_backtest_with, BacktestConfig, PerfectForesight};
use factorforge::factors::{compute_factors, FactorConfig};
use factorforge::ingest::clean;
use factorforge::models::{BoostingConfig, ModelSpec};
use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let data = generate(&SynthConfig {
        n_stocks: 60,
        n_months: 48,
        ..SynthConfig::default()
    })?;
    let fp = compute_factors(&clean(&data.prices), &FactorConfig::default())?;
    let cfg = BacktestConfig {
        top_k: 10,
        model: ModelSpec::GradientBoosting(BoostingConfig {
            n_iterations: 50,
            ..BoostingConfig::default()
        }),
        features: ["RollingVolatility", "TurnoverRatio", "VolatilityDynamics"].map(String::from).to_vec(),
        ..BacktestConfig::default()
    };
    let report = run_backtest(&fp, &cfg)?;
    let oracle = run_backtest_with(&fp, &cfg, &PerfectForesight)?;

    println!("{:<6} {:<12} {:>10} {:>10} {:>10}", "window", "test month", "portfolio", "benchmark", "oracle");
    for (w, o) in report.windows.iter().zip(&oracle.windows) {
        println!(
            "{:<6} {:<12} {:>10.4} {:>10.4} {:>10.4}",
            w.window.index, w.window.test_start, w.portfolio_return, w.benchmark_return, o.portfolio_return
        );
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".into(), |s| format!("{s:.3}"));
    println!("portfolio sharpe {}, benchmark sharpe {}", fmt(report.portfolio.sharpe), fmt(report.benchmark.sharpe));
    println!(
        "cumulative: portfolio {:.4}, benchmark {:.4}",
        report.cumulative_portfolio.last().unwrap_or(&0.0),
        report.cumulative_benchmark.last().unwrap_or(&0.0)
    );
    Ok(())
}
