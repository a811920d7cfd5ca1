//! Every stage from raw CSVs to backtest charts, driven by one config.
//!
//! cargo run --release --example full_pipeline

use factorforge::pipeline::{cmd_run_all, cmd_synth, PipelineConfig};

fn main() -> factorforge::Result<()> {
    let root = std::env::temp_dir().join("factorforge-pipeline");
    let mut cfg = PipelineConfig::default();
    cfg.synth.n_stocks = 60;
    cfg.synth.n_months = 48;
    cmd_synth(&cfg.synth, &root)?;

    cfg.paths.prices = root.join("prices.csv");
    cfg.paths.membership = root.join("membership.csv");
    cfg.paths.output_dir = root.join("out");
    cfg.backtest.top_k = 10;

    let summary = cmd_run_all(&cfg, |s| println!("{:<9} {} artifacts", s.stage, s.artifacts.len()))?;
    println!("config hash {}", summary.config_hash);
    println!("outputs in {}", cfg.paths.output_dir.display());
    Ok(())
}
