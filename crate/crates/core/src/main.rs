use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use factorforge::pipeline::{self, PipelineConfig, StageSummary};

#[derive(Parser)]
#[command(name = "factorforge", version, about = "Factor engineering, selection, models and backtests for equity panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, env = "FACTORFORGE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, merge with membership and clean; writes panel.csv.
    Ingest(Common),
    /// Compute the factor catalog; writes factors.csv.
    Factors(Common),
    /// Two-layer filter and subset search; writes selection_report.json.
    Select(Common),
    /// Fit the four models; writes model files and metrics.csv.
    Train(Common),
    /// Importance and SHAP summaries for a trained model.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Model JSON to explain (default: the model named in the config).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Walk-forward backtest; writes report, curves and chart.
    Backtest(Common),
    /// Generate a synthetic panel into the output directory.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_stocks: Option<usize>,
        #[arg(long)]
        n_months: Option<usize>,
        #[arg(long)]
        signal_strength: Option<f64>,
        /// Also write leak.csv with a near-copy of the return.
        #[arg(long)]
        leak_features: bool,
    },
    /// Every stage in order plus summary.json.
    RunAll(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Ingest(c)
            | Command::Factors(c)
            | Command::Select(c)
            | Command::Train(c)
            | Command::Backtest(c)
            | Command::RunAll(c) => c,
            Command::Explain { common, .. } | Command::Synth { common, .. } => common,
        }
    }
}

fn load_config(c: &Common) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &c.out {
        cfg.paths.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_stage(s: &StageSummary) {
    println!("[{}] {}", s.stage, s.details);
    for w in &s.warnings {
        eprintln!("[{}] warning: {w}", s.stage);
    }
    for a in &s.artifacts {
        println!("[{}] wrote {}", s.stage, a.path);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = cli.command.common();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = load_config(common)?;
    let summary = match &cli.command {
        Command::Ingest(_) => pipeline::cmd_ingest(&cfg)?,
        Command::Factors(_) => pipeline::cmd_factors(&cfg)?,
        Command::Select(_) => pipeline::cmd_select(&cfg)?,
        Command::Train(_) => pipeline::cmd_train(&cfg)?,
        Command::Explain { model, .. } => pipeline::cmd_explain(&cfg, model.as_deref())?,
        Command::Backtest(_) => pipeline::cmd_backtest(&cfg)?,
        Command::Synth {
            n_stocks,
            n_months,
            signal_strength,
            leak_features,
            ..
        } => {
            let mut s = cfg.synth;
            s.n_stocks = n_stocks.unwrap_or(s.n_stocks);
            s.n_months = n_months.unwrap_or(s.n_months);
            s.signal_strength = signal_strength.unwrap_or(s.signal_strength);
            s.leak_features |= leak_features;
            for p in pipeline::cmd_synth(&s, &cfg.paths.output_dir)? {
                println!("[synth] wrote {}", p.display());
            }
            return Ok(());
        }
        Command::RunAll(_) => {
            let summary = pipeline::cmd_run_all(&cfg, print_stage)?;
            println!("[run-all] config hash {}", summary.config_hash);
            return Ok(());
        }
    };
    print_stage(&summary);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
