//! Two-layer factor selection on a panel carrying a planted leak column.
//!
//! cargo run --release --example select_factors

use factorforge::factors::{compute_factors, finalize, FactorConfig};
use factorforge::ingest::clean;
use factorforge::selection::{select_factors, SelectionConfig};
use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let data = generate(&SynthConfig {
        n_stocks: 80,
        n_months: 48,
        leak_features: true,
        ..SynthConfig::default()
    })?;
    let mut fp = compute_factors(&clean(&data.prices), &FactorConfig::default())?;
    if let Some(leak) = &data.leak {
        fp.join(leak);
        finalize(&mut fp);
    }

    let report = select_factors(&fp, &SelectionConfig::default())?;
    println!("layer 1 dropped (|corr with ret| > 0.1):");
    for d in &report.layer1_dropped {
        println!("  {:<26} r = {:+.3}", d.factor, d.corr);
    }
    println!("layer 2 dropped (pairwise |corr| > 0.75):");
    for d in &report.layer2_dropped {
        println!("  {:<26} vs {:<26} r = {:+.3}", d.dropped, d.kept, d.pair_corr);
    }
    println!("best subset ({} combinations scored): {:?}", report.evaluated_count, report.best_subset);
    println!("held-out R^2 {:.4}", report.best_score);
    Ok(())
}
