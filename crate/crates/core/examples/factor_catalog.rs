//! Compute the full factor catalog for a synthetic panel and print a few rows.
//!
//! cargo run --example factor_catalog

use factorforge::factors::{catalog, compute_factors, FactorConfig, BASE_FACTORS, INTERACTION_FACTORS};
use factorforge::ingest::clean;
use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let data = generate(&SynthConfig {
        n_stocks: 5,
        n_months: 30,
        ..SynthConfig::default()
    })?;
    let panel = clean(&data.prices);
    let fp = compute_factors(&panel, &FactorConfig::default())?;

    println!(
        "{} base + {} interaction = {} factors",
        BASE_FACTORS.len(),
        INTERACTION_FACTORS.len(),
        catalog().len()
    );
    let row = fp.n_rows() - 1;
    let (permno, date) = fp.keys[row];
    println!("last row: permno {permno} on {date}, ret {:.4}", fp.ret[row]);
    for (name, col) in fp.columns() {
        println!("  {name:<26} {:>14.6}", col[row]);
    }
    Ok(())
}
