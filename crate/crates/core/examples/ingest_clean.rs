//! Load a prices/membership pair from disk, keep in-universe rows and clean them.
//!
//! cargo run --example ingest_clean

use factorforge::ingest::{clean, load_membership, load_prices, merge_and_filter, write_prices};
use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let dir = std::env::temp_dir().join("factorforge-ingest");
    let data = generate(&SynthConfig {
        n_stocks: 20,
        n_months: 36,
        ..SynthConfig::default()
    })?;
    data.write(&dir)?;

    let prices = load_prices(dir.join("prices.csv"))?;
    let membership = load_membership(dir.join("membership.csv"))?;
    let merged = merge_and_filter(&prices, &membership);
    let panel = clean(&merged);
    println!("loaded {} rows, {} after membership filter", prices.len(), merged.len());
    for m in membership.iter().take(5) {
        let end = m.end_date.map_or("open".to_string(), |d| d.to_string());
        println!("  permno {} member {} .. {}", m.permno, m.start_date, end);
    }
    let out = dir.join("panel.csv");
    write_prices(&out, &panel)?;
    println!("wrote {} ({} securities)", out.display(), panel.permnos().len());
    Ok(())
}
