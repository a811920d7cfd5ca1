//! Generate a synthetic CRSP-style panel and write it as CSV.
//!
//! cargo run --example synthetic_panel -- [out_dir]

use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("factorforge-synth"));
    let cfg = SynthConfig {
        n_stocks: 50,
        n_months: 60,
        leak_features: true,
        ..SynthConfig::default()
    };
    let data = generate(&cfg)?;
    for p in data.write(&dir)? {
        println!("wrote {}", p.display());
    }
    let open = data.membership.iter().filter(|m| m.end_date.is_none()).count();
    println!("{} price rows, {} members ({open} still listed)", data.prices.len(), data.membership.len());
    Ok(())
}
