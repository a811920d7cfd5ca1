//! Factor columns against a naive per-row re-scan, plus structural properties.

mod common;

use common::naive::naive_factors;
use common::{close, random_panel, random_security};
use factorforge::factors::{catalog, compute_base_factors, compute_factors, compute_interaction_factors, FactorConfig, FactorPanel};
use factorforge::ingest::{ObservationRow, Panel};
use factorforge::rng::Xoshiro256StarStar;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn raw_factors(panel: &Panel, cfg: &FactorConfig) -> FactorPanel {
    let mut fp = compute_base_factors(panel, cfg);
    compute_interaction_factors(&mut fp, panel, cfg).unwrap();
    fp
}

#[test]
fn every_factor_matches_naive_rescan() {
    let cfg = FactorConfig::default();
    let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
    let names = catalog();
    for series in 0..20 {
        let rows = random_security(&mut rng, 1, 500);
        let panel = Panel::new(rows.clone());
        let fp = raw_factors(&panel, &cfg);
        let expected = naive_factors(&rows, &cfg);
        assert_eq!(expected.len(), names.len());
        for (name, want) in names.iter().zip(&expected) {
            let got = fp.column(name).unwrap();
            for t in 0..rows.len() {
                assert!(
                    close(got[t], want[t], TOL),
                    "series {series}, {name}, row {t}: {} vs oracle {}",
                    got[t],
                    want[t]
                );
            }
        }
    }
}

#[test]
fn bounded_factors() {
    let cfg = FactorConfig::default();
    let fp = raw_factors(&random_panel(5, 20, 300), &cfg);
    for v in fp.column("RSI").unwrap().iter().filter(|v| !v.is_nan()) {
        assert!((0.0..=100.0).contains(v), "RSI {v}");
    }
    for v in fp.column("HighLowSpread").unwrap().iter().filter(|v| !v.is_nan()) {
        assert!(*v >= 0.0, "HighLowSpread {v}");
    }
}

#[test]
fn algebraic_identities() {
    let fp = raw_factors(&random_panel(9, 5, 200), &FactorConfig::default());
    let col = |n: &str| fp.column(n).unwrap().to_vec();
    let (mc, lmc) = (col("MarketCap"), col("LogMarketCap"));
    let (vol, turn, vt) = (col("RollingVolatility"), col("TurnoverRatio"), col("VolatilityTurnover"));
    let (s, l, mpm) = (col("ShortMomentum"), col("LongMomentum"), col("MultiPeriodMomentum"));
    for t in 0..fp.n_rows() {
        assert!(close(lmc[t], mc[t].ln_1p(), 1e-15));
        assert!(close(vt[t], vol[t] * turn[t], 1e-15));
        assert!(close(mpm[t], s[t] * l[t], 1e-15));
    }
}

#[test]
fn flat_price_gives_zero_momentum_after_finalize() {
    let rows: Vec<ObservationRow> = (0..60)
        .map(|t| ObservationRow {
            permno: 7,
            date: common::month_end(t),
            prc: 25.0,
            ret: 0.0,
            vol: 1000.0,
            shrout: 500.0,
        })
        .collect();
    let fp = compute_factors(&Panel::new(rows), &FactorConfig::default()).unwrap();
    for name in ["Momentum", "MomentumChange", "MomentumMA", "ShortMomentum", "LongMomentum", "MultiPeriodMomentum"] {
        assert!(fp.column(name).unwrap().iter().all(|&v| v == 0.0), "{name}");
    }
    for (name, col) in fp.columns() {
        assert!(col.iter().all(|v| v.is_finite()), "{name}");
    }
}

fn bits(fp: &FactorPanel, rows: std::ops::Range<usize>) -> Vec<Vec<u64>> {
    fp.columns().map(|(_, c)| c[rows.clone()].iter().map(|v| v.to_bits()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Changing one security's data leaves every other security untouched.
    #[test]
    fn per_security_locality(seed in any::<u64>(), scale in 0.5f64..2.0) {
        let cfg = FactorConfig::default();
        let panel = random_panel(seed, 3, 80);
        let mut altered = panel.clone();
        for r in altered.rows.iter_mut().filter(|r| r.permno == 101) {
            r.prc *= scale;
            r.vol += 17.0;
        }
        let a = compute_factors(&panel, &cfg).unwrap();
        let b = compute_factors(&altered, &cfg).unwrap();
        let groups = a.groups();
        for (g, range) in groups.iter().enumerate() {
            if g != 1 {
                prop_assert_eq!(bits(&a, range.clone()), bits(&b, range.clone()));
            }
        }
    }

    /// Dropping the first `k` observations shifts outputs once every window
    /// lies inside the shortened history.
    #[test]
    fn shift_equivariance(seed in any::<u64>(), k in 1usize..30) {
        let cfg = FactorConfig::default();
        let full = random_panel(seed, 1, 120);
        let short = Panel::new(full.rows[k..].to_vec());
        let a = raw_factors(&full, &cfg);
        let b = raw_factors(&short, &cfg);
        let warm = 40;
        for (name, col) in a.columns() {
            let other = b.column(name).unwrap();
            for t in warm..other.len() {
                prop_assert_eq!(col[t + k].to_bits(), other[t].to_bits(), "{} at {}", name, t);
            }
        }
    }

    /// Returns, momentum and RSI ignore the price scale; market cap scales with it.
    #[test]
    fn price_scale_invariance(seed in any::<u64>(), c in 0.25f64..4.0) {
        let cfg = FactorConfig::default();
        let panel = random_panel(seed, 1, 80);
        let mut scaled = panel.clone();
        scaled.rows.iter_mut().for_each(|r| r.prc *= c);
        let a = raw_factors(&panel, &cfg);
        let b = raw_factors(&scaled, &cfg);
        for name in ["Momentum", "PriceReturn", "ShortMomentum", "LongMomentum"] {
            for (x, y) in a.column(name).unwrap().iter().zip(b.column(name).unwrap()) {
                prop_assert!(close(*x, *y, 1e-9), "{} {} {}", name, x, y);
            }
        }
        for (x, y) in a.column("MarketCap").unwrap().iter().zip(b.column("MarketCap").unwrap()) {
            prop_assert!(close(x * c, *y, 1e-12));
        }
    }
}
