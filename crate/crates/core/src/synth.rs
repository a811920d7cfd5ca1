//! Deterministic synthetic monthly panels in the prices/membership CSV
//! schemas, for exercising the pipeline without licensed data.
//!
//! Prices follow a geometric random walk with a per-stock volatility. When
//! `signal_strength > 0` part of each month's return is a nonlinear function
//! of the stock's trailing 4-month momentum and trailing 12-month
//! volatility, both known before the month starts.

use std::path::Path;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::ExtraColumns;
use crate::ingest::{write_membership, write_prices, MembershipRow, ObservationRow, Panel};
use crate::rng::Xoshiro256StarStar;

pub const LEAK_COLUMN: &str = "LeakedReturn";

const BURN_IN: usize = 24;
const MOMENTUM_LAG: usize = 4;
const VOL_LOOKBACK: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_stocks: usize,
    pub n_months: usize,
    pub seed: u64,
    pub signal_strength: f64,
    pub leak_features: bool,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stocks: 100,
            n_months: 60,
            seed: 42,
            signal_strength: 0.3,
            leak_features: false,
            start: NaiveDate::from_ymd_opt(2019, 1, 31).expect("valid date"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stocks < 2 || self.n_months < 2 {
            return Err(Error::Config("synthetic panel needs >= 2 stocks and >= 2 months".into()));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::Config("signal_strength must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub prices: Panel,
    pub membership: Vec<MembershipRow>,
    /// `LeakedReturn = ret + tiny noise`, present when `leak_features` is set.
    pub leak: Option<ExtraColumns>,
}

impl SynthData {
    /// Write `prices.csv`, `membership.csv` and, if present, `leak.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = vec![dir.join("prices.csv"), dir.join("membership.csv")];
        write_prices(&written[0], &self.prices)?;
        write_membership(&written[1], &self.membership)?;
        if let Some(leak) = &self.leak {
            let p = dir.join("leak.csv");
            leak.write_csv(&p)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Last calendar day of the month `k` months after `start`'s month.
fn month_end(start: NaiveDate, k: usize) -> NaiveDate {
    let first = start.with_day0(0).expect("day 1 exists");
    let next = first + Months::new(k as u32 + 1);
    next.pred_opt().expect("date in range")
}

fn lognormal(rng: &mut Xoshiro256StarStar, median: f64, sigma: f64) -> f64 {
    median * (sigma * rng.normal()).exp()
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let dates: Vec<NaiveDate> = (0..cfg.n_months).map(|k| month_end(cfg.start, k)).collect();
    let signal_w = cfg.signal_strength.sqrt();
    let noise_w = (1.0 - cfg.signal_strength).sqrt();

    let mut rows = Vec::with_capacity(cfg.n_stocks * cfg.n_months);
    let mut membership = Vec::with_capacity(cfg.n_stocks);
    let mut leak_keys = Vec::new();
    let mut leak_values = Vec::new();

    for s in 0..cfg.n_stocks {
        let permno = 10_001 + s as i64;
        let sigma = lognormal(&mut rng, 0.07, 0.35).clamp(0.02, 0.25);
        let drift = 0.004 + 0.002 * rng.normal();
        let shares = lognormal(&mut rng, 200_000.0, 1.0).round().max(1000.0);
        let turnover = lognormal(&mut rng, 0.08, 0.5);
        let mut price = lognormal(&mut rng, 50.0, 0.8);
        let mut prices = vec![price];
        let mut rets: Vec<f64> = Vec::new();

        for t in 0..BURN_IN + cfg.n_months {
            let signal = if rets.len() >= VOL_LOOKBACK && prices.len() > MOMENTUM_LAG {
                let k = prices.len() - 1;
                let momentum = prices[k] / prices[k - MOMENTUM_LAG] - 1.0;
                let vol = sample_std(&rets[rets.len() - VOL_LOOKBACK..]);
                // Unit-scale nonlinear interaction of trailing momentum and volatility.
                (momentum / (2.0 * sigma)).tanh() * (vol / sigma) * 1.6
            } else {
                0.0
            };
            let eps = rng.normal();
            let r = (drift + sigma * (signal_w * signal + noise_w * eps)).max(-0.9);
            let prev = price;
            price = prev * (1.0 + r);
            let ret = price / prev - 1.0;
            prices.push(price);
            rets.push(ret);
            let vol_shares = (shares * turnover * (1.0 + 3.0 * ret.abs()) * (0.3 * rng.normal()).exp()).round();
            let leak_noise = rng.normal();
            if t >= BURN_IN {
                let date = dates[t - BURN_IN];
                rows.push(ObservationRow {
                    permno,
                    date,
                    prc: price,
                    ret,
                    vol: vol_shares.max(1.0),
                    shrout: shares,
                });
                if cfg.leak_features {
                    leak_keys.push((permno, date));
                    leak_values.push(ret + 0.01 * sigma * leak_noise);
                }
            }
        }

        // Most stocks are members throughout; some join late, some leave
        // early, and the rest are open-ended.
        let kind = rng.below(10);
        let cut = 1 + rng.below(cfg.n_months / 4 + 1);
        let (start, end) = match kind {
            0 => (dates[cut.min(cfg.n_months - 1)], Some(dates[cfg.n_months - 1])),
            1 => (dates[0], Some(dates[cfg.n_months - 1 - cut.min(cfg.n_months - 1)])),
            2 | 3 => (dates[0], None),
            _ => (dates[0], Some(dates[cfg.n_months - 1])),
        };
        membership.push(MembershipRow {
            permno,
            start_date: start,
            end_date: end,
        });
    }

    let leak = cfg.leak_features.then(|| ExtraColumns {
        keys: leak_keys,
        names: vec![LEAK_COLUMN.to_string()],
        values: vec![leak_values],
    });
    Ok(SynthData {
        prices: Panel::new(rows),
        membership,
        leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_ends_roll_over() {
        let start = NaiveDate::from_ymd_opt(2019, 1, 31).unwrap();
        assert_eq!(month_end(start, 1), NaiveDate::from_ymd_opt(2019, 2, 28).unwrap());
        assert_eq!(month_end(start, 13), NaiveDate::from_ymd_opt(2020, 2, 29).unwrap());
        assert_eq!(month_end(start, 11), NaiveDate::from_ymd_opt(2019, 12, 31).unwrap());
    }

    #[test]
    fn shape_and_identity() {
        let cfg = SynthConfig {
            n_stocks: 5,
            n_months: 30,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.prices.len(), 150);
        assert_eq!(data.membership.len(), 5);
        assert!(data.prices.is_sorted());
        for w in data.prices.rows.windows(2) {
            if w[0].permno == w[1].permno {
                assert!((w[1].ret - (w[1].prc / w[0].prc - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_tiny_panels() {
        let cfg = SynthConfig {
            n_stocks: 1,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
