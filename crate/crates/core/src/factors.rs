//! The engineered factor catalog and the long-format [`FactorPanel`].
//!
//! Every rolling or lagged quantity is computed within a single security's
//! history. Cells that cannot be computed (warm-up, zero denominators) stay
//! `NaN` until [`finalize`] forward-fills them per security and zeroes any
//! leading gap.

use std::collections::HashMap;
use std::fs::File;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{fill_forward_then_zero, group_ranges, Panel};
use crate::rolling::{diff, pct_change, rolling_mean, rolling_min, rolling_std, rsi, safe_div};

pub const BASE_FACTORS: [&str; 14] = [
    "MarketCap",
    "Momentum",
    "PriceReturn",
    "MomentumChange",
    "MomentumMA",
    "LogMarketCap",
    "AmihudIlliquidity",
    "TurnoverRatio",
    "RollingVolatility",
    "HighLowSpread",
    "RSI",
    "MovingAverage",
    "ShortMomentum",
    "LongMomentum",
];

pub const INTERACTION_FACTORS: [&str; 17] = [
    "MomentumVsMarketCap",
    "VolatilityTurnover",
    "MomentumLiquidity",
    "MarketCapAdjMomentum",
    "MomentumMADeviation",
    "NormalizedHighLowSpread",
    "MomentumRSI",
    "SmoothedReturn",
    "VolatilityAdjustedReturn",
    "VolatilitySlope",
    "VolatilityDynamics",
    "LiquidityStress",
    "TrendStrength",
    "RiskAdjustedMomentum",
    "AbnormalBehavior",
    "MeanReversion",
    "MultiPeriodMomentum",
];

/// Full catalog in output column order.
pub fn catalog() -> Vec<&'static str> {
    BASE_FACTORS.iter().chain(INTERACTION_FACTORS.iter()).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorConfig {
    pub momentum_lag: usize,
    pub momentum_ma_window: usize,
    pub long_ma_window: usize,
    pub volatility_window: usize,
    pub spread_window: usize,
    pub rsi_window: usize,
    pub smoothed_return_window: usize,
    pub short_momentum_lag: usize,
    pub long_momentum_lag: usize,
    pub volatility_slope_lag: usize,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            momentum_lag: 4,
            momentum_ma_window: 10,
            long_ma_window: 20,
            volatility_window: 20,
            spread_window: 20,
            rsi_window: 14,
            smoothed_return_window: 10,
            short_momentum_lag: 5,
            long_momentum_lag: 20,
            volatility_slope_lag: 1,
        }
    }
}

impl FactorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("momentum_lag", self.momentum_lag),
            ("momentum_ma_window", self.momentum_ma_window),
            ("long_ma_window", self.long_ma_window),
            ("volatility_window", self.volatility_window),
            ("spread_window", self.spread_window),
            ("rsi_window", self.rsi_window),
            ("smoothed_return_window", self.smoothed_return_window),
            ("short_momentum_lag", self.short_momentum_lag),
            ("long_momentum_lag", self.long_momentum_lag),
            ("volatility_slope_lag", self.volatility_slope_lag),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::Config(format!("factors.{name} must be >= 1"))),
            None => Ok(()),
        }
    }
}

/// Long-format factor table keyed by `(permno, date)`, sorted the same way as
/// the source panel. Columns are stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub keys: Vec<(i64, NaiveDate)>,
    pub ret: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FactorPanel {
    pub fn new(keys: Vec<(i64, NaiveDate)>, ret: Vec<f64>) -> Self {
        assert_eq!(keys.len(), ret.len());
        Self {
            keys,
            ret,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names.iter().map(String::as_str).zip(self.columns.iter().map(Vec::as_slice))
    }

    /// Append a column, replacing any existing column of the same name.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.n_rows(), "column length mismatch");
        let name = name.into();
        match self.names.iter().position(|n| *n == name) {
            Some(i) => self.columns[i] = values,
            None => {
                self.names.push(name);
                self.columns.push(values);
            }
        }
    }

    pub fn groups(&self) -> Vec<Range<usize>> {
        group_ranges(&self.keys, |k| k.0)
    }

    /// Rows whose index passes `keep`, preserving order.
    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> FactorPanel {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(i)).collect();
        FactorPanel {
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
            ret: idx.iter().map(|&i| self.ret[i]).collect(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Distinct dates in ascending order.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.keys.iter().map(|k| k.1).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Left-join extra per-row columns by key. Keys absent from `extra` get `NaN`.
    pub fn join(&mut self, extra: &ExtraColumns) {
        let index: HashMap<(i64, NaiveDate), usize> =
            extra.keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        for (c, name) in extra.names.iter().enumerate() {
            let values = self
                .keys
                .iter()
                .map(|k| index.get(k).map_or(f64::NAN, |&i| extra.values[c][i]))
                .collect();
            self.push_column(name.clone(), values);
        }
    }

    /// Write `permno,date,ret,<columns...>`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let res: csv::Result<()> = (|| {
            let mut header = vec!["permno".to_string(), "date".to_string(), "ret".to_string()];
            header.extend(self.names.iter().cloned());
            w.write_record(&header)?;
            for i in 0..self.n_rows() {
                let mut rec = Vec::with_capacity(header.len());
                rec.push(self.keys[i].0.to_string());
                rec.push(self.keys[i].1.format("%Y-%m-%d").to_string());
                rec.push(self.ret[i].to_string());
                rec.extend(self.columns.iter().map(|c| c[i].to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| Error::csv(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<FactorPanel> {
        let table = ExtraColumns::read_with_ret(path.as_ref())?;
        let (ret, extra) = table;
        let mut fp = FactorPanel::new(extra.keys.clone(), ret);
        for (name, values) in extra.names.into_iter().zip(extra.values) {
            fp.push_column(name, values);
        }
        Ok(fp)
    }
}

/// Additional per-row feature columns keyed by `(permno, date)`, loaded from
/// a CSV with header `permno,date,<name>...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtraColumns {
    pub keys: Vec<(i64, NaiveDate)>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ExtraColumns {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, rows) = read_keyed(path)?;
        let names = header[2..].to_vec();
        let mut values = vec![Vec::with_capacity(rows.len()); names.len()];
        let mut keys = Vec::with_capacity(rows.len());
        for (key, cells) in rows {
            keys.push(key);
            for (c, v) in cells.into_iter().enumerate() {
                values[c].push(v);
            }
        }
        Ok(Self { keys, names, values })
    }

    fn read_with_ret(path: &Path) -> Result<(Vec<f64>, ExtraColumns)> {
        let mut extra = Self::load(path)?;
        if extra.names.first().map(String::as_str) != Some("ret") {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: "ret".to_string(),
            });
        }
        extra.names.remove(0);
        let ret = extra.values.remove(0);
        Ok((ret, extra))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let res: csv::Result<()> = (|| {
            let mut header = vec!["permno".to_string(), "date".to_string()];
            header.extend(self.names.iter().cloned());
            w.write_record(&header)?;
            for (i, k) in self.keys.iter().enumerate() {
                let mut rec = vec![k.0.to_string(), k.1.format("%Y-%m-%d").to_string()];
                rec.extend(self.values.iter().map(|c| c[i].to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| Error::csv(path, e))
    }
}

type KeyedRow = ((i64, NaiveDate), Vec<f64>);

fn read_keyed(path: &Path) -> Result<(Vec<String>, Vec<KeyedRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    for (i, name) in ["permno", "date"].iter().enumerate() {
        if header.get(i).map(String::as_str) != Some(*name) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            column: column.to_string(),
            message,
        };
        let permno: i64 = rec[0]
            .parse()
            .map_err(|_| parse_err("permno", format!("malformed integer id {:?}", &rec[0])))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| parse_err("date", format!("malformed date {:?} ({e})", &rec[1])))?;
        let cells = (2..header.len())
            .map(|c| rec.get(c).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN))
            .collect();
        rows.push(((permno, date), cells));
    }
    Ok((header, rows))
}

fn map2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn base_for_security(prc: &[f64], ret: &[f64], vol: &[f64], shrout: &[f64], cfg: &FactorConfig) -> Vec<Vec<f64>> {
    let market_cap = map2(prc, shrout, |p, s| p.abs() * s);
    let momentum = pct_change(prc, cfg.momentum_lag);
    let price_return = pct_change(prc, 1);
    let momentum_change = diff(&momentum, 1);
    let momentum_ma = rolling_mean(&momentum, cfg.momentum_ma_window);
    let log_market_cap: Vec<f64> = market_cap.iter().map(|m| m.ln_1p()).collect();
    let price_change = diff(prc, 1);
    let amihud = map2(&price_change, vol, |dp, v| safe_div(dp.abs(), v));
    let turnover = map2(vol, shrout, safe_div);
    let volatility = rolling_std(ret, cfg.volatility_window);
    let spread = map2(prc, &rolling_min(prc, cfg.spread_window), |p, lo| p - lo);
    let rsi = rsi(prc, cfg.rsi_window);
    let moving_average = rolling_mean(prc, cfg.long_ma_window);
    let short_momentum = pct_change(prc, cfg.short_momentum_lag);
    let long_momentum = pct_change(prc, cfg.long_momentum_lag);
    vec![
        market_cap,
        momentum,
        price_return,
        momentum_change,
        momentum_ma,
        log_market_cap,
        amihud,
        turnover,
        volatility,
        spread,
        rsi,
        moving_average,
        short_momentum,
        long_momentum,
    ]
}

fn concat_groups(n_rows: usize, per_group: Vec<Vec<Vec<f64>>>, n_cols: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(n_rows); n_cols];
    for group in per_group {
        for (c, values) in group.into_iter().enumerate() {
            cols[c].extend(values);
        }
    }
    cols
}

/// Compute the 14 base factors. Expects a cleaned, sorted panel.
pub fn compute_base_factors(panel: &Panel, cfg: &FactorConfig) -> FactorPanel {
    let keys = panel.rows.iter().map(|r| (r.permno, r.date)).collect();
    let ret = panel.rows.iter().map(|r| r.ret).collect();
    let mut fp = FactorPanel::new(keys, ret);
    let per_group: Vec<Vec<Vec<f64>>> = panel
        .groups()
        .into_par_iter()
        .map(|range| {
            let rows = &panel.rows[range];
            let prc: Vec<f64> = rows.iter().map(|r| r.prc).collect();
            let ret: Vec<f64> = rows.iter().map(|r| r.ret).collect();
            let vol: Vec<f64> = rows.iter().map(|r| r.vol).collect();
            let shrout: Vec<f64> = rows.iter().map(|r| r.shrout).collect();
            base_for_security(&prc, &ret, &vol, &shrout, cfg)
        })
        .collect();
    let cols = concat_groups(panel.len(), per_group, BASE_FACTORS.len());
    for (name, values) in BASE_FACTORS.iter().zip(cols) {
        fp.push_column(*name, values);
    }
    fp
}

/// Append the 17 interaction factors. `panel` supplies prices and must have
/// the same row keys as `fp`.
pub fn compute_interaction_factors(fp: &mut FactorPanel, panel: &Panel, cfg: &FactorConfig) -> Result<()> {
    if panel.len() != fp.n_rows()
        || panel.rows.iter().zip(&fp.keys).any(|(r, k)| (r.permno, r.date) != *k)
    {
        return Err(Error::Config("price panel and factor panel keys differ".to_string()));
    }
    let base: Vec<&[f64]> = BASE_FACTORS
        .iter()
        .map(|n| fp.require(n))
        .collect::<Result<_>>()?;
    let per_group: Vec<Vec<Vec<f64>>> = fp
        .groups()
        .into_par_iter()
        .map(|range| {
            let col = |i: usize| &base[i][range.clone()];
            let prc: Vec<f64> = panel.rows[range.clone()].iter().map(|r| r.prc).collect();
            interactions_for_security(&prc, col, cfg)
        })
        .collect();
    let cols = concat_groups(fp.n_rows(), per_group, INTERACTION_FACTORS.len());
    for (name, values) in INTERACTION_FACTORS.iter().zip(cols) {
        fp.push_column(*name, values);
    }
    Ok(())
}

fn interactions_for_security<'a>(
    prc: &[f64],
    base: impl Fn(usize) -> &'a [f64],
    cfg: &FactorConfig,
) -> Vec<Vec<f64>> {
    let market_cap = base(0);
    let momentum = base(1);
    let price_return = base(2);
    let log_market_cap = base(5);
    let amihud = base(6);
    let turnover = base(7);
    let volatility = base(8);
    let spread = base(9);
    let rsi = base(10);
    let moving_average = base(11);
    let short_momentum = base(12);
    let long_momentum = base(13);

    let k = cfg.volatility_slope_lag;
    let n = prc.len();
    let momentum_ma_long = rolling_mean(momentum, cfg.long_ma_window);
    let ma_deviation = map2(momentum, &momentum_ma_long, |m, ma| m - ma);
    let slope: Vec<f64> = diff(volatility, k).iter().map(|d| d / k as f64).collect();

    let mut out = vec![
        map2(momentum, log_market_cap, |m, l| m * l),
        map2(volatility, turnover, |v, t| v * t),
        map2(momentum, amihud, |m, a| m * a),
        map2(momentum, market_cap, safe_div),
        ma_deviation.clone(),
        map2(spread, prc, safe_div),
        map2(momentum, rsi, |m, r| m * r),
        rolling_mean(price_return, cfg.smoothed_return_window),
        map2(price_return, volatility, safe_div),
        slope.clone(),
        map2(volatility, &slope, |v, s| v * s),
    ];
    out.push(
        (0..n)
            .map(|t| safe_div(turnover[t] * price_return[t].abs(), market_cap[t]))
            .collect(),
    );
    out.push((0..n).map(|t| momentum[t] * ma_deviation[t] * rsi[t]).collect());
    out.push(
        (0..n)
            .map(|t| safe_div(momentum[t], volatility[t] * turnover[t]))
            .collect(),
    );
    out.push(
        (0..n)
            .map(|t| momentum[t] * spread[t] - rsi[t] * amihud[t])
            .collect(),
    );
    out.push(
        (0..n)
            .map(|t| safe_div(prc[t] - moving_average[t], volatility[t]))
            .collect(),
    );
    out.push(map2(short_momentum, long_momentum, |s, l| s * l));
    out
}

/// Resolve every factor column per security: infinities become missing,
/// gaps are forward-filled, leading gaps become zero.
pub fn finalize(fp: &mut FactorPanel) {
    let groups = fp.groups();
    fp.columns.par_iter_mut().for_each(|col| {
        for range in &groups {
            fill_forward_then_zero(&mut col[range.clone()]);
        }
    });
}

/// Base factors, interaction factors and finalization in one call.
pub fn compute_factors(panel: &Panel, cfg: &FactorConfig) -> Result<FactorPanel> {
    cfg.validate()?;
    let mut fp = compute_base_factors(panel, cfg);
    compute_interaction_factors(&mut fp, panel, cfg)?;
    finalize(&mut fp);
    Ok(fp)
}
