//! Naive per-row factor oracle: every value is recomputed from the raw
//! observations with explicit window scans.

use factorforge::factors::FactorConfig;
use factorforge::ingest::ObservationRow;

fn div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::NAN
    } else {
        a / b
    }
}

/// Values of `f` over `[t + 1 - w, t]`, or `None` when the window is short
/// or touches a missing value.
fn window(t: usize, w: usize, f: &dyn Fn(usize) -> f64) -> Option<Vec<f64>> {
    if t + 1 < w {
        return None;
    }
    let v: Vec<f64> = (t + 1 - w..=t).map(f).collect();
    if v.iter().any(|x| x.is_nan()) {
        None
    } else {
        Some(v)
    }
}

fn mean_of(t: usize, w: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    window(t, w, f).map_or(f64::NAN, |v| v.iter().sum::<f64>() / w as f64)
}

/// Sample std through the pairwise-difference identity
/// `var = sum_{i<j} (x_i - x_j)^2 / (n (n - 1))`.
fn pairwise_std(t: usize, w: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    match window(t, w, f) {
        Some(v) if w >= 2 => {
            let mut s = 0.0;
            for i in 0..w {
                for j in i + 1..w {
                    s += (v[i] - v[j]) * (v[i] - v[j]);
                }
            }
            (s / (w * (w - 1)) as f64).sqrt()
        }
        _ => f64::NAN,
    }
}

/// Every catalog factor for one security, computed row by row from the raw
/// observations without sharing intermediate series.
pub fn naive_factors(rows: &[ObservationRow], cfg: &FactorConfig) -> Vec<Vec<f64>> {
    let p = |t: usize| rows[t].prc;
    let lagged = |t: usize, lag: usize| if t < lag { f64::NAN } else { div(p(t), p(t - lag)) - 1.0 };
    let mc = |t: usize| rows[t].prc.abs() * rows[t].shrout;
    let mom = |t: usize| lagged(t, cfg.momentum_lag);
    let pr = |t: usize| lagged(t, 1);
    let amihud = |t: usize| if t < 1 { f64::NAN } else { div((p(t) - p(t - 1)).abs(), rows[t].vol) };
    let turn = |t: usize| div(rows[t].vol, rows[t].shrout);
    let vol = |t: usize| pairwise_std(t, cfg.volatility_window, &|i| rows[i].ret);
    let spread = |t: usize| match window(t, cfg.spread_window, &p) {
        Some(v) => p(t) - v.iter().copied().fold(f64::INFINITY, f64::min),
        None => f64::NAN,
    };
    let rsi = |t: usize| {
        let delta = |i: usize| if i < 1 { f64::NAN } else { p(i) - p(i - 1) };
        // `f64::max` swallows NaN; the zero term carries it through.
        let g = mean_of(t, cfg.rsi_window, &|i| delta(i).max(0.0) + 0.0 * delta(i));
        let l = mean_of(t, cfg.rsi_window, &|i| (-delta(i)).max(0.0) + 0.0 * delta(i));
        if g.is_nan() || l.is_nan() {
            f64::NAN
        } else if g == 0.0 && l == 0.0 {
            50.0
        } else if l == 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    let ma = |t: usize| mean_of(t, cfg.long_ma_window, &p);
    let short = |t: usize| lagged(t, cfg.short_momentum_lag);
    let long = |t: usize| lagged(t, cfg.long_momentum_lag);
    let madev = |t: usize| mom(t) - mean_of(t, cfg.long_ma_window, &mom);
    let k = cfg.volatility_slope_lag;
    let slope = |t: usize| if t < k { f64::NAN } else { (vol(t) - vol(t - k)) / k as f64 };

    let factors: Vec<Box<dyn Fn(usize) -> f64 + '_>> = vec![
        Box::new(mc),
        Box::new(mom),
        Box::new(pr),
        Box::new(|t| if t < 1 { f64::NAN } else { mom(t) - mom(t - 1) }),
        Box::new(|t| mean_of(t, cfg.momentum_ma_window, &mom)),
        Box::new(|t| (1.0 + mc(t)).ln()),
        Box::new(amihud),
        Box::new(turn),
        Box::new(vol),
        Box::new(spread),
        Box::new(rsi),
        Box::new(ma),
        Box::new(short),
        Box::new(long),
        Box::new(|t| mom(t) * (1.0 + mc(t)).ln()),
        Box::new(|t| vol(t) * turn(t)),
        Box::new(|t| mom(t) * amihud(t)),
        Box::new(|t| div(mom(t), mc(t))),
        Box::new(madev),
        Box::new(|t| div(spread(t), p(t))),
        Box::new(|t| mom(t) * rsi(t)),
        Box::new(|t| mean_of(t, cfg.smoothed_return_window, &pr)),
        Box::new(|t| div(pr(t), vol(t))),
        Box::new(slope),
        Box::new(|t| vol(t) * slope(t)),
        Box::new(|t| div(turn(t) * pr(t).abs(), mc(t))),
        Box::new(|t| mom(t) * madev(t) * rsi(t)),
        Box::new(|t| div(mom(t), vol(t) * turn(t))),
        Box::new(|t| mom(t) * spread(t) - rsi(t) * amihud(t)),
        Box::new(|t| div(p(t) - ma(t), vol(t))),
        Box::new(|t| short(t) * long(t)),
    ];
    factors.iter().map(|f| (0..rows.len()).map(f).collect()).collect()
}
