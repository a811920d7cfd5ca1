//! Lagged and windowed series primitives. `NaN` marks a missing value and
//! propagates: a window containing any missing cell yields missing.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RollingStat {
    Mean,
    Std,
    Min,
}

/// Zero denominators yield missing rather than infinity.
#[inline]
pub fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// `series[t] / series[t - lag] - 1`, missing for the first `lag` entries.
pub fn pct_change(series: &[f64], lag: usize) -> Vec<f64> {
    assert!(lag >= 1, "lag must be >= 1");
    (0..series.len())
        .map(|t| {
            if t < lag {
                f64::NAN
            } else {
                safe_div(series[t], series[t - lag]) - 1.0
            }
        })
        .collect()
}

/// `series[t] - series[t - lag]`.
pub fn diff(series: &[f64], lag: usize) -> Vec<f64> {
    (0..series.len())
        .map(|t| if t < lag { f64::NAN } else { series[t] - series[t - lag] })
        .collect()
}

pub fn rolling_stat(series: &[f64], window: usize, stat: RollingStat) -> Vec<f64> {
    match stat {
        RollingStat::Mean => rolling_mean(series, window),
        RollingStat::Std => rolling_std(series, window),
        RollingStat::Min => rolling_min(series, window),
    }
}

fn windows_of(series: &[f64], window: usize) -> impl Iterator<Item = Option<&[f64]>> {
    assert!(window >= 1, "window must be >= 1");
    (0..series.len()).map(move |t| {
        if t + 1 < window {
            None
        } else {
            let w = &series[t + 1 - window..=t];
            if w.iter().any(|v| v.is_nan()) {
                None
            } else {
                Some(w)
            }
        }
    })
}

pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    windows_of(series, window)
        .map(|w| w.map_or(f64::NAN, |w| w.iter().sum::<f64>() / w.len() as f64))
        .collect()
}

/// Sample (n-1) standard deviation; a window of one observation is missing.
pub fn rolling_std(series: &[f64], window: usize) -> Vec<f64> {
    windows_of(series, window)
        .map(|w| match w {
            Some(w) if w.len() >= 2 => {
                let n = w.len() as f64;
                let mean = w.iter().sum::<f64>() / n;
                let ss: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n - 1.0)).sqrt()
            }
            _ => f64::NAN,
        })
        .collect()
}

/// Monotone-deque sliding minimum.
pub fn rolling_min(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    let mut out = Vec::with_capacity(series.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut last_missing: Option<usize> = None;
    for (t, &v) in series.iter().enumerate() {
        if v.is_nan() {
            last_missing = Some(t);
        } else {
            while deque.back().is_some_and(|&j| series[j] >= v) {
                deque.pop_back();
            }
            deque.push_back(t);
        }
        while deque.front().is_some_and(|&j| j + window <= t) {
            deque.pop_front();
        }
        let warm = t + 1 >= window;
        let clean = last_missing.is_none_or(|m| m + window <= t);
        out.push(if warm && clean {
            series[*deque.front().expect("non-empty window")]
        } else {
            f64::NAN
        });
    }
    out
}

/// Relative strength index from simple rolling means of gains and losses.
/// Both averages zero (flat prices) maps to 50.
pub fn rsi(prices: &[f64], window: usize) -> Vec<f64> {
    let delta = diff(prices, 1);
    let gains: Vec<f64> = delta.iter().map(|&d| if d.is_nan() { d } else { d.max(0.0) }).collect();
    let losses: Vec<f64> = delta.iter().map(|&d| if d.is_nan() { d } else { (-d).max(0.0) }).collect();
    let avg_gain = rolling_mean(&gains, window);
    let avg_loss = rolling_mean(&losses, window);
    avg_gain
        .iter()
        .zip(&avg_loss)
        .map(|(&g, &l)| {
            if g.is_nan() || l.is_nan() {
                f64::NAN
            } else if l == 0.0 && g == 0.0 {
                50.0
            } else if l == 0.0 {
                100.0
            } else {
                100.0 - 100.0 / (1.0 + g / l)
            }
        })
        .collect()
}
