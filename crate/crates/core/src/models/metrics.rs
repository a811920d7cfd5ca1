use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mse: f64,
    pub r2: f64,
    /// The targets had zero variance, so `r2` is a convention (1 or 0).
    #[serde(default)]
    pub degenerate: bool,
}

pub(crate) fn mean_squared_error(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<EvalMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::Empty("evaluation needs at least two rows"));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let sst: f64 = y_true.iter().map(|a| (a - mean) * (a - mean)).sum();
    let (r2, degenerate) = if sst == 0.0 {
        (if sse == 0.0 { 1.0 } else { 0.0 }, true)
    } else {
        (1.0 - sse / sst, false)
    };
    Ok(EvalMetrics {
        mse: sse / n,
        r2,
        degenerate,
    })
}
