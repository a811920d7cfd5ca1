//! Ordinary least squares and ridge regression with an unpenalized intercept.
//!
//! Both fits center the data and solve through a thin SVD of the centered
//! design, so ridge with `alpha = 0` and OLS run the identical computation
//! and rank-deficient designs resolve to the minimum-norm solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matrix::{check_shape, ensure_finite_target, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Ols,
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Set when the centered design had (numerically) dependent columns.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                actual: x.n_cols(),
            });
        }
        let mut out = vec![self.intercept; x.n_rows()];
        for (b, col) in self.coefficients.iter().zip(x.columns()) {
            for (o, v) in out.iter_mut().zip(col) {
                *o += b * v;
            }
        }
        Ok(out)
    }
}

pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    let (intercept, coefficients, rank_deficient) = solve_centered(x, y, 0.0)?;
    Ok(LinearModel {
        kind: LinearKind::Ols,
        alpha: None,
        intercept,
        coefficients,
        rank_deficient,
    })
}

pub fn fit_ridge(x: &Matrix, y: &[f64], alpha: f64) -> Result<LinearModel> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("ridge alpha must be finite and >= 0, got {alpha}")));
    }
    let (intercept, coefficients, rank_deficient) = solve_centered(x, y, alpha)?;
    Ok(LinearModel {
        kind: LinearKind::Ridge,
        alpha: Some(alpha),
        intercept,
        coefficients,
        rank_deficient,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Minimize ||yc - Xc b||^2 + alpha ||b||^2 on centered data; the intercept
/// is recovered from the means.
fn solve_centered(x: &Matrix, y: &[f64], alpha: f64) -> Result<(f64, Vec<f64>, bool)> {
    check_shape(x, y)?;
    x.ensure_finite("feature matrix")?;
    ensure_finite_target(y)?;
    let n = x.n_rows();
    let p = x.n_cols();
    let y_mean = mean(y);
    if p == 0 {
        return Ok((y_mean, Vec::new(), false));
    }
    let x_means: Vec<f64> = x.columns().iter().map(|c| mean(c)).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = xc.svd(true, true);
    let u = svd.u.as_ref().expect("thin U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = s_max * (n.max(p) as f64) * f64::EPSILON;

    let mut beta = DVector::zeros(p);
    let mut rank_deficient = false;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            rank_deficient = true;
            continue;
        }
        let proj = u.column(k).dot(&yc);
        let scale = s / (s * s + alpha) * proj;
        beta += v_t.row(k).transpose() * scale;
    }
    if svd.singular_values.len() < p {
        rank_deficient = true;
    }
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_means).map(|(b, m)| b * m).sum::<f64>();
    Ok((intercept, coefficients, rank_deficient))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_matrix(x: &[f64]) -> Matrix {
        Matrix::from_columns(vec![x.to_vec()]).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let m = fit_ols(&column_matrix(&x), &y).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((m.intercept - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_target() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 3.0], vec![4.0, 1.0]]).unwrap();
        let m = fit_ols(&x, &[2.5; 3]).unwrap();
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-12));
        assert!((m.intercept - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ridge_one_feature_closed_form() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y = [2.0, 1.0, 5.0, 6.0];
        let xm = x.iter().sum::<f64>() / 4.0;
        let ym = y.iter().sum::<f64>() / 4.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
        let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
        let m = fit_ridge(&column_matrix(&x), &y, 1.0).unwrap();
        assert!((m.coefficients[0] - sxy / (sxx + 1.0)).abs() < 1e-12);
        assert!((m.intercept - (ym - m.coefficients[0] * xm)).abs() < 1e-12);
    }

    #[test]
    fn huge_penalty_shrinks_to_mean() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 3.0], vec![5.0, 1.0]]).unwrap();
        let y = [1.0, 4.0, 2.0, 9.0];
        let m = fit_ridge(&x, &y, 1e12).unwrap();
        let norm = m.coefficients.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(norm < 1e-6);
        assert!((m.intercept - 4.0).abs() < 1e-5);
    }

    #[test]
    fn duplicated_column_gives_minimum_norm() {
        let a: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let y: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let x = Matrix::from_columns(vec![a.clone(), a]).unwrap();
        let m = fit_ols(&x, &y).unwrap();
        assert!(m.rank_deficient);
        assert!((m.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite() {
        let x = column_matrix(&[1.0, f64::NAN]);
        assert!(matches!(fit_ols(&x, &[1.0, 2.0]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn predict_checks_dimension() {
        let m = LinearModel {
            kind: LinearKind::Ols,
            alpha: None,
            intercept: 1.0,
            coefficients: vec![2.0],
            rank_deficient: false,
        };
        assert_eq!(m.predict(&column_matrix(&[3.0])).unwrap(), vec![7.0]);
        let wide = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(m.predict(&wide), Err(Error::DimensionMismatch { .. })));
    }
}
