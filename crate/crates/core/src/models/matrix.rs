use crate::error::{Error, Result};

/// Dense feature matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    cols: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().find(|c| c.len() != n_rows) {
            return Err(Error::LengthMismatch {
                left: n_rows,
                right: bad.len(),
            });
        }
        Ok(Self { n_rows, cols })
    }

    /// Matrix with rows but no feature columns.
    pub fn empty_columns(n_rows: usize) -> Self {
        Self {
            n_rows,
            cols: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::with_capacity(rows.len()); p];
        for row in rows {
            if row.len() != p {
                return Err(Error::LengthMismatch {
                    left: p,
                    right: row.len(),
                });
            }
            for (c, &v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Ok(Self {
            n_rows: rows.len(),
            cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Matrix {
            n_rows: idx.len(),
            cols: self
                .cols
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix {
            n_rows: self.n_rows,
            cols: idx.iter().map(|&j| self.cols[j].clone()).collect(),
        }
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        for (j, c) in self.cols.iter().enumerate() {
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what, row: i, column: j });
            }
        }
        Ok(())
    }
}

pub(crate) fn ensure_finite_target(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            what: "target",
            row: i,
            column: 0,
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_shape(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    Ok(())
}
