//! Row-major numeric tables and the (Y, X, z) dataset bundle.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::param(format!(
                "matrix of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (n, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::param(format!(
                    "row {n} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.cols..(n + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.cols..(n + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |n| self.row(n))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &n in idx {
            values.extend_from_slice(self.row(n));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Modifiable features `y` (graph nodes), non-modifiable covariates `x`
/// (gating inputs) and, for synthetic data, the generating component of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub y: DataMatrix,
    pub x: DataMatrix,
    /// Zero-based true component labels.
    pub z: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(y: DataMatrix, x: DataMatrix, z: Option<Vec<usize>>) -> Result<Self> {
        if y.rows() != x.rows() {
            return Err(Error::param(format!(
                "y has {} rows but x has {}",
                y.rows(),
                x.rows()
            )));
        }
        if let Some(z) = &z {
            if z.len() != y.rows() {
                return Err(Error::param(format!(
                    "label vector has {} entries for {} rows",
                    z.len(),
                    y.rows()
                )));
            }
        }
        Ok(Self { y, x, z })
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn m(&self) -> usize {
        self.y.cols()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            y: self.y.select_rows(idx),
            x: self.x.select_rows(idx),
            z: self.z.as_ref().map(|z| idx.iter().map(|&n| z[n]).collect()),
        }
    }

    /// Random train/test split; the test part holds `round(n * test_fraction)` rows
    /// (at least one, and at least one row stays in training).
    pub fn split<R: Rng + ?Sized>(&self, test_fraction: f64, rng: &mut R) -> Result<(Self, Self)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::param(format!(
                "test fraction must be in (0, 1), got {test_fraction}"
            )));
        }
        let n = self.n();
        if n < 2 {
            return Err(Error::param("need at least two rows to split"));
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}
