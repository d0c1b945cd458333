use serde::{Deserialize, Serialize};

use super::ops::dot;
use crate::error::{Error, Result};

/// Dense row-major matrix. Vectors in a [`ParameterStore`](super::ParameterStore)
/// are stored as `n x 1` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::Shape {
                slot: "matrix".into(),
                expected: (rows, cols),
                found: (values.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn column_vector(values: Vec<f64>) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, x: f64) {
        self.values[r * self.cols + c] = x;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Adds column `c` into `out`.
    pub fn add_column_into(&self, c: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.values[r * self.cols + c];
        }
    }

    /// Adds `delta` into column `c`.
    pub fn add_to_column(&mut self, c: usize, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.rows);
        for (r, d) in delta.iter().enumerate() {
            self.values[r * self.cols + c] += d;
        }
    }

    /// `out += self * x`.
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.values[r * self.cols..(r + 1) * self.cols];
            *o += dot(row, x);
        }
    }

    /// `out += self^T * y`.
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &self.values[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }

    /// `self += a * b^T`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            let row = &mut self.values[r * self.cols..(r + 1) * self.cols];
            for (x, bc) in row.iter_mut().zip(b) {
                *x += ar * bc;
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}
