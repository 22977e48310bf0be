//! Row-major dense matrix, the carrier for points, gradients, and tangents.

use crate::error::{Result, RimError};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(RimError::InvalidValue(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(RimError::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
                context: "DenseMatrix::new",
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(RimError::InvalidValue(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(RimError::InvalidValue("no rows given".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(RimError::InvalidValue("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Constant matrix with every entry `v`.
    pub fn constant(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                sums[j] += v;
            }
        }
        sums
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn same_shape(&self, other: &DenseMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn check_same_shape(&self, other: &DenseMatrix, context: &'static str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(RimError::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
                context,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// self + s * other
    pub fn add_scaled(&self, s: f64, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "add_scaled")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "hadamard")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frob_inner(&self, other: &DenseMatrix) -> Result<f64> {
        self.check_same_shape(other, "frob_inner")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Dense matrix product, parallelized over rows when the `parallel`
    /// feature is enabled.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_matmul(other)?;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let cols = other.cols;
            let mut out = DenseMatrix::zeros(self.rows, cols);
            out.data
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, out_row)| self.matmul_row(other, i, out_row));
            Ok(out)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.matmul_serial(other)
        }
    }

    /// Sequential reference path for `matmul`.
    pub fn matmul_serial(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_matmul(other)?;
        let cols = other.cols;
        let mut out = DenseMatrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            let mut row = vec![0.0; cols];
            self.matmul_row(other, i, &mut row);
            out.data[i * cols..(i + 1) * cols].copy_from_slice(&row);
        }
        Ok(out)
    }

    fn check_matmul(&self, other: &DenseMatrix) -> Result<()> {
        if self.cols != other.rows {
            return Err(RimError::ShapeMismatch {
                expected: format!("{} rows", self.cols),
                got: format!("{} rows", other.rows),
                context: "matmul",
            });
        }
        Ok(())
    }

    #[inline]
    fn matmul_row(&self, other: &DenseMatrix, i: usize, out_row: &mut [f64]) {
        out_row.fill(0.0);
        let a_row = self.row(i);
        for (k, &a) in a_row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let b_row = other.row(k);
            for (j, &b) in b_row.iter().enumerate() {
                out_row[j] += a * b;
            }
        }
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(RimError::ShapeMismatch {
                expected: format!("vector of length {}", self.cols),
                got: format!("length {}", v.len()),
                context: "matvec",
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Spectral norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let na = self.to_na();
        na.singular_values().max()
    }

    pub fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn matmul_matches_serial() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let b = DenseMatrix::from_fn(3, 5, |i, j| (i as f64 - j as f64) * 0.5);
        let p = a.matmul(&b).unwrap();
        let q = a.matmul_serial(&b).unwrap();
        assert_eq!(p, q);
        // spot check against nalgebra
        let r = a.to_na() * b.to_na();
        for i in 0..4 {
            for j in 0..5 {
                assert_relative_eq!(p.get(i, j), r[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sums_and_norms() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row_sums(), vec![3.0, 7.0]);
        assert_eq!(m.col_sums(), vec![4.0, 6.0]);
        assert_relative_eq!(m.frob_norm(), (30.0_f64).sqrt());
    }
}
