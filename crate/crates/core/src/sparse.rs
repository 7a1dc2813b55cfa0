//! Compressed sparse row storage for the constant system matrices `A_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseMatrix {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let dim = diag.len();
        SparseMatrix {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a square matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; exact zeros after summation are dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(i, j, v) in &sorted {
            if i >= dim || j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) outside a {dim}x{dim} matrix"
                )));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!("matrix entry ({i}, {j})")));
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        let keep: Vec<bool> = values.iter().map(|v| *v != Complex64::new(0.0, 0.0)).collect();
        let mut out_cols = Vec::with_capacity(col_idx.len());
        let mut out_vals = Vec::with_capacity(values.len());
        for (idx, &k) in keep.iter().enumerate() {
            if k {
                row_ptr[rows[idx] + 1] += 1;
                out_cols.push(col_idx[idx]);
                out_vals.push(values[idx]);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            dim,
            row_ptr,
            col_idx: out_cols,
            values: out_vals,
        })
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Result<Self> {
        check_len(m.nrows(), m.ncols())?;
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != Complex64::new(0.0, 0.0) {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), &trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `y += alpha · A x`.
    pub fn mul_vec_acc(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, a) in self.row(i) {
                acc += a * x[j];
            }
            *yi += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.dim, x.len())?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.mul_vec_acc(Complex64::new(1.0, 0.0), x, &mut y);
        Ok(y)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Largest entrywise deviation `|A - Aᴴ|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(
            3,
            &[(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (2, 2, c(1.0, 0.0)), (2, 2, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
        assert_eq!(m.get(2, 2), c(0.0, 0.0));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseMatrix::from_triplets(2, &[(2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SparseMatrix::from_triplets(
            2,
            &[(0, 0, c(1.0, 0.0)), (0, 1, c(0.0, 2.0)), (1, 0, c(-1.0, 0.5))],
        )
        .unwrap();
        let x = [c(1.0, 1.0), c(2.0, -1.0)];
        let y = m.mul_vec(&x).unwrap();
        let dense = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..2 {
            assert!((y[i] - dense[i]).norm() < 1e-15);
        }
        assert_eq!(SparseMatrix::from_dense(&m.to_dense()).unwrap(), m);
    }

    #[test]
    fn hermitian_check() {
        let h = SparseMatrix::from_triplets(2, &[(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))]).unwrap();
        assert_eq!(h.hermitian_defect(), 0.0);
        let s = SparseMatrix::from_triplets(2, &[(0, 1, c(0.0, 1.0))]).unwrap();
        assert_eq!(s.hermitian_defect(), 1.0);
    }
}
