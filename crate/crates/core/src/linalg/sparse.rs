use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::vecops::norm2;
use crate::error::{LseError, Result};

/// Compressed sparse row matrix.
///
/// Row `i` owns the entries `row_ptr[i]..row_ptr[i + 1]` of `col_idx`/`values`;
/// column indices inside a row are strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(LseError::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(LseError::InvalidStructure(
                "row offsets do not match the entry count".into(),
            ));
        }
        if col_idx.len() != values.len() {
            return Err(LseError::InvalidStructure(
                "column index and value arrays differ in length".into(),
            ));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if lo > hi {
                return Err(LseError::InvalidStructure(format!("row {i} has negative length")));
            }
            let cols = &col_idx[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LseError::InvalidStructure(format!(
                    "column indices in row {i} are not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(LseError::InvalidStructure(format!(
                        "column index {c} out of bounds in row {i} (ncols = {ncols})"
                    )));
                }
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= nrows || j >= ncols {
                return Err(LseError::InvalidStructure(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(j);
            values.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_csr(nrows, ncols, row_ptr, col_idx, values)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Keeps entries with magnitude above `drop_tol`.
    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: m.nrows(),
            ncols: m.ncols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// y = M x (or Mᵀ x when `transpose`), with dimension checking.
    pub fn spmv(&self, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if transpose {
            if x.len() != self.nrows {
                return Err(LseError::mismatch("spmv (transposed)", self.nrows, x.len()));
            }
            let mut y = vec![0.0; self.ncols];
            self.mul_t_vec_into(x, &mut y);
            Ok(y)
        } else {
            if x.len() != self.ncols {
                return Err(LseError::mismatch("spmv", self.ncols, x.len()));
            }
            let mut y = vec![0.0; self.nrows];
            self.mul_vec_into(x, &mut y);
            Ok(y)
        }
    }

    /// y = M x. Panics on length mismatch.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.col_idx[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    /// y = Mᵀ x. Panics on length mismatch.
    pub fn mul_t_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for (&j, &v) in self.col_idx[lo..hi].iter().zip(&self.values[lo..hi]) {
                y[j] += v * xi;
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("transpose of a valid matrix")
    }

    /// Rows `rows` of the matrix, in the given order.
    pub fn select_rows(&self, rows: std::ops::Range<usize>) -> SparseMatrix {
        assert!(rows.end <= self.nrows);
        let lo = self.row_ptr[rows.start];
        let hi = self.row_ptr[rows.end];
        SparseMatrix {
            nrows: rows.len(),
            ncols: self.ncols,
            row_ptr: self.row_ptr[rows.start..=rows.end].iter().map(|p| p - lo).collect(),
            col_idx: self.col_idx[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }

    /// Stacks `self` on top of `bottom`.
    pub fn vstack(&self, bottom: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != bottom.ncols {
            return Err(LseError::mismatch("vstack columns", self.ncols, bottom.ncols));
        }
        let offset = self.nnz();
        let mut row_ptr = self.row_ptr.clone();
        row_ptr.extend(bottom.row_ptr[1..].iter().map(|p| p + offset));
        let mut col_idx = self.col_idx.clone();
        col_idx.extend_from_slice(&bottom.col_idx);
        let mut values = self.values.clone();
        values.extend_from_slice(&bottom.values);
        Ok(SparseMatrix {
            nrows: self.nrows + bottom.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
