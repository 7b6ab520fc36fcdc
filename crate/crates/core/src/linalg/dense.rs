use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::vecops::{dot, norm2};

/// Column-major dense matrix used for desk-scale factorizations and oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Panics if `data.len() != nrows * ncols`.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "value count must be nrows * ncols");
        DenseMatrix { nrows, ncols, data }
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_columns<C: AsRef<[f64]>>(nrows: usize, cols: &[C]) -> Self {
        let mut data = Vec::with_capacity(nrows * cols.len());
        for c in cols {
            let c = c.as_ref();
            assert_eq!(c.len(), nrows, "column length mismatch");
            data.extend_from_slice(c);
        }
        DenseMatrix {
            nrows,
            ncols: cols.len(),
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Mutable access to two distinct columns at once.
    pub fn two_cols_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert!(a != b);
        let n = self.nrows;
        if a < b {
            let (lo, hi) = self.data.split_at_mut(b * n);
            (&mut lo[a * n..(a + 1) * n], &mut hi[..n])
        } else {
            let (lo, hi) = self.data.split_at_mut(a * n);
            let (bb, aa) = (&mut lo[b * n..(b + 1) * n], &mut hi[..n]);
            (aa, bb)
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// y = M x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, mij) in y.iter_mut().zip(self.col(j)) {
                    *yi += mij * xj;
                }
            }
        }
        y
    }

    /// y = Mᵀ x
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.col(j), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.nrows..(j + 1) * self.nrows];
            for (k, &okj) in oc.iter().enumerate() {
                if okj != 0.0 {
                    for (d, a) in dst.iter_mut().zip(self.col(k)) {
                        *d += a * okj;
                    }
                }
            }
        }
        out
    }

    /// Mᵀ · other without forming the transpose.
    pub fn tmatmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.nrows, other.nrows, "row counts differ");
        let mut out = Self::zeros(self.ncols, other.ncols);
        for j in 0..other.ncols {
            for i in 0..self.ncols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        DenseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn select_cols(&self, cols: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        DenseMatrix {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut out = Self::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            for (k, &i) in rows.iter().enumerate() {
                out[(k, j)] = self[(i, j)];
            }
        }
        out
    }

    /// Stacks `self` on top of `bottom`.
    pub fn vstack(&self, bottom: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, bottom.ncols);
        let nrows = self.nrows + bottom.nrows;
        let mut out = Self::zeros(nrows, self.ncols);
        for j in 0..self.ncols {
            let dst = out.col_mut(j);
            dst[..self.nrows].copy_from_slice(self.col(j));
            dst[self.nrows..].copy_from_slice(bottom.col(j));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}
