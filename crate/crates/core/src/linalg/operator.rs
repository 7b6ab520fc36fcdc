use std::sync::atomic::{AtomicUsize, Ordering};

use super::dense::DenseMatrix;
use super::sparse::SparseMatrix;

/// A real linear map that can be applied forwards and transposed.
///
/// Implementations may assume the slices have the operator's dimensions.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// y = M x
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// y = Mᵀ x
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply(x, &mut y);
        y
    }

    fn apply_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols()];
        self.apply_transpose(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_transpose(x, y)
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        SparseMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        SparseMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.mul_t_vec_into(x, y)
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        DenseMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        DenseMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.mul_vec(x));
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.tmul_vec(x));
    }
}

/// Dense copy of an operator, built column by column from `M e_j`.
pub fn materialize<T: LinearOperator + ?Sized>(op: &T) -> DenseMatrix {
    let (m, n) = (op.nrows(), op.ncols());
    let mut out = DenseMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, out.col_mut(j));
        e[j] = 0.0;
    }
    out
}

/// The vertically stacked operator `[top; bottom]`, applied without assembly.
#[derive(Clone, Copy, Debug)]
pub struct StackedOperator<T, B> {
    pub top: T,
    pub bottom: B,
}

impl<T: LinearOperator, B: LinearOperator> StackedOperator<T, B> {
    /// Panics when the column counts differ.
    pub fn new(top: T, bottom: B) -> Self {
        assert_eq!(top.ncols(), bottom.ncols(), "stacked blocks need equal column counts");
        StackedOperator { top, bottom }
    }
}

impl<T: LinearOperator, B: LinearOperator> LinearOperator for StackedOperator<T, B> {
    fn nrows(&self) -> usize {
        self.top.nrows() + self.bottom.nrows()
    }
    fn ncols(&self) -> usize {
        self.top.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (yt, yb) = y.split_at_mut(self.top.nrows());
        self.top.apply(x, yt);
        self.bottom.apply(x, yb);
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let (xt, xb) = x.split_at(self.top.nrows());
        self.top.apply_transpose(xt, y);
        let mut tmp = vec![0.0; y.len()];
        self.bottom.apply_transpose(xb, &mut tmp);
        for (a, b) in y.iter_mut().zip(tmp) {
            *a += b;
        }
    }
}

/// Wraps an operator and counts forward and transposed applications.
#[derive(Debug)]
pub struct Counted<T> {
    inner: T,
    count: AtomicUsize,
}

impl<T> Counted<T> {
    pub fn new(inner: T) -> Self {
        Counted {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: LinearOperator> LinearOperator for Counted<T> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_transpose(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacked_matches_assembled() {
        let top = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let bottom = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let s = StackedOperator::new(&top, &bottom);
        let full = top.vstack(&bottom).unwrap();
        assert_eq!(s.apply_vec(&[2.0, 3.0]), full.spmv(&[2.0, 3.0], false).unwrap());
        assert_eq!(s.apply_transpose_vec(&[1.0, 4.0]), full.spmv(&[1.0, 4.0], true).unwrap());
    }

    #[test]
    fn counted_tracks_both_directions() {
        let m = SparseMatrix::identity(3);
        let c = Counted::new(&m);
        c.apply_vec(&[1.0, 2.0, 3.0]);
        c.apply_transpose_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(c.count(), 2);
    }
}
