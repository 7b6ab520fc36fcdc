#![allow(dead_code)]

use lse_core::linalg::vecops::norm2;
use lse_core::linalg::{dense_pinv, null_basis, DenseMatrix, SparseMatrix};
use lse_core::LseProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_col_major(rows, cols, randn(rng, rows * cols))
}

/// Random `rows×cols` matrix of the given rank.
pub fn random_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> DenseMatrix {
    if rank >= rows.min(cols) {
        return random_dense(rng, rows, cols);
    }
    random_dense(rng, rows, rank).matmul(&random_dense(rng, rank, cols))
}

pub fn sparse(m: &DenseMatrix) -> SparseMatrix {
    SparseMatrix::from_dense(m, 0.0)
}

pub fn problem(a: &DenseMatrix, c: &DenseMatrix, b: Vec<f64>, d: Vec<f64>) -> LseProblem {
    LseProblem::new(sparse(a), sparse(c), b, d).unwrap()
}

pub fn rel(x: &[f64], y: &[f64]) -> f64 {
    lse_core::linalg::vecops::rel_error(x, y)
}

/// `W (AW)^†` for an orthonormal null basis `W` of `C` (n×m).
pub fn null_restricted_pinv(a: &DenseMatrix, c: &DenseMatrix) -> DenseMatrix {
    let w = null_basis(c, 1e-12).unwrap();
    if w.ncols() == 0 {
        return DenseMatrix::zeros(a.ncols(), a.nrows());
    }
    w.matmul(&dense_pinv(&a.matmul(&w), 1e-12).unwrap())
}

/// Orthogonal projector `W Wᵀ` onto `N(C)`.
pub fn null_projector(c: &DenseMatrix) -> DenseMatrix {
    let w = null_basis(c, 1e-12).unwrap();
    w.matmul(&w.transpose())
}

pub fn mat_rel(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let s = y.frobenius_norm().max(x.frobenius_norm());
    let d = x.sub(y).frobenius_norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

pub fn norm(x: &[f64]) -> f64 {
    norm2(x)
}
