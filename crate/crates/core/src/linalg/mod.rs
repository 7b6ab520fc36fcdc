//! Dense and sparse primitives, factorizations, and Matrix Market I/O.

pub mod dense;
pub mod givens;
pub mod lu;
pub mod mm;
pub mod operator;
pub mod pinv;
pub mod qr;
pub mod sparse;
pub mod svd;
pub mod vecops;

pub use dense::DenseMatrix;
pub use givens::GivensRotation;
pub use mm::{mm_read, mm_write, mm_write_matrix, mm_write_vector, read_matrix, read_vector, MmObject};
pub use operator::{Counted, LinearOperator, StackedOperator};
pub use pinv::{dense_pinv, null_basis, numerical_rank, pinv, MinNormSolver};
pub use qr::{dense_qr, QrDecomposition};
pub use sparse::SparseMatrix;
pub use svd::{default_rank_tol, jacobi_svd, Svd};

/// Null basis of a sparse matrix through its dense form.
pub fn null_basis_sparse(m: &SparseMatrix, rank_tol: f64) -> crate::Result<DenseMatrix> {
    null_basis(&m.to_dense(), rank_tol)
}
