use super::dense::DenseMatrix;
use super::svd::{default_rank_tol, jacobi_svd, Svd};
use crate::error::{LseError, Result};

fn check_tol(rank_tol: f64) -> Result<()> {
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(LseError::InvalidConfig(format!("rank tolerance must be >= 0, got {rank_tol}")));
    }
    Ok(())
}

/// SVD of the matrix with fewer columns among `m` and `mᵀ`, and whether it was transposed.
fn svd_small_side(m: &DenseMatrix) -> Result<(Svd, bool)> {
    if m.nrows() < m.ncols() {
        Ok((jacobi_svd(&m.transpose())?, true))
    } else {
        Ok((jacobi_svd(m)?, false))
    }
}

/// Moore–Penrose pseudoinverse; singular values at or below `rank_tol · σ_max` are dropped.
pub fn dense_pinv(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    check_tol(rank_tol)?;
    let (svd, transposed) = svd_small_side(m)?;
    let r = svd.rank(rank_tol);
    // pinv(M) = V Σ⁻¹ Uᵀ; for the transposed factorization swap the roles of U and V
    let (left, right) = if transposed { (&svd.u, &svd.v) } else { (&svd.v, &svd.u) };
    let mut out = DenseMatrix::zeros(m.ncols(), m.nrows());
    for k in 0..r {
        let inv = 1.0 / svd.s[k];
        let lk = left.col(k);
        let rk = right.col(k);
        for (j, &rj) in rk.iter().enumerate() {
            let w = rj * inv;
            if w != 0.0 {
                for (o, &li) in out.col_mut(j).iter_mut().zip(lk) {
                    *o += li * w;
                }
            }
        }
    }
    Ok(out)
}

/// Pseudoinverse with the default rank tolerance.
pub fn pinv(m: &DenseMatrix) -> Result<DenseMatrix> {
    dense_pinv(m, default_rank_tol(m.nrows(), m.ncols()))
}

pub fn numerical_rank(m: &DenseMatrix, rank_tol: f64) -> Result<usize> {
    check_tol(rank_tol)?;
    Ok(svd_small_side(m)?.0.rank(rank_tol))
}

/// Orthonormal basis of `N(M)`, one column per null direction.
pub fn null_basis(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    check_tol(rank_tol)?;
    let svd = jacobi_svd(m)?;
    let r = svd.rank(rank_tol);
    let cols: Vec<usize> = (r..m.ncols()).collect();
    Ok(svd.v.select_cols(&cols))
}

/// Minimum 2-norm least-squares solver backed by a truncated SVD, factored once.
#[derive(Clone, Debug)]
pub struct MinNormSolver {
    /// `V_r Σ_r⁻¹` (n×r)
    left: DenseMatrix,
    /// `U_r` (m×r)
    right: DenseMatrix,
    /// `V_r` (n×r)
    row_basis: DenseMatrix,
    nrows: usize,
}

impl MinNormSolver {
    pub fn new(m: &DenseMatrix, rank_tol: f64) -> Result<Self> {
        check_tol(rank_tol)?;
        let (svd, transposed) = svd_small_side(m)?;
        let r = svd.rank(rank_tol);
        let (v, u) = if transposed { (&svd.u, &svd.v) } else { (&svd.v, &svd.u) };
        let keep: Vec<usize> = (0..r).collect();
        let row_basis = v.select_cols(&keep);
        let mut left = row_basis.clone();
        for k in 0..r {
            let inv = 1.0 / svd.s[k];
            left.col_mut(k).iter_mut().for_each(|x| *x *= inv);
        }
        Ok(MinNormSolver {
            left,
            right: u.select_cols(&keep),
            row_basis,
            nrows: m.nrows(),
        })
    }

    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    /// `M† f`
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.nrows);
        self.left.mul_vec(&self.right.tmul_vec(f))
    }

    /// `M†M y = V_r V_rᵀ y`, without the round trip through `M`.
    pub fn project_row_space(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.row_basis.nrows());
        self.row_basis.mul_vec(&self.row_basis.tmul_vec(y))
    }
}
