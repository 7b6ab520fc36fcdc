use super::dense::DenseMatrix;
use crate::error::{LseError, Result};

/// Solves the square system `K x = rhs` by Gaussian elimination with partial pivoting.
///
/// A pivot below `n · ε · max|K|` is reported as a singular system.
pub fn lu_solve(k: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(LseError::mismatch("lu_solve (square)", n, k.ncols()));
    }
    if rhs.len() != n {
        return Err(LseError::mismatch("lu_solve rhs", n, rhs.len()));
    }
    let mut a = k.clone();
    let mut b = rhs.to_vec();
    let scale = a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = n as f64 * f64::EPSILON * scale;

    for col in 0..n {
        let (piv_row, piv) = (col..n)
            .map(|i| (i, a[(i, col)].abs()))
            .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if piv <= threshold || scale == 0.0 {
            return Err(LseError::SingularSystem { pivot: piv, column: col });
        }
        if piv_row != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv_row, j)];
                a[(piv_row, j)] = tmp;
            }
            b.swap(col, piv_row);
        }
        let d = a[(col, col)];
        for i in col + 1..n {
            let f = a[(i, col)] / d;
            if f == 0.0 {
                continue;
            }
            a[(i, col)] = 0.0;
            for j in col + 1..n {
                let v = a[(col, j)];
                a[(i, j)] -= f * v;
            }
            b[i] -= f * b[col];
        }
    }
    Ok(super::qr::solve_upper(&a, &b))
}
