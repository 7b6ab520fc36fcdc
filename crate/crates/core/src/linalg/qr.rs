use super::dense::DenseMatrix;
use super::vecops::{dot, norm2};

/// `M[:, perm] = Q R` with `Q` (m×k) orthonormal, `R` (k×n) upper triangular, k = min(m, n).
#[derive(Clone, Debug)]
pub struct QrDecomposition {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    /// Column `j` of `M·P` is column `perm[j]` of `M`.
    pub perm: Vec<usize>,
}

impl QrDecomposition {
    /// Number of diagonal entries of `R` above `rel_tol · |R₀₀|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let k = self.r.nrows().min(self.r.ncols());
        if k == 0 {
            return 0;
        }
        let r00 = self.r[(0, 0)].abs();
        (0..k).take_while(|&j| self.r[(j, j)].abs() > rel_tol * r00).count()
    }

    /// The permutation as a dense matrix `P` with `M P = Q R`.
    pub fn permutation_matrix(&self) -> DenseMatrix {
        let n = self.perm.len();
        let mut p = DenseMatrix::zeros(n, n);
        for (j, &pj) in self.perm.iter().enumerate() {
            p[(pj, j)] = 1.0;
        }
        p
    }
}

/// Householder QR, optionally with greedy column pivoting (largest remaining norm first).
pub fn dense_qr(m: &DenseMatrix, pivoting: bool) -> QrDecomposition {
    let (nr, nc) = (m.nrows(), m.ncols());
    let k = nr.min(nc);
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..nc).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        if pivoting {
            let best = (j..nc)
                .map(|c| (c, norm2(&a.col(c)[j..])))
                .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                .0;
            if best != j {
                let (x, y) = a.two_cols_mut(j, best);
                x.swap_with_slice(y);
                perm.swap(j, best);
            }
        }
        let x = &a.col(j)[j..];
        let xnorm = norm2(x);
        let mut v = x.to_vec();
        if xnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = norm2(&v);
        for vi in v.iter_mut() {
            *vi /= vnorm;
        }
        for c in j..nc {
            let col = &mut a.col_mut(c)[j..];
            let proj = 2.0 * dot(&v, col);
            for (ci, vi) in col.iter_mut().zip(&v) {
                *ci -= proj * vi;
            }
        }
        // exact zeros below the diagonal
        let col = a.col_mut(j);
        col[j] = alpha;
        col[j + 1..].fill(0.0);
        reflectors.push(v);
    }

    let mut r = DenseMatrix::zeros(k, nc);
    for c in 0..nc {
        for i in 0..k.min(c + 1) {
            r[(i, c)] = a[(i, c)];
        }
    }

    let mut q = DenseMatrix::zeros(nr, k);
    for i in 0..k {
        q[(i, i)] = 1.0;
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        if v.is_empty() {
            continue;
        }
        for c in 0..k {
            let col = &mut q.col_mut(c)[j..];
            let proj = 2.0 * dot(v, col);
            for (ci, vi) in col.iter_mut().zip(v) {
                *ci -= proj * vi;
            }
        }
    }

    QrDecomposition { q, r, perm }
}

/// Solves `R x = b` for the leading `n×n` upper-triangular block of `r`.
pub fn solve_upper(r: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}
