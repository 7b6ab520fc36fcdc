//! Singular value decompositions at desk scale.
//!
//! Dense matrices go through one-sided (Hestenes) Jacobi, which gives
//! orthogonal right vectors to working precision and small singular values
//! to good relative accuracy. Bidiagonal matrices get a separate path:
//! bisection with Sturm counts on the zero-diagonal Golub–Kahan tridiagonal,
//! whose eigenvalues are ± the singular values. That path is O(n) per count
//! and handles the difference stencils at the sizes used for condition numbers.

use super::dense::DenseMatrix;
use super::vecops::{dot, norm2};
use crate::error::{LseError, Result};

const MAX_SWEEPS: usize = 80;

/// `M = U diag(s) V_thinᵀ`, sorted by decreasing singular value.
///
/// `s` has one entry per column of `M`; `v` is a full orthogonal `n×n` matrix,
/// so the trailing columns of `v` paired with zero singular values span `N(M)`.
/// Columns of `u` paired with zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Count of singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.sigma_max();
        self.s.iter().filter(|&&s| s > cut && s > 0.0).count()
    }
}

/// Default relative rank tolerance `max(m, n) · ε`.
pub fn default_rank_tol(nrows: usize, ncols: usize) -> f64 {
    nrows.max(ncols).max(1) as f64 * f64::EPSILON
}

pub fn jacobi_svd(m: &DenseMatrix) -> Result<Svd> {
    let (nr, nc) = (m.nrows(), m.ncols());
    if !m.is_finite() {
        return Err(LseError::NumericalFailure("SVD input contains NaN or Inf".into()));
    }
    let mut u = m.clone();
    let mut v = DenseMatrix::identity(nc);
    let tol = f64::EPSILON * (nr.max(1) as f64).sqrt();
    let mut converged = nc < 2;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        // squared column norms, refreshed each sweep and updated in closed form per rotation
        let mut sq: Vec<f64> = (0..nc).map(|j| dot(u.col(j), u.col(j))).collect();
        for i in 0..nc {
            for j in i + 1..nc {
                let (alpha, beta) = (sq[i], sq[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(u.col(i), u.col(j));
                if gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut u, i, j, c, s);
                rotate(&mut v, i, j, c, s);
                sq[i] = alpha - t * gamma;
                sq[j] = beta + t * gamma;
                // heavy cancellation leaves the closed form inaccurate: recompute
                for (k, before) in [(i, alpha), (j, beta)] {
                    if sq[k] < 0.1 * before {
                        sq[k] = dot(u.col(k), u.col(k));
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LseError::NumericalFailure(format!(
            "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut sigma: Vec<f64> = (0..nc).map(|j| norm2(u.col(j))).collect();
    let mut order: Vec<usize> = (0..nc).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut uu = DenseMatrix::zeros(nr, nc);
    let mut vv = DenseMatrix::zeros(nc, nc);
    for (k, &j) in order.iter().enumerate() {
        let sj = sigma[j];
        if sj > 0.0 {
            for (dst, src) in uu.col_mut(k).iter_mut().zip(u.col(j)) {
                *dst = src / sj;
            }
        }
        vv.col_mut(k).copy_from_slice(v.col(j));
    }
    sigma = order.iter().map(|&j| sigma[j]).collect();
    Ok(Svd { u: uu, s: sigma, v: vv })
}

fn rotate(m: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let (ci, cj) = m.two_cols_mut(i, j);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Singular values of an upper bidiagonal matrix (diagonal `diag`, superdiagonal `sup`).
///
/// The matrix is `k×k` when `sup.len() == k - 1` and `k×(k+1)` when
/// `sup.len() == k`. Returns values in decreasing order.
pub fn bidiagonal_singular_values(diag: &[f64], sup: &[f64]) -> Vec<f64> {
    let gk = GolubKahanTridiagonal::new(diag, sup);
    let k = diag.len();
    let n = gk.size();
    // the top k eigenvalues of the symmetric spectrum are the singular values
    (0..k).map(|i| gk.eigenvalue(n - 1 - i).max(0.0)).collect()
}

/// Largest singular value of an upper bidiagonal matrix.
pub fn bidiagonal_sigma_max(diag: &[f64], sup: &[f64]) -> f64 {
    if diag.is_empty() {
        return 0.0;
    }
    let gk = GolubKahanTridiagonal::new(diag, sup);
    gk.eigenvalue(gk.size() - 1).max(0.0)
}

/// `(σ_max, σ_min over σ > rel_tol·σ_max)` of an upper bidiagonal matrix.
pub fn bidiagonal_extreme_singular_values(diag: &[f64], sup: &[f64], rel_tol: f64) -> (f64, f64) {
    if diag.is_empty() {
        return (0.0, 0.0);
    }
    let gk = GolubKahanTridiagonal::new(diag, sup);
    let n = gk.size();
    let smax = gk.eigenvalue(n - 1).max(0.0);
    if smax == 0.0 {
        return (0.0, 0.0);
    }
    let cut = rel_tol * smax;
    let rank = n - gk.count_below(cut);
    let smin = gk.eigenvalue(n - rank);
    (smax, smin)
}

/// Symmetric tridiagonal with zero diagonal and off-diagonal `(d₀, e₀, d₁, e₁, …)`.
struct GolubKahanTridiagonal {
    offdiag_sq: Vec<f64>,
    bound: f64,
    pivmin: f64,
}

impl GolubKahanTridiagonal {
    fn new(diag: &[f64], sup: &[f64]) -> Self {
        assert!(
            sup.len() + 1 == diag.len() || sup.len() == diag.len(),
            "superdiagonal must have k-1 or k entries"
        );
        let mut off = Vec::with_capacity(diag.len() + sup.len());
        for (i, &d) in diag.iter().enumerate() {
            off.push(d);
            if let Some(&e) = sup.get(i) {
                off.push(e);
            }
        }
        let mut bound = 0.0_f64;
        for i in 0..=off.len() {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = off.get(i).map_or(0.0, |v| v.abs());
            bound = bound.max(left + right);
        }
        let offdiag_sq: Vec<f64> = off.iter().map(|v| v * v).collect();
        let max_sq = offdiag_sq.iter().fold(0.0_f64, |m, v| m.max(*v));
        let pivmin = f64::MIN_POSITIVE * max_sq.max(1.0);
        GolubKahanTridiagonal {
            offdiag_sq,
            bound,
            pivmin,
        }
    }

    fn size(&self) -> usize {
        self.offdiag_sq.len() + 1
    }

    /// Number of eigenvalues strictly below `x` (Sturm count of LDLᵀ pivots).
    fn count_below(&self, x: f64) -> usize {
        let mut q = -x;
        if q.abs() < self.pivmin {
            q = -self.pivmin;
        }
        let mut count = usize::from(q < 0.0);
        for &e2 in &self.offdiag_sq {
            q = -x - e2 / q;
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let mut lo = -self.bound - self.pivmin;
        let mut hi = self.bound + self.pivmin;
        for _ in 0..2200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
