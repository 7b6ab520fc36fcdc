//! Dense classical solvers (null-space method, direct elimination, augmented
//! system) and pseudoinverse oracles, for cross-checking at desk scale.

use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::lu::lu_solve;
use crate::linalg::qr::solve_upper;
use crate::linalg::vecops::{norm2, sub};
use crate::linalg::{dense_pinv, dense_qr, default_rank_tol, null_basis, DenseMatrix};
use crate::problem::LseProblem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptions {
    /// Largest `m + n + p` accepted before densifying.
    pub size_cap: usize,
    /// Relative rank tolerance; `None` means `max(rows, cols)·ε`.
    pub rank_tol: Option<f64>,
    /// `Cx = d` counts as consistent when `||C C^† d − d|| ≤ consistency_tol · ||d||`.
    pub consistency_tol: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            size_cap: 5000,
            rank_tol: None,
            consistency_tol: 1e-8,
        }
    }
}

impl ReferenceOptions {
    fn rank_tol(&self, m: &DenseMatrix) -> f64 {
        self.rank_tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()))
    }

    fn check_size(&self, p: &LseProblem) -> Result<()> {
        let dim = p.m() + p.n() + p.p();
        if dim > self.size_cap {
            return Err(LseError::TooLarge { dim, cap: self.size_cap });
        }
        Ok(())
    }
}

/// Pivoted-QR view of `C`: a least-squares solution of `Cx = d` and the rank.
struct ConstraintQr {
    qr: crate::linalg::QrDecomposition,
    rank: usize,
}

impl ConstraintQr {
    fn new(c: &DenseMatrix, rank_tol: f64) -> Self {
        let qr = dense_qr(c, true);
        let rank = qr.rank(rank_tol);
        ConstraintQr { qr, rank }
    }

    /// `P (R₁₁⁻¹ Q₁ᵀ d; 0)`
    fn basic_solution(&self, d: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let n = self.qr.perm.len();
        let keep: Vec<usize> = (0..r).collect();
        let q1 = self.qr.q.select_cols(&keep);
        let r11 = self.qr.r.select_rows(&keep).select_cols(&keep);
        let y = solve_upper(&r11, &q1.tmul_vec(d));
        let mut x = vec![0.0; n];
        for (j, yj) in y.into_iter().enumerate() {
            x[self.qr.perm[j]] = yj;
        }
        x
    }
}

fn check_consistency(c: &DenseMatrix, x0: &[f64], d: &[f64], tol: f64) -> Result<()> {
    let residual = norm2(&sub(&c.mul_vec(x0), d));
    let d_norm = norm2(d);
    if residual > tol * d_norm {
        return Err(LseError::InconsistentConstraints { residual, d_norm });
    }
    Ok(())
}

/// Null-space method: `x = x₀ + Z y`, `y = (AZ)^† (b − A x₀)`, with `x₀ ⟂ N(C)`
/// so the result is the minimum-norm solution.
pub fn solve_nullspace(p: &LseProblem, opts: &ReferenceOptions) -> Result<Vec<f64>> {
    opts.check_size(p)?;
    let a = p.a.to_dense();
    let c = p.c.to_dense();
    let tol = opts.rank_tol(&c);
    let cqr = ConstraintQr::new(&c, tol);
    let mut x = cqr.basic_solution(&p.d);
    check_consistency(&c, &x, &p.d, opts.consistency_tol)?;

    let z = null_basis(&c, tol)?;
    // remove the N(C) component so x₀ = C^† d
    let zx = z.tmul_vec(&x);
    for (xi, v) in x.iter_mut().zip(z.mul_vec(&zx)) {
        *xi -= v;
    }
    if z.ncols() == 0 {
        return Ok(x);
    }
    let az = a.matmul(&z);
    let rhs = sub(&p.b, &a.mul_vec(&x));
    let y = dense_pinv(&az, opts.rank_tol(&az))?.mul_vec(&rhs);
    for (xi, v) in x.iter_mut().zip(z.mul_vec(&y)) {
        *xi += v;
    }
    Ok(x)
}

/// Direct elimination: `C P = Q [R₁ R₂]`, eliminate `y₁ = R₁⁻¹(Qᵀd − R₂y₂)` and solve
/// `min ||Ã y₂ − (b − A₁R₁⁻¹Qᵀd)||` with `Ã = A₂ − A₁R₁⁻¹R₂`. Needs full row rank `C`.
pub fn solve_direct_elim(p: &LseProblem, opts: &ReferenceOptions) -> Result<Vec<f64>> {
    opts.check_size(p)?;
    let a = p.a.to_dense();
    let c = p.c.to_dense();
    let rows = c.nrows();
    let cqr = ConstraintQr::new(&c, opts.rank_tol(&c));
    if cqr.rank < rows {
        check_consistency(&c, &cqr.basic_solution(&p.d), &p.d, opts.consistency_tol)?;
        return Err(LseError::RankDeficientConstraints { rank: cqr.rank, rows });
    }
    let n = p.n();
    let perm = &cqr.qr.perm;
    let first: Vec<usize> = (0..rows).collect();
    let rest: Vec<usize> = (rows..n).collect();
    let r1 = cqr.qr.r.select_cols(&first);
    let r2 = cqr.qr.r.select_cols(&rest);
    let qtd = cqr.qr.q.tmul_vec(&p.d);
    let ap = a.select_cols(perm);
    let a1 = ap.select_cols(&first);
    let a2 = ap.select_cols(&rest);

    // R₁⁻¹ [R₂ | Qᵀd], column by column
    let r1_qtd = solve_upper(&r1, &qtd);
    let mut r1_r2 = DenseMatrix::zeros(rows, rest.len());
    for j in 0..rest.len() {
        r1_r2.col_mut(j).copy_from_slice(&solve_upper(&r1, r2.col(j)));
    }
    let y2 = if rest.is_empty() {
        Vec::new()
    } else {
        let a_tilde = a2.sub(&a1.matmul(&r1_r2));
        let rhs = sub(&p.b, &a1.mul_vec(&r1_qtd));
        dense_pinv(&a_tilde, opts.rank_tol(&a_tilde))?.mul_vec(&rhs)
    };
    let y1 = sub(&r1_qtd, &r1_r2.mul_vec(&y2));
    let mut x = vec![0.0; n];
    for (j, v) in y1.into_iter().chain(y2).enumerate() {
        x[perm[j]] = v;
    }
    Ok(x)
}

/// Solution of the augmented system, residual `r = b − Ax` and multipliers `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSolution {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Solves
///
/// ```text
/// [ 0  Aᵀ  Cᵀ ] [x]   [0]
/// [ A  I   0  ] [r] = [b]
/// [ C  0   0  ] [λ]   [d]
/// ```
///
/// by LU with partial pivoting.
pub fn solve_augmented(p: &LseProblem, opts: &ReferenceOptions) -> Result<AugmentedSolution> {
    opts.check_size(p)?;
    let (m, n, pc) = (p.m(), p.n(), p.p());
    let size = m + n + pc;
    let mut k = DenseMatrix::zeros(size, size);
    for (i, j, v) in p.a.triplets() {
        k[(n + i, j)] = v;
        k[(j, n + i)] = v;
    }
    for (i, j, v) in p.c.triplets() {
        k[(n + m + i, j)] = v;
        k[(j, n + m + i)] = v;
    }
    for i in 0..m {
        k[(n + i, n + i)] = 1.0;
    }
    let mut rhs = vec![0.0; size];
    rhs[n..n + m].copy_from_slice(&p.b);
    rhs[n + m..].copy_from_slice(&p.d);
    let sol = lu_solve(&k, &rhs)?;
    Ok(AugmentedSolution {
        x: sol[..n].to_vec(),
        r: sol[n..n + m].to_vec(),
        lambda: sol[n + m..].to_vec(),
    })
}

/// `K_L^† g = (I − (L P_{N(K)})^† L) K^† g`, the minimum-norm minimizer of
/// `||Lx||` over the minimizers of `||Kx − g||`.
pub fn weighted_pinv_apply(k: &DenseMatrix, l: &DenseMatrix, g: &[f64]) -> Result<Vec<f64>> {
    if k.ncols() != l.ncols() {
        return Err(LseError::mismatch("columns of L vs K", k.ncols(), l.ncols()));
    }
    if g.len() != k.nrows() {
        return Err(LseError::mismatch("length of g vs rows of K", k.nrows(), g.len()));
    }
    let kg = dense_pinv(k, default_rank_tol(k.nrows(), k.ncols()))?.mul_vec(g);
    let w = null_basis(k, default_rank_tol(k.nrows(), k.ncols()))?;
    if w.ncols() == 0 {
        return Ok(kg);
    }
    let lp = l.matmul(&w.matmul(&w.transpose()));
    let corr = dense_pinv(&lp, default_rank_tol(lp.nrows(), lp.ncols()))?.mul_vec(&l.mul_vec(&kg));
    Ok(sub(&kg, &corr))
}

/// `A_{N(C)}^† b = W (AW)^† b` with `W` an orthonormal basis of `N(C)`.
pub fn null_restricted_pinv_apply(a: &DenseMatrix, c: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.ncols() != c.ncols() {
        return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
    }
    let w = null_basis(c, default_rank_tol(c.nrows(), c.ncols()))?;
    if w.ncols() == 0 {
        return Ok(vec![0.0; a.ncols()]);
    }
    let aw = a.matmul(&w);
    let y = dense_pinv(&aw, default_rank_tol(aw.nrows(), aw.ncols()))?.mul_vec(b);
    Ok(w.mul_vec(&y))
}

/// The minimum-norm LSE solution `C_A^† d + A_{N(C)}^† b` by dense oracles.
pub fn lse_oracle(p: &LseProblem) -> Result<Vec<f64>> {
    let a = p.a.to_dense();
    let c = p.c.to_dense();
    let x1 = weighted_pinv_apply(&c, &a, &p.d)?;
    let x2 = null_restricted_pinv_apply(&a, &c, &p.b)?;
    Ok(x1.iter().zip(&x2).map(|(u, v)| u + v).collect())
}
