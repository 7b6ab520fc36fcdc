//! LSQR for `min ||Mx - f||` and the two inner least-squares solves of the
//! decomposed solvers: `G^† Cᵀ u` through the stacked operator `[C; A]`, and `C^† v`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::operator::materialize;
use crate::linalg::vecops::{norm2, scale};
use crate::linalg::{default_rank_tol, LinearOperator, MinNormSolver, StackedOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMode {
    /// LSQR on the operator.
    Iterative,
    /// One dense minimum-norm factorization, reused for every solve.
    DirectDense,
}

/// Settings for one family of inner least-squares solves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverConfig {
    /// Relative stopping tolerance (LSQR `atol = btol = tol`).
    pub tol: f64,
    /// Iteration cap; `None` means `4 · min(rows, cols)`.
    pub max_iters: Option<usize>,
    pub mode: InnerMode,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        InnerSolverConfig {
            tol: 1e-12,
            max_iters: None,
            mode: InnerMode::Iterative,
        }
    }
}

impl InnerSolverConfig {
    pub fn iterative(tol: f64) -> Self {
        InnerSolverConfig {
            tol,
            ..Default::default()
        }
    }

    pub fn direct() -> Self {
        InnerSolverConfig {
            tol: 0.0,
            max_iters: None,
            mode: InnerMode::DirectDense,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(LseError::InvalidConfig(format!("inner tolerance must be >= 0, got {}", self.tol)));
        }
        if self.max_iters == Some(0) {
            return Err(LseError::InvalidConfig("inner max_iters must be >= 1".into()));
        }
        Ok(())
    }

    fn cap(&self, nrows: usize, ncols: usize) -> usize {
        self.max_iters.unwrap_or_else(|| 4 * nrows.min(ncols).max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsqrStop {
    ZeroRhs,
    /// `||r|| <= tol (||f|| + ||M|| ||x||)`
    ResidualSmall,
    /// `||Mᵀ r|| <= tol ||M|| ||r||`
    NormalEquations,
    Breakdown,
    MaxIterations,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsqrReport {
    pub iterations: usize,
    pub stop: LsqrStop,
    pub residual_norm: f64,
    pub normal_residual_norm: f64,
    /// Frobenius-norm estimate of `M` from the bidiagonal entries.
    pub anorm: f64,
}

impl LsqrReport {
    pub fn converged(&self) -> bool {
        self.stop != LsqrStop::MaxIterations
    }
}

const BREAKDOWN_REL: f64 = 1e-14;

/// Minimum 2-norm solution of `min ||Mx - f||`.
///
/// In direct mode the operator is materialized and factored on every call;
/// use [`GramSolver`] / [`ConstraintSolver`] to keep the factor.
pub fn lsqr_solve<M: LinearOperator + ?Sized>(
    m: &M,
    f: &[f64],
    cfg: &InnerSolverConfig,
) -> Result<(Vec<f64>, LsqrReport)> {
    cfg.validate()?;
    if f.len() != m.nrows() {
        return Err(LseError::mismatch("lsqr right-hand side", m.nrows(), f.len()));
    }
    match cfg.mode {
        InnerMode::Iterative => Ok(lsqr_iterate(m, f, cfg)),
        InnerMode::DirectDense => {
            let dense = materialize(m);
            let solver = MinNormSolver::new(&dense, default_rank_tol(dense.nrows(), dense.ncols()))?;
            Ok((solver.solve(f), direct_report()))
        }
    }
}

fn direct_report() -> LsqrReport {
    LsqrReport {
        iterations: 0,
        stop: LsqrStop::Direct,
        residual_norm: f64::NAN,
        normal_residual_norm: f64::NAN,
        anorm: f64::NAN,
    }
}

fn lsqr_iterate<M: LinearOperator + ?Sized>(m: &M, f: &[f64], cfg: &InnerSolverConfig) -> (Vec<f64>, LsqrReport) {
    let n = m.ncols();
    let tol = cfg.tol;
    let max_iters = cfg.cap(m.nrows(), n);
    let mut x = vec![0.0; n];

    let mut u = f.to_vec();
    let mut beta = norm2(&u);
    let bnorm = beta;
    let mut report = LsqrReport {
        iterations: 0,
        stop: LsqrStop::ZeroRhs,
        residual_norm: 0.0,
        normal_residual_norm: 0.0,
        anorm: 0.0,
    };
    if beta == 0.0 {
        return (x, report);
    }
    scale(1.0 / beta, &mut u);
    let mut v = m.apply_transpose_vec(&u);
    let mut alpha = norm2(&v);
    report.residual_norm = beta;
    if alpha == 0.0 {
        // f is orthogonal to R(M): x = 0 is the minimum-norm solution
        report.stop = LsqrStop::Breakdown;
        return (x, report);
    }
    scale(1.0 / alpha, &mut v);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = 0.0;
    let mut mv = vec![0.0; m.nrows()];
    let mut mtu = vec![0.0; n];

    for it in 1..=max_iters {
        // bidiagonalization
        m.apply(&v, &mut mv);
        for (ui, mvi) in u.iter_mut().zip(&mv) {
            *ui = mvi - alpha * *ui;
        }
        beta = norm2(&u);
        anorm_sq += alpha * alpha + beta * beta;
        let anorm = anorm_sq.sqrt();
        let beta_broke = beta <= BREAKDOWN_REL * anorm;
        let alpha_next;
        if beta_broke {
            alpha_next = 0.0;
        } else {
            scale(1.0 / beta, &mut u);
            m.apply_transpose(&u, &mut mtu);
            for (vi, mi) in v.iter_mut().zip(&mtu) {
                *vi = mi - beta * *vi;
            }
            alpha_next = norm2(&v);
            if alpha_next > BREAKDOWN_REL * anorm {
                scale(1.0 / alpha_next, &mut v);
            }
        }

        // plane rotation
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha_next;
        rhobar = -c * alpha_next;
        let phi = c * phibar;
        phibar *= s;

        // update x, w
        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((xi, wi), vi) in x.iter_mut().zip(w.iter_mut()).zip(&v) {
            *xi += t1 * *wi;
            *wi = vi + t2 * *wi;
        }
        alpha = alpha_next;

        let rnorm = phibar.abs();
        let arnorm = (phibar * alpha * c).abs();
        let xnorm = norm2(&x);
        report.iterations = it;
        report.residual_norm = rnorm;
        report.normal_residual_norm = arnorm;
        report.anorm = anorm;

        if rnorm <= tol * (bnorm + anorm * xnorm) {
            report.stop = LsqrStop::ResidualSmall;
            return (x, report);
        }
        if rnorm > 0.0 && arnorm <= tol * anorm * rnorm {
            report.stop = LsqrStop::NormalEquations;
            return (x, report);
        }
        if beta_broke || alpha <= BREAKDOWN_REL * anorm {
            report.stop = LsqrStop::Breakdown;
            return (x, report);
        }
    }
    report.stop = LsqrStop::MaxIterations;
    (x, report)
}

/// Applies `G^† Cᵀ u` with `G = AᵀA + CᵀC`, via `min ||[C; A] x - (u; 0)||`.
///
/// Operators are held by value; pass references (or [`Counted`](crate::linalg::Counted)
/// wrappers) to share them.
pub struct GramSolver<A, C> {
    stacked: StackedOperator<C, A>,
    cfg: InnerSolverConfig,
    factor: OnceLock<MinNormSolver>,
    inner_iters: AtomicUsize,
}

impl<A: LinearOperator, C: LinearOperator> GramSolver<A, C> {
    pub fn new(a: A, c: C, cfg: InnerSolverConfig) -> Result<Self> {
        cfg.validate()?;
        if a.ncols() != c.ncols() {
            return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
        }
        Ok(GramSolver {
            stacked: StackedOperator::new(c, a),
            cfg,
            factor: OnceLock::new(),
            inner_iters: AtomicUsize::new(0),
        })
    }

    pub fn a(&self) -> &A {
        &self.stacked.bottom
    }

    pub fn c(&self) -> &C {
        &self.stacked.top
    }

    /// Returns the approximation and the LSQR report of this solve.
    pub fn solve(&self, u: &[f64]) -> Result<(Vec<f64>, LsqrReport)> {
        let p = self.stacked.top.nrows();
        if u.len() != p {
            return Err(LseError::mismatch("G-solve vector u", p, u.len()));
        }
        let mut rhs = vec![0.0; self.stacked.nrows()];
        rhs[..p].copy_from_slice(u);
        match self.cfg.mode {
            InnerMode::Iterative => {
                let (x, rep) = lsqr_iterate(&self.stacked, &rhs, &self.cfg);
                self.inner_iters.fetch_add(rep.iterations, Ordering::Relaxed);
                Ok((x, rep))
            }
            InnerMode::DirectDense => {
                let factor = get_or_factor(&self.factor, &self.stacked)?;
                Ok((factor.solve(&rhs), direct_report()))
            }
        }
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iters.load(Ordering::Relaxed)
    }
}

/// Applies `C^† v`, the minimum-norm solution of `min ||Cx - v||`.
pub struct ConstraintSolver<C> {
    c: C,
    cfg: InnerSolverConfig,
    factor: OnceLock<MinNormSolver>,
    inner_iters: AtomicUsize,
}

impl<C: LinearOperator> ConstraintSolver<C> {
    pub fn new(c: C, cfg: InnerSolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ConstraintSolver {
            c,
            cfg,
            factor: OnceLock::new(),
            inner_iters: AtomicUsize::new(0),
        })
    }

    pub fn c(&self) -> &C {
        &self.c
    }

    pub fn solve(&self, v: &[f64]) -> Result<(Vec<f64>, LsqrReport)> {
        if v.len() != self.c.nrows() {
            return Err(LseError::mismatch("C-solve vector", self.c.nrows(), v.len()));
        }
        match self.cfg.mode {
            InnerMode::Iterative => {
                let (x, rep) = lsqr_iterate(&self.c, v, &self.cfg);
                self.inner_iters.fetch_add(rep.iterations, Ordering::Relaxed);
                Ok((x, rep))
            }
            InnerMode::DirectDense => {
                let factor = get_or_factor(&self.factor, &self.c)?;
                Ok((factor.solve(v), direct_report()))
            }
        }
    }

    /// `C^† C y` and the inner iterations it took; the direct mode uses an
    /// orthonormal row-space basis, which is exact to roundoff in `||y||`.
    pub fn project_row_space(&self, y: &[f64]) -> Result<(Vec<f64>, usize)> {
        if y.len() != self.c.ncols() {
            return Err(LseError::mismatch("projected vector vs columns of C", self.c.ncols(), y.len()));
        }
        match self.cfg.mode {
            InnerMode::Iterative => {
                let (z, rep) = self.solve(&self.c.apply_vec(y))?;
                Ok((z, rep.iterations))
            }
            InnerMode::DirectDense => Ok((get_or_factor(&self.factor, &self.c)?.project_row_space(y), 0)),
        }
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.inner_iters.load(Ordering::Relaxed)
    }

    pub fn config(&self) -> &InnerSolverConfig {
        &self.cfg
    }
}

fn get_or_factor<'f, M: LinearOperator + ?Sized>(
    cell: &'f OnceLock<MinNormSolver>,
    op: &M,
) -> Result<&'f MinNormSolver> {
    if let Some(f) = cell.get() {
        return Ok(f);
    }
    let dense = materialize(op);
    let factor = MinNormSolver::new(&dense, default_rank_tol(dense.nrows(), dense.ncols()))?;
    Ok(cell.get_or_init(|| factor))
}

/// `G^† Cᵀ u` in one call.
pub fn solve_inner_g<A: LinearOperator, C: LinearOperator>(
    a: &A,
    c: &C,
    u: &[f64],
    cfg: &InnerSolverConfig,
) -> Result<Vec<f64>> {
    Ok(GramSolver::new(a, c, *cfg)?.solve(u)?.0)
}

/// `C^† v` in one call.
pub fn solve_inner_c<C: LinearOperator>(c: &C, v: &[f64], cfg: &InnerSolverConfig) -> Result<Vec<f64>> {
    Ok(ConstraintSolver::new(c, *cfg)?.solve(v)?.0)
}
