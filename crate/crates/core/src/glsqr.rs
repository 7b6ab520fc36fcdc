//! gLSQR: LSQR in the `G`-inner product, `G = AᵀA + CᵀC`, approximating the
//! weighted pseudoinverse solution `x₁ = C_A^† d`.
//!
//! The bidiagonalization is
//!
//! ```text
//! β₁u₁ = d,   α_i v_i = G^† Cᵀ u_i − β_i v_{i−1},   β_{i+1} u_{i+1} = C v_i − α_i u_i
//! ```
//!
//! with `u` normalized in the 2-norm and `v` in the `G`-norm. Every step needs
//! one inner least-squares solve for `G^† Cᵀ u`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::svd::bidiagonal_sigma_max;
use crate::linalg::vecops::{dot, norm2, scale};
use crate::linalg::{Counted, LinearOperator, SparseMatrix};
use crate::lsqr::{GramSolver, InnerSolverConfig};
use crate::problem::{ComponentSummary, ErrorTracker, IterationRecord, SolveReport, Termination};

const BREAKDOWN_REL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlsqrOptions {
    /// Outer stopping tolerance.
    pub tol: f64,
    /// Outer iteration cap; `None` means `2·max(p, n)`.
    pub max_outer: Option<usize>,
    /// Settings for the `G^† Cᵀ u` solves.
    pub inner: InnerSolverConfig,
    /// Full reorthogonalization of `u` (2-inner product) and `v` (`G`-inner product).
    pub reorthogonalize: bool,
    /// Keep `u_i`, `v_i` for inspection.
    pub store_basis: bool,
}

impl Default for GlsqrOptions {
    fn default() -> Self {
        GlsqrOptions {
            tol: 1e-10,
            max_outer: None,
            inner: InnerSolverConfig::default(),
            reorthogonalize: false,
            store_basis: false,
        }
    }
}

impl GlsqrOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(LseError::InvalidConfig(format!("tolerance must be >= 0, got {}", self.tol)));
        }
        if self.max_outer == Some(0) {
            return Err(LseError::InvalidConfig("max_outer must be >= 1".into()));
        }
        self.inner.validate()
    }
}

/// Basis vectors kept when requested; `av`/`cv` hold `A v_i`, `C v_i` for `G`-inner products.
#[derive(Clone, Debug, Default)]
pub struct GlsqrBasis {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    av: Vec<Vec<f64>>,
    cv: Vec<Vec<f64>>,
}

impl GlsqrBasis {
    /// `v_iᵀ G v_j`
    pub fn g_inner(&self, i: usize, j: usize) -> f64 {
        dot(&self.av[i], &self.av[j]) + dot(&self.cv[i], &self.cv[j])
    }
}

/// Iteration state of gLSQR.
pub struct Glsqr<'a> {
    gram: GramSolver<Counted<&'a SparseMatrix>, Counted<&'a SparseMatrix>>,
    opts: GlsqrOptions,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    x: Vec<f64>,
    alpha: f64,
    beta: f64,
    beta1: f64,
    phibar: f64,
    rhobar: f64,
    /// Bidiagonal entries: `alphas[i]` on the diagonal, `betas[i]` = β_{i+2} below it.
    alphas: Vec<f64>,
    betas: Vec<f64>,
    scale_est: f64,
    iteration: usize,
    residual: f64,
    last_inner: usize,
    terminated: Option<Termination>,
    basis: Option<GlsqrBasis>,
}

impl<'a> Glsqr<'a> {
    /// Starts the recursion from `β₁u₁ = d` and computes `α₁, v₁`.
    pub fn new(a: &'a SparseMatrix, c: &'a SparseMatrix, d: &[f64], opts: GlsqrOptions) -> Result<Self> {
        opts.validate()?;
        if a.ncols() != c.ncols() {
            return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
        }
        if d.len() != c.nrows() {
            return Err(LseError::mismatch("length of d vs rows of C", c.nrows(), d.len()));
        }
        let n = a.ncols();
        let gram = GramSolver::new(Counted::new(a), Counted::new(c), opts.inner)?;
        let keep = opts.store_basis || opts.reorthogonalize;
        let mut st = Glsqr {
            gram,
            opts,
            u: d.to_vec(),
            v: vec![0.0; n],
            w: vec![0.0; n],
            x: vec![0.0; n],
            alpha: 0.0,
            beta: 0.0,
            beta1: 0.0,
            phibar: 0.0,
            rhobar: 0.0,
            alphas: Vec::new(),
            betas: Vec::new(),
            scale_est: 0.0,
            iteration: 0,
            residual: 0.0,
            last_inner: 0,
            terminated: None,
            basis: keep.then(GlsqrBasis::default),
        };
        st.beta1 = norm2(d);
        st.beta = st.beta1;
        if st.beta1 == 0.0 {
            st.terminated = Some(Termination::ZeroRhs);
            return Ok(st);
        }
        scale(1.0 / st.beta1, &mut st.u);
        if let Some(basis) = st.basis.as_mut() {
            basis.u.push(st.u.clone());
        }
        let (s, a_s, c_s) = st.expand_v(None)?;
        st.alpha = g_norm(&a_s, &c_s);
        st.scale_est = st.alpha;
        // α₁ = 0 exactly when Cᵀd = 0; x = 0 is then the answer
        if !(st.alpha > 0.0) {
            st.terminated = Some(Termination::ImmediateBreakdown);
            return Ok(st);
        }
        st.accept_v(st.alpha, s, a_s, c_s);
        st.w.copy_from_slice(&st.v);
        st.phibar = st.beta1;
        st.rhobar = st.alpha;
        st.residual = 1.0;
        Ok(st)
    }

    /// `s = G^† Cᵀ u − β v_prev`, plus `As`, `Cs` for the `G`-norm.
    fn expand_v(&mut self, prev: Option<f64>) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (mut s, rep) = self.gram.solve(&self.u)?;
        self.last_inner = rep.iterations;
        if let Some(beta) = prev {
            for (si, vi) in s.iter_mut().zip(&self.v) {
                *si -= beta * vi;
            }
        }
        if self.opts.reorthogonalize {
            let basis = self.basis.as_ref().expect("basis kept when reorthogonalizing");
            for _ in 0..2 {
                let a_s = self.gram.a().apply_vec(&s);
                let c_s = self.gram.c().apply_vec(&s);
                for j in 0..basis.v.len() {
                    let h = dot(&basis.av[j], &a_s) + dot(&basis.cv[j], &c_s);
                    for (si, vj) in s.iter_mut().zip(&basis.v[j]) {
                        *si -= h * vj;
                    }
                }
            }
        }
        let a_s = self.gram.a().apply_vec(&s);
        let c_s = self.gram.c().apply_vec(&s);
        Ok((s, a_s, c_s))
    }

    fn accept_v(&mut self, alpha: f64, mut s: Vec<f64>, mut a_s: Vec<f64>, mut c_s: Vec<f64>) {
        let inv = 1.0 / alpha;
        scale(inv, &mut s);
        self.v = s;
        if let Some(basis) = self.basis.as_mut() {
            scale(inv, &mut a_s);
            scale(inv, &mut c_s);
            basis.v.push(self.v.clone());
            basis.av.push(a_s);
            basis.cv.push(c_s);
        }
    }

    /// One bidiagonalization step followed by the plane-rotation update of `x`.
    pub fn step(&mut self) -> Result<()> {
        if self.terminated.is_some() {
            return Ok(());
        }
        self.iteration += 1;
        let breakdown_tol = BREAKDOWN_REL * self.scale_est;

        // β_{i+1} u_{i+1} = C v_i − α_i u_i
        let mut r = self.gram.c().apply_vec(&self.v);
        for (ri, ui) in r.iter_mut().zip(&self.u) {
            *ri -= self.alpha * ui;
        }
        if self.opts.reorthogonalize {
            let basis = self.basis.as_ref().expect("basis kept when reorthogonalizing");
            for _ in 0..2 {
                for uj in &basis.u {
                    let h = dot(uj, &r);
                    for (ri, ujk) in r.iter_mut().zip(uj) {
                        *ri -= h * ujk;
                    }
                }
            }
        }
        let beta = norm2(&r);
        let mut alpha = 0.0;
        let beta_broke = beta <= breakdown_tol;
        self.last_inner = 0;
        if !beta_broke {
            self.u = r;
            scale(1.0 / beta, &mut self.u);
            if let Some(basis) = self.basis.as_mut() {
                basis.u.push(self.u.clone());
            }
            let (s, a_s, c_s) = self.expand_v(Some(beta))?;
            alpha = g_norm(&a_s, &c_s);
            if alpha > breakdown_tol {
                self.accept_v(alpha, s, a_s, c_s);
            }
        }
        self.beta = beta;
        self.scale_est = self.scale_est.max(beta).max(alpha);

        // rotation eliminating β_{i+1}
        let rho = self.rhobar.hypot(beta);
        let c = self.rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        self.rhobar = -c * alpha;
        let phi = c * self.phibar;
        self.phibar *= s;
        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((xi, wi), vi) in self.x.iter_mut().zip(self.w.iter_mut()).zip(&self.v) {
            *xi += t1 * *wi;
            *wi = vi + t2 * *wi;
        }
        self.alphas.push(self.alpha);
        self.betas.push(beta);
        self.alpha = alpha;

        // ||B_kᵀ(β₁e₁ − B_k y_k)|| = φ̄_{k+1} α_{k+1} |c_k|
        let sigma = bidiagonal_sigma_max(&self.alphas, &self.betas);
        let normal = self.phibar * alpha * c.abs();
        let rel_normal = if sigma > 0.0 { normal / (sigma * self.beta1) } else { 0.0 };
        let rel_res = self.phibar / self.beta1;
        self.residual = rel_normal;

        if beta_broke || alpha <= breakdown_tol {
            self.terminated = Some(Termination::ExactBreakdown);
        } else if rel_res <= self.opts.tol || rel_normal <= self.opts.tol {
            self.terminated = Some(Termination::Converged);
        }
        Ok(())
    }

    /// Steps until termination or the iteration cap, recording history.
    pub fn run(&mut self, tracker: Option<&ErrorTracker>) -> Result<Vec<IterationRecord>> {
        let cap = self.max_outer();
        let mut history = Vec::new();
        while self.terminated.is_none() && self.iteration < cap {
            self.step()?;
            history.push(self.record(tracker));
        }
        if self.terminated.is_none() {
            self.terminated = Some(Termination::MaxIterations);
        }
        Ok(history)
    }

    pub fn record(&self, tracker: Option<&ErrorTracker>) -> IterationRecord {
        IterationRecord {
            iter: self.iteration,
            error: tracker.map(|t| t.error(&self.x)),
            residual: self.residual,
            inner_iters: self.last_inner,
            matvecs: self.matvecs(),
        }
    }

    pub fn max_outer(&self) -> usize {
        let (p, n) = (self.gram.c().nrows(), self.gram.c().ncols());
        self.opts.max_outer.unwrap_or(2 * p.max(n).max(1))
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Relative stopping quantity after the last step.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn termination(&self) -> Option<Termination> {
        self.terminated
    }

    pub fn is_done(&self) -> bool {
        self.terminated.is_some() || self.iteration >= self.max_outer()
    }

    pub fn basis(&self) -> Option<&GlsqrBasis> {
        self.basis.as_ref()
    }

    pub fn inner_iterations(&self) -> usize {
        self.gram.total_inner_iterations()
    }

    /// Applications of A, Aᵀ, C, Cᵀ so far, inner solves included.
    pub fn matvecs(&self) -> usize {
        self.gram.a().count() + self.gram.c().count()
    }

    pub fn summary(&self) -> ComponentSummary {
        ComponentSummary {
            name: "glsqr".into(),
            termination: self.terminated.unwrap_or(Termination::MaxIterations),
            iterations: self.iteration,
            inner_iterations: self.inner_iterations(),
            matvecs: self.matvecs(),
            final_residual: self.residual,
        }
    }
}

/// `(sᵀGs)^½` from `As` and `Cs`, without forming `G`.
fn g_norm(a_s: &[f64], c_s: &[f64]) -> f64 {
    (dot(a_s, a_s) + dot(c_s, c_s)).sqrt()
}

/// Runs gLSQR to termination. `tracker` turns the history's error column on.
pub fn glsqr_solve(
    a: &SparseMatrix,
    c: &SparseMatrix,
    d: &[f64],
    opts: &GlsqrOptions,
    tracker: Option<&ErrorTracker>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut solver = Glsqr::new(a, c, d, *opts)?;
    let history = solver.run(tracker)?;
    log::info!(
        "glsqr: {:?} after {} iterations, residual {:.3e}",
        solver.termination(),
        solver.iteration(),
        solver.residual()
    );
    let summary = solver.summary();
    let n = a.ncols();
    let mut report = SolveReport::from_parts(solver.into_x(), vec![0.0; n]);
    report.history = history;
    report.termination = summary.termination;
    report.iterations = summary.iterations;
    report.inner_iterations = summary.inner_iterations;
    report.matvecs = summary.matvecs;
    report.components = vec![summary];
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
