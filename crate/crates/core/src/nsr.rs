//! Null-space-restricted Golub–Kahan bidiagonalization and the LSQR-type
//! solver built on it, approximating `x₂ = A_{N(C)}^† b`.
//!
//! ```text
//! δ₁p₁ = b,   γ_i q_i = P_{N(C)} Aᵀ p_i − δ_i q_{i−1},   δ_{i+1} p_{i+1} = A q_i − γ_i p_i
//! ```
//!
//! so that `A Q_k = P_{k+1} B_k` with `B_k` lower bidiagonal (γ on the diagonal,
//! δ below it) and every `q_i ∈ N(C)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::svd::bidiagonal_sigma_max;
use crate::linalg::vecops::{norm2, scale};
use crate::linalg::{Counted, LinearOperator, SparseMatrix};
use crate::lsqr::{ConstraintSolver, InnerSolverConfig};
use crate::problem::{ComponentSummary, ErrorTracker, IterationRecord, SolveReport, Termination};

const BREAKDOWN_REL: f64 = 1e-14;

/// `P_{N(C)} y = y − C^†(Cy)`.
pub struct NullProjector<C> {
    solver: ConstraintSolver<C>,
}

impl<C: LinearOperator> NullProjector<C> {
    pub fn new(c: C, cfg: InnerSolverConfig) -> Result<Self> {
        Ok(NullProjector {
            solver: ConstraintSolver::new(c, cfg)?,
        })
    }

    pub fn c(&self) -> &C {
        self.solver.c()
    }

    /// Returns the projection and the inner iterations it took.
    pub fn project(&self, y: &[f64]) -> Result<(Vec<f64>, usize)> {
        let (z, iters) = self.solver.project_row_space(y)?;
        Ok((y.iter().zip(&z).map(|(a, b)| a - b).collect(), iters))
    }

    pub fn inner_iterations(&self) -> usize {
        self.solver.total_inner_iterations()
    }
}

/// Project `y` onto `N(C)` in one call.
pub fn project_null(c: &SparseMatrix, y: &[f64], cfg: &InnerSolverConfig) -> Result<Vec<f64>> {
    Ok(NullProjector::new(c, *cfg)?.project(y)?.0)
}

/// The lower-bidiagonal `B_k`: `gammas` on the diagonal, `deltas` = δ₂..δ_{k+1}
/// below it; `delta1 = ||b||`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BidiagFactor {
    pub delta1: f64,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl BidiagFactor {
    /// Columns of `B_k` with both entries available.
    pub fn k(&self) -> usize {
        self.gammas.len().min(self.deltas.len())
    }

    /// Dense `(k+1)×k` form.
    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let k = self.k();
        let mut b = crate::linalg::DenseMatrix::zeros(k + 1, k);
        for i in 0..k {
            b[(i, i)] = self.gammas[i];
            b[(i + 1, i)] = self.deltas[i];
        }
        b
    }
}

/// `σ_max(B_k)`, the running estimate of `||A W||` for an orthonormal null basis `W` of `C`.
pub fn estimate_op_norm(factor: &BidiagFactor) -> f64 {
    let k = factor.k();
    if k == 0 {
        return 0.0;
    }
    // B_kᵀ is k×(k+1) upper bidiagonal with the same singular values
    bidiagonal_sigma_max(&factor.gammas[..k], &factor.deltas[..k])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsrOptions {
    /// Outer stopping tolerance on `||P_{N(C)} Aᵀ r_k|| / (||B_k|| ||b||)`.
    pub tol: f64,
    /// Outer iteration cap; `None` means `2·max(m, n)`.
    pub max_outer: Option<usize>,
    /// Settings for the `C^† (C y)` solves inside the projector.
    pub inner: InnerSolverConfig,
    /// Project each new `q` a second time to remove drift out of `N(C)`.
    pub reproject: bool,
    /// Keep `p_i`, `q_i` for inspection.
    pub store_basis: bool,
}

impl Default for NsrOptions {
    fn default() -> Self {
        NsrOptions {
            tol: 1e-10,
            max_outer: None,
            inner: InnerSolverConfig::default(),
            reproject: false,
            store_basis: false,
        }
    }
}

impl NsrOptions {
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

/// Outcome of one bidiagonalization step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkbStep {
    /// Both `δ_{i+1}` and `γ_{i+1}` are usable.
    Continued,
    /// `δ_{i+1}` vanished; `p_{i+1}`, `γ_{i+1}`, `q_{i+1}` were not formed.
    DeltaBreakdown,
    /// `γ_{i+1}` vanished; `q_{i+1}` was not formed.
    GammaBreakdown,
}

/// The null-space-restricted bidiagonalization on its own.
pub struct NsrGkb<'a> {
    a: Counted<&'a SparseMatrix>,
    proj: NullProjector<Counted<&'a SparseMatrix>>,
    reproject: bool,
    p: Vec<f64>,
    q: Vec<f64>,
    factor: BidiagFactor,
    scale_est: f64,
    last_inner: usize,
    terminated: Option<Termination>,
    p_basis: Option<Vec<Vec<f64>>>,
    q_basis: Option<Vec<Vec<f64>>>,
}

impl<'a> NsrGkb<'a> {
    /// Computes `δ₁, p₁, γ₁, q₁`.
    pub fn new(a: &'a SparseMatrix, c: &'a SparseMatrix, b: &[f64], opts: &NsrOptions) -> Result<Self> {
        opts.validate()?;
        if a.ncols() != c.ncols() {
            return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
        }
        if b.len() != a.nrows() {
            return Err(LseError::mismatch("length of b vs rows of A", a.nrows(), b.len()));
        }
        let mut gkb = NsrGkb {
            a: Counted::new(a),
            proj: NullProjector::new(Counted::new(c), opts.inner)?,
            reproject: opts.reproject,
            p: b.to_vec(),
            q: vec![0.0; a.ncols()],
            factor: BidiagFactor::default(),
            scale_est: 0.0,
            last_inner: 0,
            terminated: None,
            p_basis: opts.store_basis.then(Vec::new),
            q_basis: opts.store_basis.then(Vec::new),
        };
        let delta1 = norm2(b);
        gkb.factor.delta1 = delta1;
        if delta1 == 0.0 {
            gkb.terminated = Some(Termination::ZeroRhs);
            return Ok(gkb);
        }
        scale(1.0 / delta1, &mut gkb.p);
        if let Some(pb) = gkb.p_basis.as_mut() {
            pb.push(gkb.p.clone());
        }
        let atp = gkb.a.apply_transpose_vec(&gkb.p);
        let (s, inner) = gkb.project(&atp)?;
        gkb.last_inner = inner;
        let gamma = norm2(&s);
        if gamma <= BREAKDOWN_REL * norm2(&atp) || gamma == 0.0 {
            gkb.terminated = Some(Termination::ImmediateBreakdown);
            return Ok(gkb);
        }
        gkb.scale_est = gamma;
        gkb.factor.gammas.push(gamma);
        gkb.q = s;
        scale(1.0 / gamma, &mut gkb.q);
        if let Some(qb) = gkb.q_basis.as_mut() {
            qb.push(gkb.q.clone());
        }
        Ok(gkb)
    }

    fn project(&self, y: &[f64]) -> Result<(Vec<f64>, usize)> {
        let (mut s, mut inner) = self.proj.project(y)?;
        if self.reproject {
            let (s2, i2) = self.proj.project(&s)?;
            s = s2;
            inner += i2;
        }
        Ok((s, inner))
    }

    /// Extends the factor by `δ_{i+1}` and, unless that vanished, `γ_{i+1}`.
    pub fn step(&mut self) -> Result<GkbStep> {
        if self.terminated.is_some() {
            return Err(LseError::InvalidConfig("bidiagonalization already terminated".into()));
        }
        let gamma = *self.factor.gammas.last().expect("running state has γ₁");
        let tol = BREAKDOWN_REL * self.scale_est;
        self.last_inner = 0;

        let mut r = self.a.apply_vec(&self.q);
        for (ri, pi) in r.iter_mut().zip(&self.p) {
            *ri -= gamma * pi;
        }
        let delta = norm2(&r);
        self.factor.deltas.push(delta);
        self.scale_est = self.scale_est.max(delta);
        if delta <= tol {
            self.terminated = Some(Termination::ExactBreakdown);
            return Ok(GkbStep::DeltaBreakdown);
        }
        self.p = r;
        scale(1.0 / delta, &mut self.p);
        if let Some(pb) = self.p_basis.as_mut() {
            pb.push(self.p.clone());
        }

        let mut s = self.a.apply_transpose_vec(&self.p);
        let (ps, inner) = self.project(&s)?;
        self.last_inner = inner;
        s = ps;
        for (si, qi) in s.iter_mut().zip(&self.q) {
            *si -= delta * qi;
        }
        let gamma = norm2(&s);
        self.factor.gammas.push(gamma);
        self.scale_est = self.scale_est.max(gamma);
        if gamma <= tol {
            self.terminated = Some(Termination::ExactBreakdown);
            return Ok(GkbStep::GammaBreakdown);
        }
        self.q = s;
        scale(1.0 / gamma, &mut self.q);
        if let Some(qb) = self.q_basis.as_mut() {
            qb.push(self.q.clone());
        }
        Ok(GkbStep::Continued)
    }

    pub fn factor(&self) -> &BidiagFactor {
        &self.factor
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn termination(&self) -> Option<Termination> {
        self.terminated
    }

    pub fn p_basis(&self) -> Option<&[Vec<f64>]> {
        self.p_basis.as_deref()
    }

    pub fn q_basis(&self) -> Option<&[Vec<f64>]> {
        self.q_basis.as_deref()
    }

    pub fn inner_iterations(&self) -> usize {
        self.proj.inner_iterations()
    }

    pub fn matvecs(&self) -> usize {
        self.a.count() + self.proj.c().count()
    }
}

/// NSR-LSQR iteration state: the bidiagonalization plus the rotation-based
/// update of `x_k = Q_k y_k`, `y_k = argmin ||B_k y − δ₁e₁||`.
pub struct NsrLsqr<'a> {
    gkb: NsrGkb<'a>,
    opts: NsrOptions,
    x: Vec<f64>,
    z: Vec<f64>,
    phibar: f64,
    rhobar: f64,
    iteration: usize,
    cheap_residual: f64,
    residual: f64,
    terminated: Option<Termination>,
}

impl<'a> NsrLsqr<'a> {
    pub fn new(a: &'a SparseMatrix, c: &'a SparseMatrix, b: &[f64], opts: NsrOptions) -> Result<Self> {
        let gkb = NsrGkb::new(a, c, b, &opts)?;
        let n = a.ncols();
        let terminated = gkb.termination();
        let (z, rhobar) = match gkb.factor.gammas.first() {
            Some(&g) => (gkb.q.clone(), g),
            None => (vec![0.0; n], 0.0),
        };
        Ok(NsrLsqr {
            phibar: gkb.factor.delta1,
            gkb,
            opts,
            x: vec![0.0; n],
            z,
            rhobar,
            iteration: 0,
            cheap_residual: 0.0,
            residual: if terminated.is_some() { 0.0 } else { 1.0 },
            terminated,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        if self.terminated.is_some() {
            return Ok(());
        }
        self.iteration += 1;
        let outcome = self.gkb.step()?;
        let factor = &self.gkb.factor;
        let delta = *factor.deltas.last().expect("step pushes δ");
        let gamma_next = match outcome {
            GkbStep::DeltaBreakdown => 0.0,
            _ => *factor.gammas.last().expect("step pushes γ"),
        };
        let delta = if outcome == GkbStep::DeltaBreakdown { 0.0 } else { delta };

        let rho = self.rhobar.hypot(delta);
        let c = self.rhobar / rho;
        let s = delta / rho;
        let theta = s * gamma_next;
        self.rhobar = -c * gamma_next;
        let phi = c * self.phibar;
        self.phibar *= s;
        let t1 = phi / rho;
        let t2 = -theta / rho;
        let q_next: &[f64] = if outcome == GkbStep::Continued { &self.gkb.q } else { &[] };
        if q_next.is_empty() {
            for (xi, zi) in self.x.iter_mut().zip(&self.z) {
                *xi += t1 * zi;
            }
        } else {
            for ((xi, zi), qi) in self.x.iter_mut().zip(self.z.iter_mut()).zip(q_next) {
                *xi += t1 * *zi;
                *zi = qi + t2 * *zi;
            }
        }

        // ||P_{N(C)} Aᵀ r_k|| = γ_{k+1} δ_{k+1} |φ_k / ρ_k|
        self.cheap_residual = gamma_next * delta * t1.abs();
        let sigma = estimate_op_norm(&self.gkb.factor);
        self.residual = if sigma > 0.0 {
            self.cheap_residual / (sigma * self.gkb.factor.delta1)
        } else {
            0.0
        };
        if outcome != GkbStep::Continued {
            self.terminated = Some(Termination::ExactBreakdown);
        } else if self.residual <= self.opts.tol {
            self.terminated = Some(Termination::Converged);
        }
        Ok(())
    }

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
            inner_iters: self.gkb.last_inner,
            matvecs: self.gkb.matvecs(),
        }
    }

    pub fn max_outer(&self) -> usize {
        let a = self.gkb.a.inner();
        self.opts.max_outer.unwrap_or(2 * a.nrows().max(a.ncols()).max(1))
    }

    pub fn is_done(&self) -> bool {
        self.terminated.is_some() || self.iteration >= self.max_outer()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `γ_{k+1} δ_{k+1} |e_kᵀ y_k|` after the last step.
    pub fn cheap_residual(&self) -> f64 {
        self.cheap_residual
    }

    /// The relative stopping quantity after the last step.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn termination(&self) -> Option<Termination> {
        self.terminated
    }

    pub fn gkb(&self) -> &NsrGkb<'a> {
        &self.gkb
    }

    pub fn summary(&self) -> ComponentSummary {
        ComponentSummary {
            name: "nsr-lsqr".into(),
            termination: self.terminated.unwrap_or(Termination::MaxIterations),
            iterations: self.iteration,
            inner_iterations: self.gkb.inner_iterations(),
            matvecs: self.gkb.matvecs(),
            final_residual: self.residual,
        }
    }
}

/// Runs NSR-LSQR to termination.
pub fn nsr_lsqr_solve(
    a: &SparseMatrix,
    c: &SparseMatrix,
    b: &[f64],
    opts: &NsrOptions,
    tracker: Option<&ErrorTracker>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut solver = NsrLsqr::new(a, c, b, *opts)?;
    let history = solver.run(tracker)?;
    log::info!(
        "nsr-lsqr: {:?} after {} iterations, residual {:.3e}",
        solver.termination(),
        solver.iteration(),
        solver.residual()
    );
    let summary = solver.summary();
    let n = a.ncols();
    let mut report = SolveReport::from_parts(vec![0.0; n], solver.into_x());
    report.history = history;
    report.termination = summary.termination;
    report.iterations = summary.iterations;
    report.inner_iterations = summary.inner_iterations;
    report.matvecs = summary.matvecs;
    report.components = vec![summary];
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn sp(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&DenseMatrix::from_rows(rows), 0.0)
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn projector_examples() {
        let c = sp(&[&[1.0, 1.0]]);
        let cfg = InnerSolverConfig::default();
        let y = project_null(&c, &[1.0, 0.0], &cfg).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-14 && (y[1] + 0.5).abs() < 1e-14);
        let y = project_null(&c, &[1.0, -1.0], &cfg).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10 && (y[1] + 1.0).abs() < 1e-10);
        let y = project_null(&SparseMatrix::identity(3), &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert!(norm2(&y) < 1e-14);
    }

    #[test]
    fn gkb_hand_example() {
        let a = SparseMatrix::identity(2);
        let c = sp(&[&[1.0, 1.0]]);
        let opts = NsrOptions::default();
        let mut gkb = NsrGkb::new(&a, &c, &[1.0, 0.0], &opts).unwrap();
        assert_eq!(gkb.factor().delta1, 1.0);
        assert!((gkb.factor().gammas[0] - H).abs() < 1e-14);
        assert!((gkb.q()[0] - H).abs() < 1e-14 && (gkb.q()[1] + H).abs() < 1e-14);
        gkb.step().unwrap();
        assert!((gkb.factor().deltas[0] - H).abs() < 1e-14);
        assert!((estimate_op_norm(gkb.factor()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_terminates_immediately() {
        let a = SparseMatrix::identity(2);
        let c = sp(&[&[1.0, 1.0]]);
        let gkb = NsrGkb::new(&a, &c, &[0.0, 0.0], &NsrOptions::default()).unwrap();
        assert_eq!(gkb.termination(), Some(Termination::ZeroRhs));
        assert!(gkb.factor().gammas.is_empty());
    }

    #[test]
    fn solves_hand_example() {
        let a = SparseMatrix::identity(2);
        let c = sp(&[&[1.0, 1.0]]);
        let rep = nsr_lsqr_solve(&a, &c, &[1.0, 0.0], &NsrOptions::default(), None).unwrap();
        assert!((rep.x[0] - 0.5).abs() < 1e-12 && (rep.x[1] + 0.5).abs() < 1e-12, "{:?}", rep.x);
        assert!(rep.converged());
    }

    #[test]
    fn trivial_null_space_gives_zero() {
        let a = SparseMatrix::identity(2);
        let c = SparseMatrix::identity(2);
        let rep = nsr_lsqr_solve(&a, &c, &[1.0, 2.0], &NsrOptions::default(), None).unwrap();
        assert!(norm2(&rep.x) < 1e-14);
        assert_eq!(rep.termination, Termination::ImmediateBreakdown);
    }

    #[test]
    fn op_norm_of_single_column() {
        let f = BidiagFactor {
            delta1: 1.0,
            gammas: vec![3.0],
            deltas: vec![4.0],
        };
        assert!((estimate_op_norm(&f) - 5.0).abs() < 1e-13);
    }
}
