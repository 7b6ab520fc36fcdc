//! Decomposed LSE solvers.
//!
//! * KIDS-I: `x = C_A^† d + A_{N(C)}^† b`, the two pieces from gLSQR and
//!   NSR-LSQR, independent of each other.
//! * KIDS-II: `x = C^† d + A_{N(C)}^† (b − A C^† d)`, strictly sequential.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::glsqr::{glsqr_solve, Glsqr, GlsqrOptions};
use crate::linalg::vecops::{add, norm2, sub};
use crate::linalg::{default_rank_tol, null_basis, Counted, DenseMatrix, LinearOperator};
use crate::lsqr::{ConstraintSolver, InnerSolverConfig, LsqrStop};
use crate::nsr::{nsr_lsqr_solve, NsrLsqr, NsrOptions};
use crate::problem::{ComponentSummary, ErrorTracker, IterationRecord, LseProblem, SolveReport, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KidsOptions {
    /// Outer tolerance for gLSQR and NSR-LSQR.
    pub tol: f64,
    /// Outer iteration cap per component; `None` uses each solver's default.
    pub max_outer: Option<usize>,
    /// Inner solves of gLSQR (`G^† Cᵀ u`) and of the NSR projector (`C^† C y`).
    pub inner: InnerSolverConfig,
    /// The `C^† d` solve of KIDS-II.
    pub cdagger: InnerSolverConfig,
    pub reorthogonalize: bool,
    pub reproject: bool,
    /// Run the two KIDS-I components on separate threads.
    pub parallel: bool,
}

impl Default for KidsOptions {
    fn default() -> Self {
        KidsOptions {
            tol: 1e-10,
            max_outer: None,
            inner: InnerSolverConfig::default(),
            cdagger: InnerSolverConfig::default(),
            reorthogonalize: false,
            reproject: false,
            parallel: false,
        }
    }
}

impl KidsOptions {
    pub fn glsqr(&self) -> GlsqrOptions {
        GlsqrOptions {
            tol: self.tol,
            max_outer: self.max_outer,
            inner: self.inner,
            reorthogonalize: self.reorthogonalize,
            store_basis: false,
        }
    }

    pub fn nsr(&self) -> NsrOptions {
        NsrOptions {
            tol: self.tol,
            max_outer: self.max_outer,
            inner: self.inner,
            reproject: self.reproject,
            store_basis: false,
        }
    }
}

fn combine(components: &[ComponentSummary]) -> Termination {
    if components.iter().any(|c| c.termination == Termination::MaxIterations) {
        Termination::MaxIterations
    } else if components.iter().all(|c| c.termination == Termination::ZeroRhs) {
        Termination::ZeroRhs
    } else {
        Termination::Converged
    }
}

fn check_truth(p: &LseProblem, truth: Option<&[f64]>) -> Result<()> {
    match truth {
        Some(t) if t.len() != p.n() => Err(LseError::mismatch("length of x_true", p.n(), t.len())),
        _ => Ok(()),
    }
}

/// KIDS-I. With `truth`, the history records the relative error of `x₁,k + x₂,k`.
pub fn kids1_solve(p: &LseProblem, opts: &KidsOptions, truth: Option<&[f64]>) -> Result<SolveReport> {
    check_truth(p, truth)?;
    let start = Instant::now();
    let mut report = if opts.parallel {
        kids1_parallel(p, opts, truth)?
    } else {
        kids1_lockstep(p, opts, truth)?
    };
    report.termination = combine(&report.components);
    report.iterations = report.components.iter().map(|c| c.iterations).max().unwrap_or(0);
    report.inner_iterations = report.components.iter().map(|c| c.inner_iterations).sum();
    report.matvecs = report.components.iter().map(|c| c.matvecs).sum();
    report.wall_time = start.elapsed().as_secs_f64();
    log::info!("kids1: {:?} after {} outer iterations", report.termination, report.iterations);
    Ok(report)
}

/// Alternates one gLSQR step and one NSR-LSQR step so each history row sees both iterates.
fn kids1_lockstep(p: &LseProblem, opts: &KidsOptions, truth: Option<&[f64]>) -> Result<SolveReport> {
    let comp = |name| move |e: LseError| e.in_component(name);
    let mut g = Glsqr::new(&p.a, &p.c, &p.d, opts.glsqr()).map_err(comp("glsqr"))?;
    let mut ns = NsrLsqr::new(&p.a, &p.c, &p.b, opts.nsr()).map_err(comp("nsr-lsqr"))?;
    let tracker = truth.map(ErrorTracker::relative_to);
    let mut history = Vec::new();
    let mut iter = 0;
    while !(g.is_done() && ns.is_done()) {
        iter += 1;
        let mut inner = 0;
        if !g.is_done() {
            g.step().map_err(comp("glsqr"))?;
            inner += g.record(None).inner_iters;
        }
        if !ns.is_done() {
            ns.step().map_err(comp("nsr-lsqr"))?;
            inner += ns.record(None).inner_iters;
        }
        let x = add(g.x(), ns.x());
        history.push(IterationRecord {
            iter,
            error: tracker.as_ref().map(|t| t.error(&x)),
            residual: g.residual().max(ns.residual()),
            inner_iters: inner,
            matvecs: g.matvecs() + ns.gkb().matvecs(),
        });
    }
    let components = vec![g.summary(), ns.summary()];
    let mut report = SolveReport::from_parts(g.into_x(), ns.into_x());
    report.history = history;
    report.components = components;
    Ok(report)
}

/// Runs the components on two threads and merges their histories afterwards; the
/// error column is only filled on the last row, since intermediate sums are not kept.
fn kids1_parallel(p: &LseProblem, opts: &KidsOptions, truth: Option<&[f64]>) -> Result<SolveReport> {
    let (gopts, nopts) = (opts.glsqr(), opts.nsr());
    let (r1, r2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| glsqr_solve(&p.a, &p.c, &p.d, &gopts, None));
        let h2 = s.spawn(|| nsr_lsqr_solve(&p.a, &p.c, &p.b, &nopts, None));
        (h1.join(), h2.join())
    });
    let r1 = r1
        .map_err(|_| LseError::NumericalFailure("glsqr thread panicked".into()))?
        .map_err(|e| e.in_component("glsqr"))?;
    let r2 = r2
        .map_err(|_| LseError::NumericalFailure("nsr-lsqr thread panicked".into()))?
        .map_err(|e| e.in_component("nsr-lsqr"))?;

    let len = r1.history.len().max(r2.history.len());
    let at = |h: &[IterationRecord], k: usize| h.get(k).or(h.last()).cloned();
    let mut history = Vec::with_capacity(len);
    for k in 0..len {
        let (a, b) = (at(&r1.history, k), at(&r2.history, k));
        let fresh = |h: &[IterationRecord], r: &Option<IterationRecord>| {
            if k < h.len() {
                r.as_ref().map_or(0, |r| r.inner_iters)
            } else {
                0
            }
        };
        history.push(IterationRecord {
            iter: k + 1,
            error: None,
            residual: a.as_ref().map_or(0.0, |r| r.residual).max(b.as_ref().map_or(0.0, |r| r.residual)),
            inner_iters: fresh(&r1.history, &a) + fresh(&r2.history, &b),
            matvecs: a.as_ref().map_or(0, |r| r.matvecs) + b.as_ref().map_or(0, |r| r.matvecs),
        });
    }
    let mut components = r1.components;
    components.extend(r2.components);
    let mut report = SolveReport::from_parts(r1.x1, r2.x2);
    if let (Some(t), Some(last)) = (truth, history.last_mut()) {
        last.error = Some(ErrorTracker::relative_to(t).error(&report.x));
    }
    report.history = history;
    report.components = components;
    Ok(report)
}

/// KIDS-II. With `truth`, the history records the relative error of `x̃₁ + x̃₂,k`.
pub fn kids2_solve(p: &LseProblem, opts: &KidsOptions, truth: Option<&[f64]>) -> Result<SolveReport> {
    check_truth(p, truth)?;
    let start = Instant::now();
    let c = Counted::new(&p.c);
    let cd = ConstraintSolver::new(&c, opts.cdagger).map_err(|e| e.in_component("cdagger"))?;
    let (x1, lrep) = cd.solve(&p.d).map_err(|e| e.in_component("cdagger"))?;
    let cd_termination = match lrep.stop {
        LsqrStop::ZeroRhs => Termination::ZeroRhs,
        LsqrStop::Direct => Termination::Direct,
        LsqrStop::Breakdown => Termination::ExactBreakdown,
        LsqrStop::MaxIterations => Termination::MaxIterations,
        LsqrStop::ResidualSmall | LsqrStop::NormalEquations => Termination::Converged,
    };
    let ax1 = p.a.apply_vec(&x1);
    let b_tilde = sub(&p.b, &ax1);
    let cd_summary = ComponentSummary {
        name: "cdagger".into(),
        termination: cd_termination,
        iterations: lrep.iterations,
        inner_iterations: 0,
        matvecs: c.count() + 1,
        final_residual: lrep.normal_residual_norm,
    };

    let tracker = truth.map(|t| ErrorTracker::new(sub(t, &x1), norm2(t)));
    let mut report =
        nsr_lsqr_solve(&p.a, &p.c, &b_tilde, &opts.nsr(), tracker.as_ref()).map_err(|e| e.in_component("nsr-lsqr"))?;
    for h in &mut report.history {
        h.matvecs += cd_summary.matvecs;
    }
    let x2 = std::mem::take(&mut report.x2);
    let mut out = SolveReport::from_parts(x1, x2);
    out.history = report.history;
    out.components = vec![cd_summary];
    out.components.extend(report.components);
    out.termination = combine(&out.components);
    out.iterations = report.iterations;
    out.inner_iterations = report.inner_iterations + lrep.iterations;
    out.matvecs = out.components.iter().map(|c| c.matvecs).sum();
    out.wall_time = start.elapsed().as_secs_f64();
    log::info!("kids2: {:?} after {} outer iterations", out.termination, out.iterations);
    Ok(out)
}

/// Optimality measures of a candidate LSE solution, each with the scale it should be compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityDiagnostics {
    /// `||Cᵀ(Cx − d)||`
    pub constraint_residual: f64,
    /// `||P_{N(C)} Aᵀ(Ax − b)||`
    pub projected_stationarity: f64,
    /// `||P_{N(A)∩N(C)} x||`
    pub min_norm_component: f64,
    /// `||C||_F (||C||_F ||x|| + ||d||)`
    pub constraint_scale: f64,
    /// `||A||_F (||A||_F ||x|| + ||b||)`
    pub stationarity_scale: f64,
    /// `||x||`
    pub solution_scale: f64,
}

impl OptimalityDiagnostics {
    /// The three measures divided by their scales (unscaled where a scale is zero).
    pub fn relative(&self) -> [f64; 3] {
        let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
        [
            rel(self.constraint_residual, self.constraint_scale),
            rel(self.projected_stationarity, self.stationarity_scale),
            rel(self.min_norm_component, self.solution_scale),
        ]
    }

    pub fn passes(&self, rtol: f64) -> bool {
        self.relative().iter().all(|&r| r <= rtol)
    }
}

/// Dense check of the optimality conditions; desk scale only.
pub fn check_optimality(p: &LseProblem, x: &[f64], rank_tol: Option<f64>) -> Result<OptimalityDiagnostics> {
    if x.len() != p.n() {
        return Err(LseError::mismatch("length of x", p.n(), x.len()));
    }
    let a = p.a.to_dense();
    let c = p.c.to_dense();
    let tol = |m: &DenseMatrix| rank_tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols()));

    let rc = sub(&c.mul_vec(x), &p.d);
    let constraint_residual = norm2(&c.tmul_vec(&rc));

    let w = null_basis(&c, tol(&c))?;
    let g = a.tmul_vec(&sub(&a.mul_vec(x), &p.b));
    let projected_stationarity = norm2(&w.tmul_vec(&g));

    let stacked = a.vstack(&c);
    let z = null_basis(&stacked, tol(&stacked))?;
    let min_norm_component = norm2(&z.tmul_vec(x));

    let xn = norm2(x);
    let (an, cn) = (a.frobenius_norm(), c.frobenius_norm());
    Ok(OptimalityDiagnostics {
        constraint_residual,
        projected_stationarity,
        min_norm_component,
        constraint_scale: cn * (cn * xn + norm2(&p.d)),
        stationarity_scale: an * (an * xn + norm2(&p.b)),
        solution_scale: xn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    fn two_var(b: Vec<f64>, d: Vec<f64>) -> LseProblem {
        let c = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[[1.0, 1.0]]), 0.0);
        LseProblem::new(SparseMatrix::identity(2), c, b, d).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn kids1_two_variable_instance() {
        let p = two_var(vec![1.0, 0.0], vec![2.0]);
        for parallel in [false, true] {
            let opts = KidsOptions {
                parallel,
                ..Default::default()
            };
            let rep = kids1_solve(&p, &opts, Some(&[1.5, 0.5])).unwrap();
            assert!(close(&rep.x, &[1.5, 0.5], 1e-10), "{:?}", rep.x);
            assert!(rep.converged());
            assert!(rep.history.last().unwrap().error.unwrap() < 1e-10);
        }
    }

    #[test]
    fn kids2_two_variable_instance() {
        let p = two_var(vec![1.0, 0.0], vec![2.0]);
        let rep = kids2_solve(&p, &KidsOptions::default(), None).unwrap();
        assert!(close(&rep.x1, &[1.0, 1.0], 1e-12));
        assert!(close(&rep.x2, &[0.5, -0.5], 1e-10));
        assert!(close(&rep.x, &[1.5, 0.5], 1e-10));
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = two_var(vec![0.0, 0.0], vec![0.0]);
        for rep in [
            kids1_solve(&p, &KidsOptions::default(), None).unwrap(),
            kids2_solve(&p, &KidsOptions::default(), None).unwrap(),
        ] {
            assert_eq!(rep.x, vec![0.0, 0.0]);
            assert_eq!(rep.termination, Termination::ZeroRhs);
        }
    }

    #[test]
    fn identity_constraints_fix_x() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[[3.0, 1.0], [0.0, 2.0]]), 0.0);
        let p = LseProblem::new(a, SparseMatrix::identity(2), vec![7.0, 1.0], vec![4.0, -2.0]).unwrap();
        let rep = kids2_solve(&p, &KidsOptions::default(), None).unwrap();
        assert!(close(&rep.x, &[4.0, -2.0], 1e-12), "{:?}", rep.x);
    }

    #[test]
    fn optimality_diagnostics() {
        let p = two_var(vec![1.0, 0.0], vec![2.0]);
        let d = check_optimality(&p, &[1.5, 0.5], None).unwrap();
        assert!(d.constraint_residual <= 1e-12 && d.projected_stationarity <= 1e-12 && d.min_norm_component <= 1e-12);
        assert!(d.passes(1e-12));
        let bad = check_optimality(&p, &[1.0, 0.0], None).unwrap();
        assert!(bad.constraint_residual > 1e-3 || bad.projected_stationarity > 1e-3);
        assert!(check_optimality(&p, &[1.0], None).is_err());
    }

    #[test]
    fn min_norm_diagnostic_sees_common_null_space() {
        // N(A) ∩ N(C) = span{e₂}
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[[1.0, 0.0]]), 0.0);
        let c = SparseMatrix::from_dense(&DenseMatrix::from_rows(&[[1.0, 0.0]]), 0.0);
        let p = LseProblem::new(a, c, vec![1.0], vec![1.0]).unwrap();
        let exact = check_optimality(&p, &[1.0, 0.0], None).unwrap();
        let shifted = check_optimality(&p, &[1.0, 1.0], None).unwrap();
        assert!(exact.min_norm_component < 1e-14);
        assert!((shifted.min_norm_component - 1.0).abs() < 1e-14);
        assert_eq!(shifted.constraint_residual, exact.constraint_residual);
        assert_eq!(shifted.projected_stationarity, exact.projected_stationarity);
    }
}
