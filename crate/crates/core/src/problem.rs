use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::vecops::{norm2, sub};
use crate::linalg::SparseMatrix;

/// `min ||Ax - b||` over the minimizers of `||Cx - d||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LseProblem {
    pub a: SparseMatrix,
    pub c: SparseMatrix,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
}

impl LseProblem {
    pub fn new(a: SparseMatrix, c: SparseMatrix, b: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if a.ncols() != c.ncols() {
            return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
        }
        if b.len() != a.nrows() {
            return Err(LseError::mismatch("length of b vs rows of A", a.nrows(), b.len()));
        }
        if d.len() != c.nrows() {
            return Err(LseError::mismatch("length of d vs rows of C", c.nrows(), d.len()));
        }
        if !b.iter().chain(&d).all(|v| v.is_finite()) || !a.is_finite() || !c.is_finite() {
            return Err(LseError::NumericalFailure("problem data contains NaN or Inf".into()));
        }
        Ok(LseProblem { a, c, b, d })
    }

    /// Rows of A.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Unknowns.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Rows of C.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
}

/// Why an iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Right-hand side was zero; the solution is zero.
    ZeroRhs,
    /// The first bidiagonalization scalar vanished; the solution is zero.
    ImmediateBreakdown,
    /// The Krylov subspace stopped growing; the iterate is exact up to rounding.
    ExactBreakdown,
    /// The stopping rule was met.
    Converged,
    /// Iteration cap reached before the stopping rule held.
    MaxIterations,
    /// Dense factorization, no iteration.
    Direct,
}

impl Termination {
    pub fn is_success(self) -> bool {
        self != Termination::MaxIterations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Relative error against a known solution, when one was supplied.
    pub error: Option<f64>,
    /// Relative residual quantity monitored by the stopping rule.
    pub residual: f64,
    /// Inner iterations spent in this outer iteration.
    pub inner_iters: usize,
    /// Cumulative operator applications (A, Aᵀ, C, Cᵀ) so far.
    pub matvecs: usize,
}

impl IterationRecord {
    pub fn error_or_residual(&self) -> f64 {
        self.error.unwrap_or(self.residual)
    }
}

/// Summary of one sub-solve inside a decomposed solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub name: String,
    pub termination: Termination,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub matvecs: usize,
    pub final_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub matvecs: usize,
    /// Seconds.
    pub wall_time: f64,
    pub components: Vec<ComponentSummary>,
}

impl SolveReport {
    /// Builds `x = x1 + x2`.
    pub fn from_parts(x1: Vec<f64>, x2: Vec<f64>) -> Self {
        let x = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        SolveReport {
            x,
            x1,
            x2,
            history: Vec::new(),
            termination: Termination::Converged,
            iterations: 0,
            inner_iterations: 0,
            matvecs: 0,
            wall_time: 0.0,
            components: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.termination.is_success()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.history.last().map(|h| h.residual)
    }
}

/// Relative-error bookkeeping for iterates of one component.
#[derive(Clone, Debug)]
pub struct ErrorTracker {
    target: Vec<f64>,
    scale: f64,
}

impl ErrorTracker {
    /// Errors measured as `||x - target|| / scale`.
    pub fn new(target: Vec<f64>, scale: f64) -> Self {
        ErrorTracker {
            target,
            scale: if scale > 0.0 { scale } else { 1.0 },
        }
    }

    /// Relative error against `truth`.
    pub fn relative_to(truth: &[f64]) -> Self {
        Self::new(truth.to_vec(), norm2(truth))
    }

    pub fn error(&self, x: &[f64]) -> f64 {
        norm2(&sub(x, &self.target)) / self.scale
    }
}
