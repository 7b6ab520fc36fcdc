//! Krylov solvers for linear least squares with linear equality constraints.
//!
//! The minimum 2-norm solution of `min ||Ax - b||` over `{x : ||Cx - d|| = min}`
//! splits into `C_A^† d + A_{N(C)}^† b` (the weighted pseudoinverse of `C`
//! applied to `d`, plus the null-space-restricted least-squares solution) or,
//! equivalently, `C^† d + A_{N(C)}^† (b - A C^† d)`. [`glsqr`] and [`nsr`]
//! approximate the two pieces with Golub–Kahan recursions; [`kids`] assembles
//! them. [`reference`] holds dense classical solvers for cross-checking and
//! [`testgen`] builds problems with known solutions.

pub mod error;
pub mod glsqr;
pub mod kids;
pub mod linalg;
pub mod lsqr;
pub mod nsr;
pub mod problem;
pub mod reference;
pub mod testgen;

pub use error::{LseError, Result};
pub use linalg::{DenseMatrix, SparseMatrix};
pub use problem::{IterationRecord, LseProblem, SolveReport, Termination};
