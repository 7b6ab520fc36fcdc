//! `x.mtx`, `report.json` and `history.csv`.

use std::fs;
use std::path::Path;

use lse_core::kids::OptimalityDiagnostics;
use lse_core::linalg::mm_write_vector;
use lse_core::problem::ComponentSummary;
use lse_core::{IterationRecord, Termination};
use serde::Serialize;

use crate::{exit, Failure};

/// Keys shared by every method; method-specific data lives under `details`.
#[derive(Debug, Serialize)]
pub struct Report {
    pub method: &'static str,
    pub termination: Termination,
    pub converged: bool,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub matvecs: usize,
    pub wall_time: f64,
    pub final_residual: Option<f64>,
    pub relative_error: Option<f64>,
    pub dimensions: Dimensions,
    pub optimality: Option<Optimality>,
    pub details: Details,
}

#[derive(Debug, Serialize)]
pub struct Dimensions {
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Serialize)]
pub struct Optimality {
    #[serde(flatten)]
    pub raw: OptimalityDiagnostics,
    pub relative: [f64; 3],
}

impl From<OptimalityDiagnostics> for Optimality {
    fn from(raw: OptimalityDiagnostics) -> Self {
        Optimality {
            relative: raw.relative(),
            raw,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Details {
    Krylov {
        tol: f64,
        inner_tol: f64,
        inner_mode: &'static str,
        components: Vec<ComponentSummary>,
    },
    Reference {
        /// `||b − Ax||` for the augmented solver.
        residual_norm: Option<f64>,
        /// `||λ||` for the augmented solver.
        multiplier_norm: Option<f64>,
    },
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(exit::BAD_INPUT, format!("cannot write {}: {e}", path.display()))
}

pub fn write_all(dir: &Path, x: &[f64], report: &Report, history: &[IterationRecord]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    mm_write_vector(dir.join("x.mtx"), x)?;

    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(|e| io_failure(&path, e))?;

    let path = dir.join("history.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_failure(&path, e))?;
    w.write_record(["iter", "error_or_residual", "inner_iters", "cum_matvecs"])
        .map_err(|e| io_failure(&path, e))?;
    for h in history {
        w.serialize((h.iter, h.error_or_residual(), h.inner_iters, h.matvecs))
            .map_err(|e| io_failure(&path, e))?;
    }
    w.flush().map_err(|e| io_failure(&path, e))
}
