use std::time::Instant;

use lse_core::glsqr::{glsqr_solve, GlsqrOptions};
use lse_core::kids::{check_optimality, kids1_solve, kids2_solve, KidsOptions};
use lse_core::linalg::vecops::rel_error;
use lse_core::linalg::{read_matrix, read_vector};
use lse_core::lsqr::InnerSolverConfig;
use lse_core::nsr::{nsr_lsqr_solve, NsrOptions};
use lse_core::problem::ErrorTracker;
use lse_core::reference::{solve_augmented, solve_direct_elim, solve_nullspace, ReferenceOptions};
use lse_core::{LseError, LseProblem, SolveReport, Termination};

use crate::artifacts::{write_all, Details, Dimensions, Report};
use crate::{exit, CmdResult, Failure, InnerModeArg, Method, SolveArgs};

fn inner_config(args: &SolveArgs) -> InnerSolverConfig {
    match args.inner_mode {
        InnerModeArg::Lsqr => InnerSolverConfig::iterative(args.inner_tol),
        InnerModeArg::Direct => InnerSolverConfig::direct(),
    }
}

fn krylov(args: &SolveArgs, p: &LseProblem, truth: Option<&[f64]>) -> lse_core::Result<SolveReport> {
    let inner = inner_config(args);
    let kids = KidsOptions {
        tol: args.tol,
        max_outer: args.max_outer,
        inner,
        cdagger: inner,
        reorthogonalize: args.reorth,
        reproject: args.reproject,
        parallel: args.parallel,
    };
    match args.method {
        Method::Kids1 => kids1_solve(p, &kids, truth),
        Method::Kids2 => kids2_solve(p, &kids, truth),
        Method::Glsqr => {
            // tracks the C_A^† d component, which equals x† only when b = 0
            let opts = GlsqrOptions {
                tol: args.tol,
                max_outer: args.max_outer,
                inner,
                reorthogonalize: args.reorth,
                ..Default::default()
            };
            let tracker = truth.map(ErrorTracker::relative_to);
            glsqr_solve(&p.a, &p.c, &p.d, &opts, tracker.as_ref())
        }
        Method::Nsrlsqr => {
            let opts = NsrOptions {
                tol: args.tol,
                max_outer: args.max_outer,
                inner,
                reproject: args.reproject,
                ..Default::default()
            };
            let tracker = truth.map(ErrorTracker::relative_to);
            nsr_lsqr_solve(&p.a, &p.c, &p.b, &opts, tracker.as_ref())
        }
        Method::Ns | Method::De | Method::Aug => unreachable!("classical methods are handled separately"),
    }
}

pub fn run(args: &SolveArgs) -> CmdResult {
    let problem = LseProblem::new(
        read_matrix(&args.a)?,
        read_matrix(&args.c)?,
        read_vector(&args.b)?,
        read_vector(&args.d)?,
    )?;
    let truth = match &args.xtrue {
        Some(path) => {
            let x = read_vector(path)?;
            if x.len() != problem.n() {
                return Err(LseError::DimensionMismatch {
                    context: "length of xtrue vs columns of A",
                    expected: problem.n(),
                    found: x.len(),
                }
                .into());
            }
            Some(x)
        }
        None => None,
    };
    log::info!(
        "solving m={} n={} p={} with {}",
        problem.m(),
        problem.n(),
        problem.p(),
        args.method.name()
    );

    let (report, details) = match args.method {
        Method::Ns | Method::De | Method::Aug => {
            let opts = ReferenceOptions::default();
            let start = Instant::now();
            let (x, residual_norm, multiplier_norm) = match args.method {
                Method::Ns => (solve_nullspace(&problem, &opts)?, None, None),
                Method::De => (solve_direct_elim(&problem, &opts)?, None, None),
                _ => {
                    let s = solve_augmented(&problem, &opts)?;
                    let (r, l) = (lse_core::linalg::vecops::norm2(&s.r), lse_core::linalg::vecops::norm2(&s.lambda));
                    (s.x, Some(r), Some(l))
                }
            };
            let mut rep = SolveReport::from_parts(x, vec![0.0; problem.n()]);
            rep.termination = Termination::Direct;
            rep.wall_time = start.elapsed().as_secs_f64();
            (
                rep,
                Details::Reference {
                    residual_norm,
                    multiplier_norm,
                },
            )
        }
        _ => {
            let rep = krylov(args, &problem, truth.as_deref())?;
            let details = Details::Krylov {
                tol: args.tol,
                inner_tol: args.inner_tol,
                inner_mode: match args.inner_mode {
                    InnerModeArg::Lsqr => "lsqr",
                    InnerModeArg::Direct => "direct",
                },
                components: rep.components.clone(),
            };
            (rep, details)
        }
    };

    let optimality = if problem.m() + problem.n() + problem.p() <= args.diagnostics_cap {
        Some(check_optimality(&problem, &report.x, None)?.into())
    } else {
        None
    };
    let relative_error = truth.as_deref().map(|t| rel_error(&report.x, t));
    let out = Report {
        method: args.method.name(),
        termination: report.termination,
        converged: report.converged(),
        iterations: report.iterations,
        inner_iterations: report.inner_iterations,
        matvecs: report.matvecs,
        wall_time: report.wall_time,
        final_residual: report.final_residual(),
        relative_error,
        dimensions: Dimensions {
            m: problem.m(),
            n: problem.n(),
            p: problem.p(),
        },
        optimality,
        details,
    };
    write_all(&args.out, &report.x, &out, &report.history)?;

    let err = relative_error.map_or(String::new(), |e| format!(", relative error {e:.3e}"));
    println!(
        "{}: {:?} after {} iterations{err}; wrote {}",
        args.method.name(),
        report.termination,
        report.iterations,
        args.out.display()
    );
    if report.converged() {
        Ok(exit::OK)
    } else {
        Err(Failure::new(
            exit::NOT_CONVERGED,
            format!("{} did not converge within {} iterations", args.method.name(), report.iterations),
        ))
    }
}
