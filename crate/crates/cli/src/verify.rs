use lse_core::kids::check_optimality;
use lse_core::linalg::read_vector;
use lse_core::linalg::vecops::rel_error;
use lse_core::testgen::read_bundle;
use lse_core::LseError;

use crate::{exit, CmdResult, VerifyArgs};

/// Optimality measures are never held to less than this, whatever `--rtol` says.
const OPTIMALITY_FLOOR: f64 = 1e-8;

pub fn run(args: &VerifyArgs) -> CmdResult {
    let bundle = read_bundle(&args.bundle)?;
    let x = read_vector(&args.x)?;
    let p = &bundle.problem;
    if x.len() != p.n() {
        return Err(LseError::DimensionMismatch {
            context: "length of x vs columns of A",
            expected: p.n(),
            found: x.len(),
        }
        .into());
    }
    let diag = check_optimality(p, &x, None)?;
    let opt_tol = args.rtol.max(OPTIMALITY_FLOOR);
    let [cres, stat, minn] = diag.relative();

    let mut rows = vec![
        ("constraint residual ||C^T(Cx-d)||, scaled", cres, opt_tol),
        ("projected stationarity ||P_N(C) A^T(Ax-b)||, scaled", stat, opt_tol),
        ("component in N(A) ∩ N(C), relative", minn, opt_tol),
    ];
    match &bundle.x_true {
        Some(t) => rows.insert(0, ("relative error vs x_true", rel_error(&x, t), args.rtol)),
        None => println!("bundle has no xtrue.mtx; checking optimality only"),
    }
    let mut ok = true;
    println!("{:<52} {:>12} {:>12}  status", "check", "value", "limit");
    for (name, value, limit) in &rows {
        let pass = *value <= *limit;
        ok &= pass;
        println!(
            "{name:<52} {value:>12.3e} {limit:>12.1e}  {}",
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { exit::OK } else { exit::VERIFY_FAILED })
}
