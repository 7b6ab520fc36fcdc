//! `lse`: solve, generate, verify and condition-number commands over Matrix Market files.

mod artifacts;
mod generate;
mod solve;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lse_core::LseError;

/// Exit statuses shared by all commands.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const BAD_INPUT: u8 = 2;
    pub const DIMENSION_MISMATCH: u8 = 3;
    pub const NOT_CONVERGED: u8 = 4;
}

/// A failure carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<LseError> for Failure {
    fn from(e: LseError) -> Self {
        let code = match e.root() {
            LseError::DimensionMismatch { .. } => exit::DIMENSION_MISMATCH,
            _ => exit::BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

pub type CmdResult = Result<u8, Failure>;

#[derive(Parser, Debug)]
#[command(name = "lse", version, about = "Equality-constrained least squares via decomposed Krylov solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve min ||Ax - b|| subject to min ||Cx - d||.
    Solve(SolveArgs),
    /// Write a synthetic problem bundle with a known solution.
    Generate(GenerateArgs),
    /// Check a candidate solution against a bundle.
    Verify(VerifyArgs),
    /// Print the 2-norm condition number of a matrix.
    Cond(CondArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Kids1,
    Kids2,
    Glsqr,
    Nsrlsqr,
    /// Null-space method.
    Ns,
    /// Direct elimination.
    De,
    /// Augmented (KKT) system.
    Aug,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Kids1 => "kids1",
            Method::Kids2 => "kids2",
            Method::Glsqr => "glsqr",
            Method::Nsrlsqr => "nsrlsqr",
            Method::Ns => "ns",
            Method::De => "de",
            Method::Aug => "aug",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InnerModeArg {
    Lsqr,
    Direct,
}

#[derive(clap::Args, Debug)]
pub struct SolveArgs {
    #[arg(long = "A", value_name = "PATH")]
    pub a: PathBuf,
    #[arg(long = "C", value_name = "PATH")]
    pub c: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub b: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub d: PathBuf,
    #[arg(long, value_enum, default_value = "kids1")]
    pub method: Method,
    /// Outer stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Inner LSQR tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub inner_tol: f64,
    #[arg(long, value_enum, default_value = "lsqr")]
    pub inner_mode: InnerModeArg,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Known solution; history then records the true relative error.
    #[arg(long, value_name = "PATH")]
    pub xtrue: Option<PathBuf>,
    /// Full reorthogonalization in gLSQR.
    #[arg(long)]
    pub reorth: bool,
    /// Re-project NSR basis vectors onto N(C).
    #[arg(long)]
    pub reproject: bool,
    /// Run the two KIDS-I components on separate threads.
    #[arg(long)]
    pub parallel: bool,
    /// Skip the dense optimality check when m + n + p exceeds this.
    #[arg(long, default_value_t = 3000)]
    pub diagnostics_cap: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    #[value(name = "d1+sparse")]
    D1Sparse,
    #[value(name = "d2+sparse")]
    D2Sparse,
    #[value(name = "split-square")]
    SplitSquare,
    #[value(name = "from-files")]
    FromFiles,
}

#[derive(clap::Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub gen: GenKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    /// ones | ramp | quad | sincos | sincos-neg
    #[arg(long, default_value = "ones")]
    pub w1: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use pseudoinverses where N(C) = {0} or N(A) ∩ N(C) ≠ {0}.
    #[arg(long)]
    pub pinv: bool,
    /// Omit the random residual components z₁, z₂.
    #[arg(long)]
    pub no_noise: bool,
    /// A for `--gen from-files`.
    #[arg(long = "A", value_name = "PATH")]
    pub a: Option<PathBuf>,
    /// C for `--gen from-files`.
    #[arg(long = "C", value_name = "PATH")]
    pub c: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_name = "DIR")]
    pub bundle: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub x: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
}

#[derive(clap::Args, Debug)]
pub struct CondArgs {
    #[arg(long, value_name = "PATH")]
    pub matrix: PathBuf,
    /// Largest dimension densified for a general SVD.
    #[arg(long, default_value_t = 5000)]
    pub dense_cap: usize,
}

fn cond(args: &CondArgs) -> CmdResult {
    let m = lse_core::linalg::read_matrix(&args.matrix)?;
    let kappa = lse_core::testgen::condition_number(&m, args.dense_cap)?;
    println!("{}", significant(kappa, 6));
    Ok(exit::OK)
}

/// `x` rounded to `digits` significant digits.
pub fn significant(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Generate(a) => generate::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Cond(a) => cond(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
