use lse_core::linalg::read_matrix;
use lse_core::testgen::{generate, generate_from_spec, write_bundle, GenOptions, GenSpec, GeneratorId, ProfileSpec};

use crate::{exit, CmdResult, Failure, GenKind, GenerateArgs};

fn required<T: Copy>(value: Option<T>, flag: &str, kind: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::new(exit::BAD_INPUT, format!("--gen {kind} needs {flag}")))
}

pub fn run(args: &GenerateArgs) -> CmdResult {
    let w1 = ProfileSpec::from_id(&args.w1)?;
    let options = GenOptions {
        seed: args.seed,
        pinv_variant: args.pinv,
        noise: !args.no_noise,
    };
    let tp = match args.gen {
        GenKind::FromFiles => {
            let (a, c) = match (&args.a, &args.c) {
                (Some(a), Some(c)) => (read_matrix(a)?, read_matrix(c)?),
                _ => return Err(Failure::new(exit::BAD_INPUT, "--gen from-files needs --A and --C")),
            };
            let mut tp = generate(&a, &c, &w1, &options)?;
            tp.generator_id = "from-files".into();
            tp
        }
        kind => {
            let (generator, name) = match kind {
                GenKind::D1Sparse => (GeneratorId::D1Sparse, "d1+sparse"),
                GenKind::D2Sparse => (GeneratorId::D2Sparse, "d2+sparse"),
                _ => (GeneratorId::SplitSquare, "split-square"),
            };
            let spec = GenSpec {
                generator,
                n: required(args.n, "--n", name)?,
                p: required(args.p, "--p", name)?,
                density: args.density,
                w1,
                options,
            };
            generate_from_spec(&spec)?
        }
    };
    write_bundle(&args.out, &tp)?;
    let p = &tp.problem;
    println!(
        "{}: m={} n={} p={} seed={}; wrote {}",
        tp.generator_id,
        p.m(),
        p.n(),
        p.p(),
        tp.seed,
        args.out.display()
    );
    Ok(exit::OK)
}
