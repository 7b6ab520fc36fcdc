mod common;

use common::*;
use lse_core::kids::{check_optimality, kids1_solve, kids2_solve, KidsOptions};
use lse_core::linalg::vecops::sub;
use lse_core::linalg::{dense_pinv, null_basis, DenseMatrix};
use lse_core::reference::{
    lse_oracle, null_restricted_pinv_apply, solve_augmented, solve_direct_elim, solve_nullspace, weighted_pinv_apply,
    ReferenceOptions,
};
use lse_core::testgen::{
    build_d1, build_d2, generate, generate_from_spec, random_sparse, read_bundle, write_bundle, GenOptions, GenSpec,
    GeneratorId, ProfileSpec, SparseSpec,
};
use proptest::prelude::*;

fn spec(generator: GeneratorId, n: usize, seed: u64) -> GenSpec {
    GenSpec {
        generator,
        n,
        p: n / 3,
        density: 0.2,
        w1: ProfileSpec::from_id("quad").unwrap(),
        options: GenOptions {
            seed,
            ..Default::default()
        },
    }
}

const GENERATORS: [GeneratorId; 3] = [GeneratorId::D1Sparse, GeneratorId::D2Sparse, GeneratorId::SplitSquare];

#[test]
fn generated_components_match_dense_oracles() {
    for (i, g) in GENERATORS.iter().enumerate() {
        let tp = generate_from_spec(&spec(*g, 30 + 7 * i, 40 + i as u64)).unwrap();
        let p = &tp.problem;
        let (a, c) = (p.a.to_dense(), p.c.to_dense());
        let x1 = weighted_pinv_apply(&c, &a, &p.d).unwrap();
        let x2 = null_restricted_pinv_apply(&a, &c, &p.b).unwrap();
        assert!(rel(&tp.x1_true, &x1) <= 1e-8, "{}: x1 {:e}", g.as_str(), rel(&tp.x1_true, &x1));
        assert!(rel(&tp.x2_true, &x2) <= 1e-8, "{}: x2 {:e}", g.as_str(), rel(&tp.x2_true, &x2));
        assert!(rel(&tp.x_true, &lse_oracle(p).unwrap()) <= 1e-8);
        let diag = check_optimality(p, &tp.x_true, None).unwrap();
        assert!(diag.passes(1e-8), "{}: {:?}", g.as_str(), diag.relative());
    }
}

#[test]
fn generation_is_deterministic() {
    for g in GENERATORS {
        let s = spec(g, 24, 7);
        let one = generate_from_spec(&s).unwrap();
        let two = generate_from_spec(&s).unwrap();
        assert_eq!(one.problem, two.problem);
        assert_eq!(one.x_true, two.x_true);
        assert_eq!(one.x1_true, two.x1_true);
        let other = generate_from_spec(&spec(g, 24, 8)).unwrap();
        assert_ne!(one.x_true, other.x_true);
    }
}

#[test]
fn stencils_have_documented_shapes() {
    let d1 = build_d1(5).unwrap().to_dense();
    assert_eq!((d1.nrows(), d1.ncols()), (4, 5));
    assert_eq!(d1.row(0), vec![1.0, -1.0, 0.0, 0.0, 0.0]);
    let d2 = build_d2(5).unwrap().to_dense();
    assert_eq!((d2.nrows(), d2.ncols()), (3, 5));
    assert_eq!(d2.row(1), vec![0.0, -1.0, 2.0, -1.0, 0.0]);
}

#[test]
fn bundle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tp = generate_from_spec(&spec(GeneratorId::D2Sparse, 20, 3)).unwrap();
    write_bundle(dir.path(), &tp).unwrap();
    let back = read_bundle(dir.path()).unwrap();
    assert_eq!(back.problem, tp.problem);
    assert_eq!(back.x_true.as_deref(), Some(tp.x_true.as_slice()));
    let meta = back.meta.unwrap();
    assert_eq!(meta.seed, Some(3));
    assert_eq!(meta.generator_id, "d2+sparse");
    assert_eq!((meta.m, meta.n, meta.p), (tp.problem.m(), tp.problem.n(), tp.problem.p()));
}

#[test]
fn classical_solvers_agree_pairwise() {
    let opts = ReferenceOptions::default();
    for seed in 0..10 {
        let mut r = rng(1300 + seed);
        let a = random_dense(&mut r, 14, 10);
        let c = random_dense(&mut r, 4, 10);
        let d = c.mul_vec(&randn(&mut r, 10));
        let p = problem(&a, &c, randn(&mut r, 14), d);
        let ns = solve_nullspace(&p, &opts).unwrap();
        let de = solve_direct_elim(&p, &opts).unwrap();
        let aug = solve_augmented(&p, &opts).unwrap();
        assert!(rel(&ns, &de) <= 1e-8);
        assert!(rel(&ns, &aug.x) <= 1e-8);
        assert!(rel(&de, &aug.x) <= 1e-8);
        assert!(rel(&aug.r, &sub(&p.b, &a.mul_vec(&aug.x))) <= 1e-8);
    }
}

#[test]
fn nullspace_solution_has_no_component_in_common_null_space() {
    for seed in 0..5 {
        let mut r = rng(1400 + seed);
        let a = random_rank(&mut r, 8, 12, 5);
        let c = random_rank(&mut r, 4, 12, 3);
        let d = c.mul_vec(&randn(&mut r, 12));
        let p = problem(&a, &c, randn(&mut r, 8), d);
        let x = solve_nullspace(&p, &ReferenceOptions::default()).unwrap();
        let z = null_basis(&a.vstack(&c), 1e-10).unwrap();
        assert!(z.ncols() > 0);
        assert!(norm(&z.tmul_vec(&x)) <= 1e-10 * norm(&x));
    }
}

#[test]
fn inconsistent_constraints_are_rejected_by_classical_solvers() {
    let mut r = rng(1500);
    let a = random_dense(&mut r, 8, 10);
    let c = random_rank(&mut r, 4, 10, 2);
    let p = problem(&a, &c, randn(&mut r, 8), randn(&mut r, 4));
    assert!(solve_nullspace(&p, &ReferenceOptions::default()).is_err());
    assert!(solve_direct_elim(&p, &ReferenceOptions::default()).is_err());
}

fn g_matrix(a: &DenseMatrix, c: &DenseMatrix) -> DenseMatrix {
    let (ga, gc) = (a.tmatmul(a), c.tmatmul(c));
    DenseMatrix::from_col_major(a.ncols(), a.ncols(), ga.as_slice().iter().zip(gc.as_slice()).map(|(x, y)| x + y).collect())
}

#[test]
fn weighted_pinv_lies_in_range_of_gram() {
    for seed in 0..10 {
        let mut r = rng(1600 + seed);
        let k = random_rank(&mut r, 5, 12, [5, 3][seed as usize % 2]);
        let l = random_rank(&mut r, 6, 12, 4);
        let g = randn(&mut r, 5);
        let x = weighted_pinv_apply(&k, &l, &g).unwrap();
        let m = g_matrix(&l, &k);
        let proj = m.matmul(&dense_pinv(&m, 1e-12).unwrap());
        assert!(rel(&proj.mul_vec(&x), &x) <= 1e-10);
    }
}

#[test]
fn kids_solvers_agree_and_satisfy_constraints() {
    let opts = KidsOptions {
        tol: 1e-10,
        ..Default::default()
    };
    for (i, g) in GENERATORS.iter().enumerate() {
        let tp = generate_from_spec(&spec(*g, 45 + 5 * i, 60 + i as u64)).unwrap();
        let p = &tp.problem;
        let r1 = kids1_solve(p, &opts, Some(&tp.x_true)).unwrap();
        let r2 = kids2_solve(p, &opts, Some(&tp.x_true)).unwrap();
        assert!(rel(&r1.x, &r2.x) <= 1e-6, "{}: {:e}", g.as_str(), rel(&r1.x, &r2.x));
        for x in [&r1.x, &r2.x] {
            let cx = p.c.spmv(x, false).unwrap();
            assert!(norm(&sub(&cx, &p.d)) <= 1e-8 * norm(&p.d));
        }
        let first = r1.history.first().unwrap().error.unwrap();
        let last = r1.history.last().unwrap().error.unwrap();
        assert!(last <= first);
    }
}

#[test]
fn kids_parallel_matches_lockstep() {
    let tp = generate_from_spec(&spec(GeneratorId::D1Sparse, 40, 90)).unwrap();
    let seq = kids1_solve(&tp.problem, &KidsOptions::default(), None).unwrap();
    let par = kids1_solve(
        &tp.problem,
        &KidsOptions {
            parallel: true,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(seq.x, par.x);
}

#[test]
fn generator_accepts_user_matrices() {
    let mut r = rng(1700);
    let a = build_d1(30).unwrap();
    let c = random_sparse(&SparseSpec::new(10, 30, 0.3), &mut r).unwrap();
    let tp = generate(&a, &c, &ProfileSpec::from_id("sincos").unwrap(), &GenOptions::default()).unwrap();
    assert_eq!(tp.problem.n(), 30);
    let diag = check_optimality(&tp.problem, &tp.x_true, None).unwrap();
    assert!(diag.passes(1e-8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_generated_truth_is_optimal(seed in 0u64..1000, n in 12usize..40, which in 0usize..3) {
        // small sizes can leave N(A) ∩ N(C) nontrivial, which needs the pseudoinverse variant
        let mut s = spec(GENERATORS[which], n, seed);
        s.options.pinv_variant = true;
        let tp = generate_from_spec(&s).unwrap();
        let diag = check_optimality(&tp.problem, &tp.x_true, None).unwrap();
        prop_assert!(diag.passes(1e-8), "{:?}", diag.relative());
        let sum: Vec<f64> = tp.x1_true.iter().zip(&tp.x2_true).map(|(a, b)| a + b).collect();
        prop_assert!(rel(&sum, &tp.x_true) <= 1e-12);
    }
}
