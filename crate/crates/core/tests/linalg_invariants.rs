mod common;

use common::*;
use lse_core::linalg::{dense_pinv, dense_qr, mm_read, mm_write, null_basis, numerical_rank, DenseMatrix, MmObject, SparseMatrix};
use lse_core::testgen::{random_sparse, SparseSpec};
use proptest::prelude::*;

fn gram_defect(q: &DenseMatrix) -> f64 {
    let k = q.ncols();
    mat_rel(&q.tmatmul(q), &DenseMatrix::identity(k)) * (k as f64).sqrt()
}

#[test]
fn spmv_matches_dense_product() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let spec = SparseSpec::new(17, 23, 0.2);
        let s = random_sparse(&spec, &mut r).unwrap();
        let d = s.to_dense();
        let x = randn(&mut r, 23);
        let y = randn(&mut r, 17);
        assert!(rel(&s.spmv(&x, false).unwrap(), &d.mul_vec(&x)) <= 1e-13);
        assert!(rel(&s.spmv(&y, true).unwrap(), &d.tmul_vec(&y)) <= 1e-13);
    }
}

#[test]
fn spmv_rejects_wrong_length() {
    let s = SparseMatrix::identity(3);
    assert!(s.spmv(&[1.0, 2.0], false).is_err());
    assert!(s.spmv(&[1.0; 4], true).is_err());
}

#[test]
fn qr_is_orthonormal_and_reconstructs() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let (rows, cols, rank) = [(12, 7, 7), (7, 12, 7), (10, 10, 4)][seed as usize % 3];
        let m = random_rank(&mut r, rows, cols, rank);
        for pivoting in [false, true] {
            let qr = dense_qr(&m, pivoting);
            assert!(gram_defect(&qr.q) <= 1e-12);
            let mp = m.matmul(&qr.permutation_matrix());
            assert!(mat_rel(&qr.q.matmul(&qr.r), &mp) <= 1e-12);
            if pivoting {
                let k = rows.min(cols);
                for j in 1..k {
                    assert!(qr.r[(j, j)].abs() <= qr.r[(j - 1, j - 1)].abs() * (1.0 + 1e-12));
                }
                assert_eq!(qr.rank(1e-10), rank);
            }
        }
    }
}

#[test]
fn pinv_penrose_identities() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let (rows, cols, rank) = [(5, 3, 3), (6, 9, 4), (8, 8, 8), (9, 4, 2)][seed as usize % 4];
        let m = random_rank(&mut r, rows, cols, rank);
        let x = dense_pinv(&m, 1e-12).unwrap();
        assert!(mat_rel(&m.matmul(&x).matmul(&m), &m) <= 1e-10);
        assert!(mat_rel(&x.matmul(&m).matmul(&x), &x) <= 1e-10);
        let mx = m.matmul(&x);
        let xm = x.matmul(&m);
        assert!(mat_rel(&mx, &mx.transpose()) <= 1e-10);
        assert!(mat_rel(&xm, &xm.transpose()) <= 1e-10);
        assert_eq!(numerical_rank(&m, 1e-10).unwrap(), rank);
    }
}

#[test]
fn null_basis_annihilates_and_is_orthonormal() {
    for seed in 0..10 {
        let mut r = rng(300 + seed);
        let (rows, cols, rank) = [(4, 10, 4), (6, 10, 3), (12, 8, 5)][seed as usize % 3];
        let m = random_rank(&mut r, rows, cols, rank);
        let b = null_basis(&m, 1e-12).unwrap();
        assert_eq!(b.ncols(), cols - rank);
        assert!(m.matmul(&b).frobenius_norm() <= 1e-12 * m.frobenius_norm());
        assert!(gram_defect(&b) <= 1e-12);
    }
}

#[test]
fn matrix_market_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(400);
    let s = random_sparse(&SparseSpec::new(9, 13, 0.3), &mut r).unwrap();
    let v = randn(&mut r, 9);
    let mpath = dir.path().join("m.mtx");
    let vpath = dir.path().join("v.mtx");
    mm_write(&mpath, &MmObject::Matrix(s.clone())).unwrap();
    mm_write(&vpath, &MmObject::Vector(v.clone())).unwrap();
    match mm_read(&mpath).unwrap() {
        MmObject::Matrix(back) => assert_eq!(back, s),
        other => panic!("expected a matrix, got {other:?}"),
    }
    match mm_read(&vpath).unwrap() {
        MmObject::Vector(back) => assert_eq!(back, v),
        other => panic!("expected a vector, got {other:?}"),
    }
}

fn small_dense() -> impl Strategy<Value = DenseMatrix> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| DenseMatrix::from_col_major(r, c, v))
    })
}

proptest! {
    #[test]
    fn prop_sparse_dense_round_trip(m in small_dense()) {
        let s = SparseMatrix::from_dense(&m, 0.0);
        prop_assert_eq!(s.to_dense(), m.clone());
        prop_assert_eq!(s.transpose().to_dense(), m.transpose());
    }

    #[test]
    fn prop_pinv_is_a_generalized_inverse(m in small_dense()) {
        let x = dense_pinv(&m, 1e-12).unwrap();
        prop_assert!(m.matmul(&x).matmul(&m).sub(&m).frobenius_norm() <= 1e-9 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn prop_null_basis_dimension(m in small_dense()) {
        let rank = numerical_rank(&m, 1e-12).unwrap();
        let b = null_basis(&m, 1e-12).unwrap();
        prop_assert_eq!(b.ncols() + rank, m.ncols());
    }
}
