//! LSE problems with known minimum-norm solutions.
//!
//! Given `A`, `C` and a profile vector `w₁`:
//!
//! 1. `B` = orthonormal basis of `N(C)`, `G = AᵀA + CᵀC`;
//! 2. `w₁` is projected onto `R(G)` and `x₁ = w₁ − B(BᵀGB)⁻¹BᵀGw₁`;
//! 3. `d = Cx₁ + z₁` with `z₁ ⟂ R(C)`;
//! 4. `w₂ ⟂ N(AB)`, `x₂ = Bw₂`, `b = Ax₂ + z₂` with `z₂ ⟂ R(AB)`;
//! 5. `x = x₁ + x₂`.
//!
//! Since `CB = 0`, `BᵀGB = (AB)ᵀ(AB)` and `BᵀG = (AB)ᵀA`, so step 2 is evaluated as
//! `x₁ = w₁ − B (AB)^† A w₁`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LseError, Result};
use crate::linalg::svd::bidiagonal_extreme_singular_values;
use crate::linalg::vecops::{add, sub};
use crate::linalg::{
    default_rank_tol, dense_pinv, jacobi_svd, mm_write_matrix, mm_write_vector, null_basis, numerical_rank, read_matrix,
    read_vector, DenseMatrix, SparseMatrix,
};
use crate::problem::LseProblem;

/// First-difference operator, `(n−1)×n` with rows `(…, 1, −1, …)`.
pub fn build_d1(n: usize) -> Result<SparseMatrix> {
    if n < 3 {
        return Err(LseError::InvalidConfig(format!("D1 needs n >= 3, got {n}")));
    }
    let t: Vec<_> = (0..n - 1).flat_map(|i| [(i, i, 1.0), (i, i + 1, -1.0)]).collect();
    SparseMatrix::from_triplets(n - 1, n, &t)
}

/// Second-difference operator, `(n−2)×n` with rows `(…, −1, 2, −1, …)`.
pub fn build_d2(n: usize) -> Result<SparseMatrix> {
    if n < 3 {
        return Err(LseError::InvalidConfig(format!("D2 needs n >= 3, got {n}")));
    }
    let t: Vec<_> = (0..n - 2)
        .flat_map(|i| [(i, i, -1.0), (i, i + 1, 2.0), (i, i + 2, -1.0)])
        .collect();
    SparseMatrix::from_triplets(n - 2, n, &t)
}

/// Shape of the `w₁` profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Ones,
    /// `t`
    Ramp,
    /// `t²`
    Quad,
    /// `sin 2t + 3 cos t`
    SinCos,
    /// `sin 2t − 3 cos t`
    SinCosNeg,
    /// Samples on a uniform grid, linearly interpolated.
    Custom(Vec<f64>),
}

/// A function sampled on a uniform grid over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub lo: f64,
    pub hi: f64,
}

impl ProfileSpec {
    pub fn ones() -> Self {
        ProfileSpec {
            kind: ProfileKind::Ones,
            lo: 0.0,
            hi: 1.0,
        }
    }

    /// The named profiles with their standard intervals:
    /// `ones`, `ramp` on `[0, 1]`, `quad` on `[−1, 1]`, `sincos` / `sincos-neg` on `[−π, π]`.
    pub fn from_id(id: &str) -> Result<Self> {
        use std::f64::consts::PI;
        let (kind, lo, hi) = match id {
            "ones" => (ProfileKind::Ones, 0.0, 1.0),
            "ramp" => (ProfileKind::Ramp, 0.0, 1.0),
            "quad" => (ProfileKind::Quad, -1.0, 1.0),
            "sincos" => (ProfileKind::SinCos, -PI, PI),
            "sincos-neg" => (ProfileKind::SinCosNeg, -PI, PI),
            other => return Err(LseError::InvalidConfig(format!("unknown profile '{other}'"))),
        };
        Ok(ProfileSpec { kind, lo, hi })
    }

    pub fn custom(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 || !samples.iter().all(|v| v.is_finite()) {
            return Err(LseError::InvalidConfig("custom profile needs >= 2 finite samples".into()));
        }
        Ok(ProfileSpec {
            kind: ProfileKind::Custom(samples),
            lo: 0.0,
            hi: 1.0,
        })
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            ProfileKind::Ones => "ones",
            ProfileKind::Ramp => "ramp",
            ProfileKind::Quad => "quad",
            ProfileKind::SinCos => "sincos",
            ProfileKind::SinCosNeg => "sincos-neg",
            ProfileKind::Custom(_) => "custom",
        }
    }

    /// Values at `n ≥ 2` equispaced points from `lo` to `hi`.
    pub fn evaluate(&self, n: usize) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(LseError::InvalidConfig(format!("profile grid needs >= 2 points, got {n}")));
        }
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let grid = (0..n).map(|k| if k == n - 1 { self.hi } else { self.lo + h * k as f64 });
        Ok(match &self.kind {
            ProfileKind::Ones => vec![1.0; n],
            ProfileKind::Ramp => grid.collect(),
            ProfileKind::Quad => grid.map(|t| t * t).collect(),
            ProfileKind::SinCos => grid.map(|t| (2.0 * t).sin() + 3.0 * t.cos()).collect(),
            ProfileKind::SinCosNeg => grid.map(|t| (2.0 * t).sin() - 3.0 * t.cos()).collect(),
            ProfileKind::Custom(s) => (0..n)
                .map(|k| {
                    let pos = k as f64 * (s.len() - 1) as f64 / (n - 1) as f64;
                    let i = (pos.floor() as usize).min(s.len() - 2);
                    let f = pos - i as f64;
                    s[i] * (1.0 - f) + s[i + 1] * f
                })
                .collect(),
        })
    }
}

/// Random sparse matrix with controlled density, rank and row scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSpec {
    pub rows: usize,
    pub cols: usize,
    /// Probability of an entry being nonzero; every row gets at least one.
    pub density: f64,
    /// When set and below `rows`, rows past `rank` are sums of two earlier rows.
    pub rank: Option<usize>,
    /// Row `i` is scaled by `10^(−decades·i/(rows−1))`.
    pub row_scale_decades: f64,
}

impl SparseSpec {
    pub fn new(rows: usize, cols: usize, density: f64) -> Self {
        SparseSpec {
            rows,
            cols,
            density,
            rank: None,
            row_scale_decades: 0.0,
        }
    }
}

pub fn random_sparse(spec: &SparseSpec, rng: &mut impl Rng) -> Result<SparseMatrix> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(LseError::InvalidConfig("random sparse matrix needs nonzero dimensions".into()));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(LseError::InvalidConfig(format!("density must be in (0, 1], got {}", spec.density)));
    }
    let independent = spec.rank.unwrap_or(spec.rows).min(spec.rows);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(spec.rows);
    for _ in 0..independent {
        let mut row: Vec<(usize, f64)> = (0..spec.cols)
            .filter(|_| rng.random::<f64>() < spec.density)
            .map(|j| (j, 0.0))
            .collect();
        if row.is_empty() {
            row.push((rng.random_range(0..spec.cols), 0.0));
        }
        for e in &mut row {
            e.1 = rng.sample(StandardNormal);
        }
        rows.push(row);
    }
    for _ in independent..spec.rows {
        let (i, j) = if independent == 0 {
            (None, None)
        } else {
            (Some(rng.random_range(0..independent)), Some(rng.random_range(0..independent)))
        };
        let mut dense = vec![0.0; spec.cols];
        for k in [i, j].into_iter().flatten() {
            for &(c, v) in &rows[k] {
                dense[c] += v;
            }
        }
        rows.push(dense.into_iter().enumerate().filter(|e| e.1 != 0.0).collect());
    }
    let mut triplets = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let s = if spec.rows > 1 {
            10f64.powf(-spec.row_scale_decades * i as f64 / (spec.rows - 1) as f64)
        } else {
            1.0
        };
        triplets.extend(row.iter().map(|&(j, v)| (i, j, v * s)));
    }
    SparseMatrix::from_triplets(spec.rows, spec.cols, &triplets)
}

/// Options of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub seed: u64,
    /// Replace `(BᵀGB)⁻¹` by its pseudoinverse (needed when `N(A) ∩ N(C) ≠ {0}`)
    /// and accept `N(C) = {0}`.
    pub pinv_variant: bool,
    /// Draw the residual components `z₁`, `z₂`; with `false` both are zero.
    pub noise: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            seed: 0,
            pinv_variant: false,
            noise: true,
        }
    }
}

/// A problem together with its minimum-norm solution and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestProblem {
    pub problem: LseProblem,
    pub x_true: Vec<f64>,
    pub x1_true: Vec<f64>,
    pub x2_true: Vec<f64>,
    pub seed: u64,
    pub generator_id: String,
    pub profile: String,
}

fn project_out(basis: &DenseMatrix, v: &mut [f64]) {
    if basis.ncols() == 0 {
        return;
    }
    let coeff = basis.tmul_vec(v);
    for (vi, p) in v.iter_mut().zip(basis.mul_vec(&coeff)) {
        *vi -= p;
    }
}

fn randn(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Builds `(b, d)` and the solution pieces for the given `A`, `C`, `w₁`.
pub fn generate(a: &SparseMatrix, c: &SparseMatrix, w1: &ProfileSpec, opts: &GenOptions) -> Result<TestProblem> {
    if a.ncols() != c.ncols() {
        return Err(LseError::mismatch("columns of C vs A", a.ncols(), c.ncols()));
    }
    let (m, n, p) = (a.nrows(), a.ncols(), c.nrows());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ad = a.to_dense();
    let cd = c.to_dense();

    let b_basis = null_basis(&cd, default_rank_tol(p, n))?;
    let t = b_basis.ncols();
    if t == 0 && !opts.pinv_variant {
        return Err(LseError::TrivialNullSpace);
    }
    let ab = ad.matmul(&b_basis);
    if t > 0 {
        let rank = numerical_rank(&ab, default_rank_tol(m, t))?;
        if rank < t && !opts.pinv_variant {
            return Err(LseError::SingularProjectedGram { nullity: t - rank });
        }
    }
    let ab_pinv = dense_pinv(&ab, default_rank_tol(m, t))?;

    // w₁ ∈ R(G) = N([A; C])^⊥
    let mut w1v = w1.evaluate(n)?;
    let stacked = ad.vstack(&cd);
    project_out(&null_basis(&stacked, default_rank_tol(m + p, n))?, &mut w1v);
    let y = ab_pinv.mul_vec(&ad.mul_vec(&w1v));
    let x1 = sub(&w1v, &b_basis.mul_vec(&y));

    let mut d = cd.mul_vec(&x1);
    let g1 = randn(&mut rng, p);
    if opts.noise {
        let c_pinv = dense_pinv(&cd, default_rank_tol(p, n))?;
        let z1 = sub(&g1, &cd.mul_vec(&c_pinv.mul_vec(&g1)));
        d = add(&d, &z1);
    }

    // w₂: first nonzero row of AB, restricted to R((AB)ᵀ)
    let x2 = if t == 0 {
        vec![0.0; n]
    } else {
        let abt = ab.transpose();
        let first = (0..m).find(|&i| abt.col(i).iter().any(|&v| v != 0.0));
        match first {
            Some(i) => {
                let w2 = ab_pinv.mul_vec(&ab.mul_vec(abt.col(i)));
                b_basis.mul_vec(&w2)
            }
            None => vec![0.0; n],
        }
    };
    let mut b = ad.mul_vec(&x2);
    let g2 = randn(&mut rng, m);
    if opts.noise {
        let z2 = sub(&g2, &ab.mul_vec(&ab_pinv.mul_vec(&g2)));
        b = add(&b, &z2);
    }

    let x_true = add(&x1, &x2);
    Ok(TestProblem {
        problem: LseProblem::new(a.clone(), c.clone(), b, d)?,
        x_true,
        x1_true: x1,
        x2_true: x2,
        seed: opts.seed,
        generator_id: "custom".into(),
        profile: w1.id().into(),
    })
}

/// Which matrices to pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorId {
    /// `A = D1(n)`, `C` random sparse `p×n`.
    D1Sparse,
    /// `A = D2(n)`, `C` random sparse `p×n`.
    D2Sparse,
    /// Random sparse `n×n` matrix split by rows: `A` = first `n−p`, `C` = last `p`.
    SplitSquare,
}

impl GeneratorId {
    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "d1+sparse" => Ok(GeneratorId::D1Sparse),
            "d2+sparse" => Ok(GeneratorId::D2Sparse),
            "split-square" => Ok(GeneratorId::SplitSquare),
            other => Err(LseError::InvalidConfig(format!("unknown generator '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorId::D1Sparse => "d1+sparse",
            GeneratorId::D2Sparse => "d2+sparse",
            GeneratorId::SplitSquare => "split-square",
        }
    }
}

/// A complete recipe for a synthetic problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub generator: GeneratorId,
    pub n: usize,
    pub p: usize,
    pub density: f64,
    pub w1: ProfileSpec,
    pub options: GenOptions,
}

/// Builds the matrices named by `spec.generator` and runs [`generate`].
pub fn generate_from_spec(spec: &GenSpec) -> Result<TestProblem> {
    let (n, p) = (spec.n, spec.p);
    if p == 0 {
        return Err(LseError::InvalidConfig("p must be >= 1".into()));
    }
    // matrix draws use a stream separate from the residual draws
    let mut rng = ChaCha8Rng::seed_from_u64(spec.options.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (a, c) = match spec.generator {
        GeneratorId::D1Sparse => (build_d1(n)?, random_sparse(&SparseSpec::new(p, n, spec.density), &mut rng)?),
        GeneratorId::D2Sparse => (build_d2(n)?, random_sparse(&SparseSpec::new(p, n, spec.density), &mut rng)?),
        GeneratorId::SplitSquare => {
            if p >= n {
                return Err(LseError::InvalidConfig(format!("split-square needs p < n, got p={p}, n={n}")));
            }
            let m = random_sparse(&SparseSpec::new(n, n, spec.density), &mut rng)?;
            (m.select_rows(0..n - p), m.select_rows(n - p..n))
        }
    };
    let mut tp = generate(&a, &c, &spec.w1, &spec.options)?;
    tp.generator_id = spec.generator.as_str().into();
    Ok(tp)
}

/// `σ_max / σ_min` over the nonzero singular values.
///
/// Upper or lower bidiagonal matrices (e.g. D1) go through bisection on the
/// bidiagonal; anything else is densified, up to `dense_cap` in the larger dimension.
pub fn condition_number(m: &SparseMatrix, dense_cap: usize) -> Result<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    let rel_tol = default_rank_tol(r, c);
    if let Some((diag, sup)) = upper_bidiagonal(m).or_else(|| upper_bidiagonal(&m.transpose())) {
        let (smax, smin) = bidiagonal_extreme_singular_values(&diag, &sup, rel_tol);
        return Ok(if smin > 0.0 { smax / smin } else { f64::INFINITY });
    }
    if r.max(c) > dense_cap {
        return Err(LseError::TooLarge {
            dim: r.max(c),
            cap: dense_cap,
        });
    }
    let d = m.to_dense();
    let d = if r < c { d.transpose() } else { d };
    let svd = jacobi_svd(&d)?;
    let rank = svd.rank(rel_tol);
    if rank == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(svd.s[0] / svd.s[rank - 1])
}

/// `(diag, sup)` when `m` is `k×k` or `k×(k+1)` upper bidiagonal.
fn upper_bidiagonal(m: &SparseMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let (r, c) = (m.nrows(), m.ncols());
    if !(c == r || c == r + 1) || r == 0 {
        return None;
    }
    for (i, j, _) in m.triplets() {
        if j != i && j != i + 1 {
            return None;
        }
    }
    let diag = (0..r).map(|i| m.get(i, i)).collect();
    let sup = (0..c - 1).map(|i| m.get(i, i + 1)).collect();
    Some((diag, sup))
}

/// Contents of `meta.json` in a problem bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub seed: Option<u64>,
    pub generator_id: String,
    pub profile: Option<String>,
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

/// A problem read from disk, with its solution when the bundle has one.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub problem: LseProblem,
    pub x_true: Option<Vec<f64>>,
    pub meta: Option<BundleMeta>,
}

pub const BUNDLE_FILES: [&str; 6] = ["A.mtx", "C.mtx", "b.mtx", "d.mtx", "xtrue.mtx", "meta.json"];

/// Writes `A.mtx`, `C.mtx`, `b.mtx`, `d.mtx`, `xtrue.mtx` and `meta.json` into `dir`.
pub fn write_bundle(dir: &Path, tp: &TestProblem) -> Result<()> {
    let io = |path: PathBuf| move |source| LseError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let p = &tp.problem;
    mm_write_matrix(dir.join("A.mtx"), &p.a)?;
    mm_write_matrix(dir.join("C.mtx"), &p.c)?;
    mm_write_vector(dir.join("b.mtx"), &p.b)?;
    mm_write_vector(dir.join("d.mtx"), &p.d)?;
    mm_write_vector(dir.join("xtrue.mtx"), &tp.x_true)?;
    let meta = BundleMeta {
        seed: Some(tp.seed),
        generator_id: tp.generator_id.clone(),
        profile: Some(tp.profile.clone()),
        m: p.m(),
        n: p.n(),
        p: p.p(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    let path = dir.join("meta.json");
    fs::write(&path, json + "\n").map_err(io(path))
}

/// Reads a bundle; `xtrue.mtx` and `meta.json` are optional.
pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let problem = LseProblem::new(
        read_matrix(dir.join("A.mtx"))?,
        read_matrix(dir.join("C.mtx"))?,
        read_vector(dir.join("b.mtx"))?,
        read_vector(dir.join("d.mtx"))?,
    )?;
    let xpath = dir.join("xtrue.mtx");
    let x_true = if xpath.exists() { Some(read_vector(&xpath)?) } else { None };
    if let Some(x) = &x_true {
        if x.len() != problem.n() {
            return Err(LseError::mismatch("length of xtrue vs columns of A", problem.n(), x.len()));
        }
    }
    let mpath = dir.join("meta.json");
    let meta = if mpath.exists() {
        let text = fs::read_to_string(&mpath).map_err(|source| LseError::Io {
            path: mpath.clone(),
            source,
        })?;
        Some(serde_json::from_str(&text).map_err(|e| LseError::Parse {
            path: mpath,
            line: e.line(),
            msg: e.to_string(),
        })?)
    } else {
        None
    };
    Ok(Bundle { problem, x_true, meta })
}
