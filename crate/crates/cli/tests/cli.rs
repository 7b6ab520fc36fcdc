use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lse"))
        .args(args)
        .output()
        .expect("lse runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_dense(path: &Path, rows: usize, cols: usize, entries: &[f64]) {
    let mut s = format!("%%MatrixMarket matrix coordinate real general\n{rows} {cols} ");
    let nz: Vec<_> = entries
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| format!("{} {} {v:e}", k / cols + 1, k % cols + 1))
        .collect();
    s += &format!("{}\n{}\n", nz.len(), nz.join("\n"));
    fs::write(path, s).unwrap();
}

fn write_vec(path: &Path, v: &[f64]) {
    let body: Vec<_> = v.iter().map(|x| format!("{x:e}")).collect();
    fs::write(
        path,
        format!("%%MatrixMarket matrix array real general\n{} 1\n{}\n", v.len(), body.join("\n")),
    )
    .unwrap();
}

fn read_vec(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let n: usize = lines.next().unwrap().split_whitespace().next().unwrap().parse().unwrap();
    let v: Vec<f64> = lines.map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(v.len(), n);
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A = I₂, C = [1 1], b = (1, 0), d = (2); solution (1.5, 0.5).
struct TwoVar {
    dir: TempDir,
}

impl TwoVar {
    fn new(d: f64) -> Self {
        let dir = TempDir::new().unwrap();
        write_dense(&dir.path().join("A.mtx"), 2, 2, &[1.0, 0.0, 0.0, 1.0]);
        write_dense(&dir.path().join("C.mtx"), 1, 2, &[1.0, 1.0]);
        write_vec(&dir.path().join("b.mtx"), &[1.0, 0.0]);
        write_vec(&dir.path().join("d.mtx"), &[d]);
        TwoVar { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn solve(&self, method: &str, out: &str, extra: &[&str]) -> Output {
        let (a, c, b, d, o) = (
            self.path("A.mtx"),
            self.path("C.mtx"),
            self.path("b.mtx"),
            self.path("d.mtx"),
            self.path(out),
        );
        let mut args = vec!["solve", "--A", s(&a), "--C", s(&c), "--b", s(&b), "--d", s(&d)];
        args.extend(["--method", method, "--out", s(&o)]);
        args.extend(extra);
        lse(&args)
    }
}

fn generate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--out", s(out)];
    args.extend(extra);
    lse(&args)
}

#[test]
fn two_variable_instance_solved_by_kids1() {
    let t = TwoVar::new(2.0);
    let out = t.solve("kids1", "k1", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let x = read_vec(&t.path("k1/x.mtx"));
    assert!((x[0] - 1.5).abs() <= 1e-6 && (x[1] - 0.5).abs() <= 1e-6, "{x:?}");
}

#[test]
fn every_method_agrees_on_two_variable_instance() {
    let t = TwoVar::new(2.0);
    assert_eq!(code(&t.solve("ns", "ns", &[])), 0);
    let reference = read_vec(&t.path("ns/x.mtx"));
    assert!((reference[0] - 1.5).abs() <= 1e-12 && (reference[1] - 0.5).abs() <= 1e-12);
    for (method, tol) in [("kids1", 1e-10), ("kids2", 1e-10), ("de", 1e-10), ("aug", 1e-10)] {
        let out = t.solve(method, method, &[]);
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        let x = read_vec(&t.path(&format!("{method}/x.mtx")));
        let err = x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= tol, "{method}: {x:?}");
    }
    let out = t.solve("kids1", "direct", &["--inner-mode", "direct", "--parallel"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn inconsistent_constraints_exit_two_and_name_the_residual() {
    let dir = TempDir::new().unwrap();
    // C = [1 1; 1 1] with d = (1, 2) has no exact solution
    write_dense(&dir.path().join("A.mtx"), 2, 2, &[1.0, 0.0, 0.0, 1.0]);
    write_dense(&dir.path().join("C.mtx"), 2, 2, &[1.0, 1.0, 1.0, 1.0]);
    write_vec(&dir.path().join("b.mtx"), &[1.0, 0.0]);
    write_vec(&dir.path().join("d.mtx"), &[1.0, 2.0]);
    let p = |n: &str| dir.path().join(n);
    let (a, c, b, d, o) = (p("A.mtx"), p("C.mtx"), p("b.mtx"), p("d.mtx"), p("out"));
    let out = lse(&[
        "solve", "--A", s(&a), "--C", s(&c), "--b", s(&b), "--d", s(&d), "--method", "de", "--out", s(&o),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).to_lowercase().contains("constraint"), "{}", stderr(&out));
    assert!(stderr(&out).to_lowercase().contains("residual"), "{}", stderr(&out));
}

#[test]
fn dimension_mismatch_exits_three() {
    let t = TwoVar::new(2.0);
    write_vec(&t.path("b.mtx"), &[1.0, 0.0, 3.0]);
    let out = t.solve("kids1", "out", &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn missing_file_exits_two() {
    let t = TwoVar::new(2.0);
    fs::remove_file(t.path("d.mtx")).unwrap();
    assert_eq!(code(&t.solve("kids1", "out", &[])), 2);
}

#[test]
fn iteration_cap_exits_four_and_still_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("bundle");
    let gen = generate(&bundle, &["--gen", "d1+sparse", "--n", "60", "--p", "20", "--seed", "3"]);
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let f = |n: &str| bundle.join(n);
    let out_dir = dir.path().join("out");
    let out = lse(&[
        "solve", "--A", s(&f("A.mtx")), "--C", s(&f("C.mtx")), "--b", s(&f("b.mtx")), "--d", s(&f("d.mtx")),
        "--method", "kids2", "--max-outer", "2", "--out", s(&out_dir),
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    for name in ["x.mtx", "report.json", "history.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
    assert_eq!(report["termination"], "max_iterations");
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["--gen", "d2+sparse", "--n", "40", "--p", "12", "--w1", "quad", "--seed", "11"];
    for sub in ["one", "two"] {
        let out = generate(&dir.path().join(sub), &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["A.mtx", "C.mtx", "b.mtx", "d.mtx", "xtrue.mtx", "meta.json"] {
        let a = fs::read(dir.path().join("one").join(name)).unwrap();
        let b = fs::read(dir.path().join("two").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let other = generate(&dir.path().join("three"), &["--gen", "d2+sparse", "--n", "40", "--p", "12", "--seed", "12"]);
    assert_eq!(code(&other), 0);
    assert_ne!(
        fs::read(dir.path().join("one/b.mtx")).unwrap(),
        fs::read(dir.path().join("three/b.mtx")).unwrap()
    );
}

#[test]
fn trivial_null_space_needs_pinv_flag() {
    let dir = TempDir::new().unwrap();
    let (a, c) = (dir.path().join("A.mtx"), dir.path().join("C.mtx"));
    write_dense(&a, 3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 3.0]);
    write_dense(&c, 3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let base = ["--gen", "from-files", "--A", s(&a), "--C", s(&c)];
    let out = generate(&dir.path().join("no"), &base);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = generate(&dir.path().join("yes"), &[&base[..], &["--pinv"]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn generated_bundle_round_trips_through_solve_and_verify() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("bundle");
    let gen = generate(&bundle, &["--gen", "d1+sparse", "--n", "50", "--p", "15", "--seed", "5", "--w1", "ramp"]);
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let f = |n: &str| bundle.join(n);
    let out_dir = dir.path().join("out");
    let out = lse(&[
        "solve", "--A", s(&f("A.mtx")), "--C", s(&f("C.mtx")), "--b", s(&f("b.mtx")), "--d", s(&f("d.mtx")),
        "--method", "kids1", "--tol", "1e-12", "--xtrue", s(&f("xtrue.mtx")), "--out", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let x = out_dir.join("x.mtx");
    let v = lse(&["verify", "--bundle", s(&bundle), "--x", s(&x), "--rtol", "1e-6"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));

    // error history ends no higher than it starts
    let mut rdr = csv::Reader::from_path(out_dir.join("history.csv")).unwrap();
    let errs: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(errs.len() >= 2);
    assert!(errs.last().unwrap() <= errs.first().unwrap(), "{errs:?}");
}

#[test]
fn verify_accepts_truth_and_rejects_perturbation() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("bundle");
    assert_eq!(code(&generate(&bundle, &["--gen", "d1+sparse", "--n", "40", "--p", "15", "--seed", "1"])), 0);
    let truth = bundle.join("xtrue.mtx");
    let v = lse(&["verify", "--bundle", s(&bundle), "--x", s(&truth), "--rtol", "1e-6"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));

    let mut x = read_vec(&truth);
    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt() / (x.len() as f64).sqrt();
    for (i, v) in x.iter_mut().enumerate() {
        *v += 1e-3 * scale * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let perturbed = dir.path().join("x.mtx");
    write_vec(&perturbed, &x);
    let v = lse(&["verify", "--bundle", s(&bundle), "--x", s(&perturbed), "--rtol", "1e-6"]);
    assert_eq!(code(&v), 1, "{}", stdout(&v));
    assert!(stdout(&v).contains("FAIL"));
}

#[test]
fn cond_of_first_difference_matrix() {
    // D1 of order n has singular values 2 sin(kπ/2n), so κ = cot(π/2n)
    let n = 50;
    let mut entries = vec![0.0; (n - 1) * n];
    for i in 0..n - 1 {
        entries[i * n + i] = 1.0;
        entries[i * n + i + 1] = -1.0;
    }
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("D1.mtx");
    write_dense(&path, n - 1, n, &entries);
    let out = lse(&["cond", "--matrix", s(&path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let kappa: f64 = stdout(&out).trim().parse().unwrap();
    let expected = 1.0 / (std::f64::consts::PI / (2.0 * n as f64)).tan();
    assert!((kappa - expected).abs() <= 1e-5 * expected, "{kappa} vs {expected}");
}

#[test]
fn report_has_stable_keys() {
    let t = TwoVar::new(2.0);
    write_vec(&t.path("x.mtx"), &[1.5, 0.5]);
    let xt = t.path("x.mtx");
    for method in ["kids1", "glsqr", "nsrlsqr", "aug"] {
        let out = t.solve(method, method, &["--xtrue", s(&xt)]);
        assert!(matches!(code(&out), 0 | 4), "{method}: {}", stderr(&out));
        let text = fs::read_to_string(t.path(&format!("{method}/report.json"))).unwrap();
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&str> = report.as_object().unwrap().keys().map(String::as_str).collect();
        for key in [
            "method", "termination", "converged", "iterations", "inner_iterations", "matvecs", "wall_time",
            "final_residual", "relative_error", "dimensions", "optimality", "details",
        ] {
            assert!(keys.contains(&key), "{method}: missing {key} in {keys:?}");
        }
        assert_eq!(report["method"], method);
        assert!(report["optimality"]["relative"].is_array());
        let header = fs::read_to_string(t.path(&format!("{method}/history.csv"))).unwrap();
        assert!(header.starts_with("iter,error_or_residual,inner_iters,cum_matvecs"));
    }
}
