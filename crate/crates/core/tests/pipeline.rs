mod common;

use std::process::{Command, Output};

use common::{data_path, load, EXAMPLES};
use hopfnf::algebra::{rat, Rational};
use hopfnf::normalform::{classify, normalize_with, Classification, Stability};
use hopfnf::vfield::{complexify, parse_system, serialize_system};

fn hopfnf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopfnf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(name: &str) -> String {
    data_path(name).display().to_string()
}

fn focus(name: &str, degree: usize) -> (usize, Stability, Vec<Rational>) {
    let ex = EXAMPLES.iter().find(|e| e.name == name).unwrap();
    let (nf, _) = normalize_with(&complexify(&load(name)), degree, ex.opts).unwrap();
    match classify(&nf) {
        Classification::Focus { l, stability, focus_quantities, .. } => (l, stability, focus_quantities),
        c => panic!("{name}: {c:?}"),
    }
}

#[test]
fn data_files_round_trip() {
    for ex in &EXAMPLES {
        let sys = load(ex.name);
        assert_eq!(parse_system(&serialize_system(&sys)).unwrap(), sys, "{}", ex.name);
    }
}

/// `z = 0` is invariant in both systems, so the plane field decides:
/// `ṙ = r³` for S1 and `ṙ = r⁵` for l3, giving `g₂ − g₁ = 2s` and `2s²`.
#[test]
fn focus_quantities_of_planar_examples() {
    let (l, st, q) = focus("s1", 9);
    assert_eq!((l, st), (2, Stability::Unstable));
    assert_eq!(q, vec![rat(2, 1), rat(0, 1), rat(0, 1), rat(0, 1)]);
    let (l, st, q) = focus("l3", 10);
    assert_eq!((l, st), (3, Stability::Unstable));
    assert_eq!(q, vec![rat(0, 1), rat(2, 1), rat(0, 1), rat(0, 1)]);
}

#[test]
fn four_d_is_a_stable_weak_focus() {
    let (l, st, q) = focus("four_d", 8);
    assert_eq!((l, st), (2, Stability::Stable));
    assert!(q[0] < rat(0, 1));
}

#[test]
fn exit_codes() {
    assert_eq!(hopfnf(&["check", &path("s1")]).status.code(), Some(0));
    assert_eq!(hopfnf(&["check", &path("four_d")]).status.code(), Some(1));
    assert_eq!(hopfnf(&["check", "/no/such/file.sys"]).status.code(), Some(2));
    assert_eq!(hopfnf(&["classify", &path("paraboloid"), "--degree", "6"]).status.code(), Some(4));
    let o = hopfnf(&["classify", &path("four_d"), "--allow-extra-resonance"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("classification: focus, l=2, cyclicity=1, stable"), "{}", stdout(&o));
}

#[test]
fn displacement_csv() {
    let o = hopfnf(&["displacement", &path("s1"), "--grid", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r0,d,eps,newton_iters,err_est"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    // d ≈ 2π r₀³ on the default window
    for r in &rows {
        let rel = (r[1] / (2.0 * std::f64::consts::PI * r[0].powi(3)) - 1.0).abs();
        assert!(rel < 0.05, "{r:?}");
    }
    let summary = String::from_utf8_lossy(&o.stderr);
    assert!(summary.contains("k_expected: 3"), "{summary}");

    let out = std::env::temp_dir().join(format!("hopfnf-displacement-{}.csv", std::process::id()));
    let o = hopfnf(&["displacement", &path("l3"), "--grid", "4", "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();
    assert_eq!(written.lines().count(), 5);
}

#[test]
fn cycle_search() {
    let o = hopfnf(&["cycles", &path("s1"), "--search", "--extended"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("count: 1\n"));
    // without the constant term only l − 2 = 0 cycles are reachable
    let o = hopfnf(&["cycles", &path("s1"), "--search"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("count: 0\n"));
    let o = hopfnf(&["cycles", &path("s1"), "--epsilon", "0.01", "--a0", "-50", "--a", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("count: 1\n"), "{}", stdout(&o));
}

#[test]
fn verify_and_negative_control() {
    let o = hopfnf(&["verify", &path("paraboloid")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("result: pass"));
    let o = hopfnf(&["verify", &path("s1"), "--corrupt-multiplier"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("multiplier_equation: nonzero at degree 2"), "{}", stdout(&o));
}
