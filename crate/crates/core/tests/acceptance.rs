//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false` so the lines always print.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{load, multiplier_defect, random_cubic_system, EXAMPLES};
use hopfnf::algebra::{rat, ExponentVector, GaussRational, Rational, SeriesVector, TruncatedSeries};
use hopfnf::cli::identity_residuals;
use hopfnf::hopf::{
    count_cycles, displacement, estimate_leading_exponent, log_grid, search_cycles, straighten, to_cylindrical,
    HopfConfig, HopfError, PerturbationFamily, StraightenedSystem,
};
use hopfnf::multiplier::analyze;
use hopfnf::normalform::{normalize_with, pullback_field, Classification, NormalFormError, NormalizeOptions};
use hopfnf::vfield::{complexify, resonance_lattice, RealSystem, SpectrumData};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed <= budget, || format!("{what} took {elapsed:.1?}, budget {budget:?}"))
}

/// Conjugating the original field by the computed transform gives the
/// normal form exactly.
fn resubstitution() -> Check {
    let mut detail = Vec::new();
    for ex in &EXAMPLES {
        let n_cap = if ex.name == "four_d" { 8 } else { 10 };
        let start = Instant::now();
        let c = complexify(&load(ex.name));
        let (nf, t) = normalize_with(&c, n_cap, ex.opts).map_err(|e| format!("{}: {e}", ex.name))?;
        let pulled = pullback_field(&c.full_field(n_cap), &t).map_err(|e| format!("{}: {e}", ex.name))?;
        let residual = pulled.try_sub(&nf.field.recap(n_cap)).map_err(|e| e.to_string())?;
        let nonzero: usize = residual.components().iter().map(TruncatedSeries::len).sum();
        let elapsed = start.elapsed();
        ensure(nonzero == 0, || format!("{}: {nonzero} residual terms at N = {n_cap}", ex.name))?;
        within(elapsed, Duration::from_secs(10), ex.name)?;
        detail.push(format!("{} N={n_cap} {:.2}s", ex.name, elapsed.as_secs_f64()));
    }
    Ok(detail.join(", "))
}

/// `k − e_j = (m, m, 0, …, 0)`.
fn normal_shape(k: &ExponentVector, j: usize) -> bool {
    let mut v: Vec<i64> = k.as_slice().iter().map(|&e| i64::from(e)).collect();
    v[j] -= 1;
    v[0] == v[1] && v[0] >= 0 && v[2..].iter().all(|&e| e == 0)
}

fn resonance_shape() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let (mut violations, mut terms) = (0usize, 0usize);
    for idx in 0..50 {
        let sys = random_cubic_system(&mut rng);
        match normalize_with(&complexify(&sys), 6, NormalizeOptions::default()) {
            Ok((nf, _)) => {
                for (j, comp) in nf.field.components().iter().enumerate() {
                    for (k, _) in comp.terms() {
                        terms += 1;
                        if !normal_shape(k, j) {
                            violations += 1;
                        }
                    }
                }
            }
            Err(NormalFormError::ShapeViolation { .. }) => violations += 1,
            Err(e) => return Err(format!("system {idx}: {e}")),
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("50 systems, {terms} normal-form terms, 0 violations"))
}

fn multiplier_equation() -> Check {
    let mut detail = Vec::new();
    for ex in &EXAMPLES {
        let sys = load(ex.name);
        let an = analyze(&sys, ex.degree, ex.opts).map_err(|e| format!("{}: {e}", ex.name))?;
        let field = sys.field(ex.degree);
        let defect = multiplier_defect(&field, &an.multiplier.j, ex.degree);
        ensure(an.pde.is_zero() && defect.is_zero(), || format!("{}: residual {}", ex.name, defect))?;
        ensure(!an.multiplier.j.is_zero(), || format!("{}: J vanishes", ex.name))?;
        let n = sys.dim();
        let x = TruncatedSeries::variable(n, ex.degree, 0);
        let bumped = &an.multiplier.j.recap(ex.degree) + &(&x * &x);
        let scaled = &an.multiplier.j.recap(ex.degree) * &(&TruncatedSeries::one(n, ex.degree) + &x);
        for (label, bad) in [("J + x²", bumped), ("(1 + x)J", scaled)] {
            ensure(!multiplier_defect(&field, &bad, ex.degree).is_zero(), || {
                format!("{}: negative control {label} passed", ex.name)
            })?;
        }
        detail.push(format!("{} N={}", ex.name, ex.degree));
    }
    Ok(format!("{}; negative controls fail", detail.join(", ")))
}

/// Invariance of `z = h(x, y)`: `F_z(x, y, h) = Dh·F_{xy}(x, y, h)`.
fn graph_invariance_defect(sys: &RealSystem, h: &[TruncatedSeries], cap: usize) -> usize {
    let mut comps = vec![TruncatedSeries::variable(2, cap, 0), TruncatedSeries::variable(2, cap, 1)];
    comps.extend(h.iter().map(|c| c.recap(cap)));
    let emb = SeriesVector::new(comps).expect("uniform shape");
    let on = sys.field(cap).compose(&emb, false).expect("composable");
    let (fx, fy) = (on.component(0), on.component(1));
    h.iter()
        .enumerate()
        .map(|(j, hj)| {
            let hj = hj.recap(cap);
            let d = &(&hj.derivative(0) * fx) + &(&hj.derivative(1) * fy);
            (&d - on.component(j + 2)).len()
        })
        .sum()
}

fn containment() -> Check {
    let mut detail = Vec::new();
    for ex in &EXAMPLES {
        let sys = load(ex.name);
        let an = analyze(&sys, ex.degree, ex.opts).map_err(|e| format!("{}: {e}", ex.name))?;
        let inv = graph_invariance_defect(&sys, &an.graph.h, ex.degree);
        ensure(inv == 0, || format!("{}: graph not invariant ({inv} terms)", ex.name))?;
        let on = an.multiplier.j.compose(&an.graph.embedding().recap(ex.degree), false).map_err(|e| e.to_string())?;
        ensure(on.is_zero() && an.containment.is_zero(), || format!("{}: J on graph = {on}", ex.name))?;
        detail.push(format!("{} N={}", ex.name, ex.degree));
    }
    Ok(detail.join(", "))
}

fn base_system(name: &str, degree: usize, opts: NormalizeOptions) -> Result<(StraightenedSystem, usize), String> {
    let sys = load(name);
    let (nf, t) = normalize_with(&complexify(&sys), degree, opts).map_err(|e| e.to_string())?;
    let l = match hopfnf::normalform::classify(&nf) {
        Classification::Focus { l, .. } => l,
        c => return Err(format!("{name}: expected a focus, got {c:?}")),
    };
    Ok((straighten(&sys, &t).map_err(|e| e.to_string())?, l))
}

fn exponent_law() -> Check {
    let cfg = HopfConfig::default();
    let mut detail = Vec::new();
    for (name, degree, window, tol) in [("s1", 8, (1e-3, 10f64.powf(-1.5)), 0.1), ("l3", 10, (1e-2, 1e-1), 0.15)] {
        let start = Instant::now();
        let (st, l) = base_system(name, degree, NormalizeOptions::default())?;
        let f = to_cylindrical(&st, cfg.r_bound);
        let curve = displacement(&f, &log_grid(window.0, window.1, 20), 0.0, &cfg).map_err(|e| e.to_string())?;
        let fit = estimate_leading_exponent(&curve, window).map_err(|e| e.to_string())?;
        let expected = (2 * l - 1) as f64;
        ensure((fit.k - expected).abs() <= tol, || format!("{name}: k̂ = {:.4}, expected {expected} ± {tol}", fit.k))?;
        within(start.elapsed(), Duration::from_secs(60), name)?;
        detail.push(format!("{name} k̂={:.4} (k={expected})", fit.k));
    }
    Ok(detail.join(", "))
}

fn identity() -> Check {
    let cfg = HopfConfig::default();
    let mut worst = 0.0f64;
    for ex in &EXAMPLES {
        let sys = load(ex.name);
        let an = analyze(&sys, ex.degree, ex.opts).map_err(|e| format!("{}: {e}", ex.name))?;
        let st = straighten(&sys, &an.transform).map_err(|e| e.to_string())?;
        let st_an = analyze(&st.system, ex.degree, ex.opts).map_err(|e| e.to_string())?;
        let res = identity_residuals(&st, &st_an, &cfg).map_err(|e| format!("{}: {e}", ex.name))?;
        ensure(res.len() >= 5, || format!("{}: only {} probes", ex.name, res.len()))?;
        let max = res.iter().cloned().fold(0.0, f64::max);
        ensure(max <= 1e-4, || format!("{}: relative residual {max:.3e}", ex.name))?;
        worst = worst.max(max);
    }
    Ok(format!("4 systems x 5 probes, max relative residual {worst:.2e}"))
}

/// Random extended-family members on the natural scale of the leading
/// displacement coefficient `C`.
/// Returns the largest count, the number of members with `l − 1` cycles,
/// points with no valid window at all, and truncated windows.
fn sweep(st: &StraightenedSystem, l: usize, rng: &mut ChaCha8Rng, cfg: &HopfConfig) -> Result<[usize; 4], String> {
    let base = to_cylindrical(st, cfg.r_bound);
    let (mut max, mut hits, mut skipped, mut truncated) = (0, 0, 0, 0);
    for _ in 0..100 {
        let eps: f64 = rng.gen_range(0.005..0.02);
        let r_ref = eps.sqrt();
        let d = displacement(&base, &[r_ref], 0.0, cfg).map_err(|e| e.to_string())?;
        let scale = d.samples[0].d.abs() / r_ref.powi(2 * l as i32 - 1) / (2.0 * PI * eps);
        let mut a: Vec<f64> = (0..l - 1).map(|_| rng.gen_range(-2.0..2.0) * scale).collect();
        a[l - 2] = rng.gen_range(-1.0..1.0);
        let family = PerturbationFamily { l, a, a0: Some(rng.gen_range(-2.0..2.0) * scale), eps };
        let pert = hopfnf::hopf::build_perturbation(st, &family).map_err(|e| e.to_string())?;
        let r_max = ((l + 1) as f64 * eps).sqrt();
        match count_cycles(&to_cylindrical(&pert, cfg.r_bound), r_max, 100, l, cfg) {
            Ok(r) => {
                max = max.max(r.count());
                hits += usize::from(r.count() == l - 1);
                truncated += usize::from(r.window_end < 0.999 * r_max);
            }
            Err(HopfError::OutOfValidity { .. }) => skipped += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok([max, hits, skipped, truncated])
}

fn cyclicity() -> Check {
    let cfg = HopfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut detail = Vec::new();
    for (name, degree) in [("s1", 8), ("l3", 10)] {
        let start = Instant::now();
        let (st, l) = base_system(name, degree, NormalizeOptions::default())?;
        let stability = match hopfnf::normalform::classify(
            &normalize_with(&complexify(&load(name)), degree, NormalizeOptions::default()).map_err(|e| e.to_string())?.0,
        ) {
            Classification::Focus { stability, .. } => stability,
            c => return Err(format!("{name}: {c:?}")),
        };
        let hit = search_cycles(&st, l, stability, true, 100, &cfg).map_err(|e| e.to_string())?;
        let found = hit.as_ref().map_or(0, |h| h.report.count());
        ensure(found == l - 1, || format!("{name}: search found {found} cycles, expected {}", l - 1))?;
        let basic = search_cycles(&st, l, stability, false, 100, &cfg).map_err(|e| e.to_string())?;
        let basic = basic.map_or(0, |h| h.report.count());
        let [max, hits, skipped, truncated] = sweep(&st, l, &mut rng, &cfg)?;
        ensure(max <= l - 1, || format!("{name}: sweep found {max} cycles > {}", l - 1))?;
        ensure(skipped == 0, || format!("{name}: {skipped} sweep points left the valid region"))?;
        within(start.elapsed(), Duration::from_secs(300), name)?;
        detail.push(format!(
            "{name} l={l}: search {found} (basic family {basic}), sweep max {max}, {hits}/100 at l-1, {truncated} windows cut at escape"
        ));
    }
    Ok(detail.join("; "))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Integer rows `(Re λ, Im λ)` scaled by their denominators.
fn integer_rows(lambda: &[GaussRational]) -> [Vec<i64>; 2] {
    let scale = |row: Vec<&Rational>| -> Vec<i64> {
        let l = row.iter().fold(1i64, |acc, r| {
            let d = r.denom().to_i64().unwrap();
            acc / gcd(acc, d) * d
        });
        row.iter().map(|r| (*r * Rational::from_integer(l.into())).to_integer().to_i64().unwrap()).collect()
    };
    [scale(lambda.iter().map(|l| &l.re).collect()), scale(lambda.iter().map(|l| &l.im).collect())]
}

fn all_vectors(n: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                let used: i64 = v.iter().map(|x| x.abs()).sum();
                (-(bound - used)..=(bound - used)).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Rank over ℚ by fraction-free elimination.
fn rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| i128::from(x)).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, p);
        for i in r + 1..m.len() {
            let (a, b) = (m[r][c], m[i][c]);
            for k in 0..cols {
                m[i][k] = m[i][k] * a - m[r][k] * b;
            }
            let g = m[i].iter().fold(0i128, |g, &x| {
                let (mut a, mut b) = (g.abs(), x.abs());
                while b != 0 {
                    (a, b) = (b, a % b);
                }
                a
            });
            if g > 1 {
                m[i].iter_mut().for_each(|x| *x /= g);
            }
        }
        r += 1;
    }
    r
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> Vec<GaussRational> {
    let n = rng.gen_range(3..=5);
    let mut lambda = vec![GaussRational::i(), -GaussRational::i()];
    while lambda.len() < n {
        let next = if lambda.len() > 2 && rng.gen_bool(0.5) {
            // small integer combination of earlier entries
            let mut acc = GaussRational::zero();
            for l in &lambda {
                acc += &l.scale(&rat(rng.gen_range(-2..=2), 1));
            }
            acc
        } else {
            GaussRational::new(rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)), rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
        };
        lambda.push(next);
    }
    lambda
}

fn lattice() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut relations = 0;
    for idx in 0..20 {
        let lambda = random_spectrum(&mut rng);
        let n = lambda.len();
        let spec = SpectrumData { lambda: lambda.clone(), all_hyperbolic: true, same_sign: false };
        let lat = resonance_lattice(&spec);
        let rows = integer_rows(&lambda);
        let pairs = |k: &[i64]| rows.iter().all(|r| r.iter().zip(k).map(|(a, b)| a * b).sum::<i64>() == 0);
        for g in &lat.generators {
            ensure(pairs(g), || format!("spectrum {idx}: generator {g:?} is not a relation"))?;
        }
        ensure(rank(&lat.generators) == lat.rank, || format!("spectrum {idx}: dependent generators"))?;
        let expected_rank = n - rank(&rows);
        ensure(lat.rank == expected_rank, || format!("spectrum {idx}: rank {} vs {expected_rank}", lat.rank))?;
        let mut found = Vec::new();
        for k in all_vectors(n, 6) {
            let rel = pairs(&k);
            ensure(lat.contains(&k) == rel, || format!("spectrum {idx}: membership of {k:?} disagrees"))?;
            if rel && k.iter().any(|&x| x != 0) {
                found.push(k);
            }
        }
        relations += found.len();
        // small relations never span beyond the lattice
        ensure(found.is_empty() || rank(&found) <= lat.rank, || format!("spectrum {idx}: brute-force rank too high"))?;
    }
    Ok(format!("20 spectra, {relations} relations with |k| <= 6 all in the lattice"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("exact normal-form re-substitution", resubstitution),
        ("resonance shape of normal forms", resonance_shape),
        ("multiplier equation", multiplier_equation),
        ("center-manifold containment", containment),
        ("exponent law k = 2l - 1", exponent_law),
        ("return-map identity", identity),
        ("cyclicity l - 1", cyclicity),
        ("resonance lattice vs brute force", lattice),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[{}] {title}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("[{}] {title}: FAIL ({why}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
