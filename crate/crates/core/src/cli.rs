//! Command-line front end. Reports are `key: value` lines; curves are CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::algebra::{fmt_rat, TruncatedSeries};
use crate::hopf::{
    self, build_perturbation, count_cycles, displacement, estimate_leading_exponent, fit_window, log_grid,
    search_cycles, straighten, to_cylindrical, verify_identity, HopfConfig, HopfError, JcEvaluator,
    PerturbationFamily, RealPoly, StraightenedSystem, Tolerances,
};
use crate::multiplier::{
    analyze, check_vanishing_on_manifold, verify_multiplier, MultiplierAnalysis, MultiplierError, ResidualReport, SurfaceFactor};
use crate::normalform::{classify_adaptive, normalize_with, Classification, NormalFormError, NormalizeOptions};
use crate::vfield::{check_hypothesis_h, complexify, parse_system, RealSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
/// `classify` only: no nonzero focus quantity through the working degree.
pub const EXIT_CENTER_CANDIDATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hopfnf", version, about = "Normal forms, inverse Jacobian multipliers and Hopf cyclicity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonance lattice and the rank-one hypothesis.
    Check { path: PathBuf },
    /// Normal form coefficients and the normalizing transform.
    Normalize(SymbolicArgs),
    /// Center candidate or focus, with vanishing multiplicity.
    Classify(SymbolicArgs),
    /// Inverse Jacobian multiplier and its residual.
    Multiplier(SymbolicArgs),
    /// Displacement function on an `r₀` grid, as CSV.
    Displacement(DisplacementArgs),
    /// Small-amplitude limit cycles of the perturbed system.
    Cycles(CycleArgs),
    /// Multiplier equation, center-manifold containment and the return-map identity.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SymbolicArgs {
    pub path: PathBuf,
    /// Truncation degree; adaptive when omitted.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Proceed when extra resonances exist, certifying the shape at working degree.
    #[arg(long)]
    pub allow_extra_resonance: bool,
}

#[derive(Debug, Args)]
pub struct NumericArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub atol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub newton_tol: f64,
}

impl NumericArgs {
    fn config(&self) -> Result<HopfConfig, String> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol), ("newton-tol", self.newton_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("--{name} must be positive"));
            }
        }
        Ok(HopfConfig {
            tol: Tolerances { rtol: self.rtol, atol: self.atol, ..Tolerances::default() },
            newton_tol: self.newton_tol,
            ..HopfConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long = "epsilon", default_value_t = 0.0, allow_hyphen_values = true)]
    pub epsilon: f64,
    /// Comma-separated `a₁,…,a_{l−1}`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    /// Constant term of the extended family.
    #[arg(long, allow_hyphen_values = true)]
    pub a0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DisplacementArgs {
    #[command(flatten)]
    pub sym: SymbolicArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    #[command(flatten)]
    pub sym: SymbolicArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 0.1)]
    pub rmax: f64,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Search the family for `l − 1` cycles instead of using the given parameters.
    #[arg(long)]
    pub search: bool,
    /// Let the search use the constant term `a₀`.
    #[arg(long)]
    pub extended: bool,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub sym: SymbolicArgs,
    /// Adds `x²` to the multiplier before checking (negative control).
    #[arg(long)]
    pub corrupt_multiplier: bool,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

/// Outcome of one command: text for standard output and an exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String, code: i32) -> Self {
        Outcome { stdout, stderr: String::new(), code }
    }

    fn err(msg: impl Into<String>, code: i32) -> Self {
        Outcome { stdout: String::new(), stderr: msg.into(), code }
    }
}

struct Failure(String, i32);

impl From<NormalFormError> for Failure {
    fn from(e: NormalFormError) -> Self {
        let code = if matches!(e, NormalFormError::HypothesisFailed(_)) { EXIT_NEGATIVE } else { EXIT_INPUT };
        Failure(e.to_string(), code)
    }
}

impl From<MultiplierError> for Failure {
    fn from(e: MultiplierError) -> Self {
        match e {
            MultiplierError::NormalForm(e) => e.into(),
            e => Failure(e.to_string(), EXIT_INPUT),
        }
    }
}

impl From<crate::algebra::AlgebraError> for Failure {
    fn from(e: crate::algebra::AlgebraError) -> Self {
        Failure(e.to_string(), EXIT_INPUT)
    }
}

impl From<HopfError> for Failure {
    fn from(e: HopfError) -> Self {
        let code = match e {
            HopfError::Invalid(_) | HopfError::Algebra(_) | HopfError::System(_) | HopfError::NotHyperbolic => EXIT_INPUT,
            _ => EXIT_NUMERIC,
        };
        Failure(e.to_string(), code)
    }
}

fn load(path: &Path) -> Result<RealSystem, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display()), EXIT_INPUT))?;
    parse_system(&text).map_err(|e| Failure(format!("{}: {e}", path.display()), EXIT_INPUT))
}

fn opts(a: &SymbolicArgs) -> NormalizeOptions {
    NormalizeOptions { require_hypothesis: !a.allow_extra_resonance }
}

fn fmt_vec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(i64::to_string).collect();
    format!("({})", parts.join(","))
}

fn fmt_f64s(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    parts.join(", ")
}

fn names(sys: &RealSystem) -> Vec<String> {
    sys.variable_names()
}

fn show(s: &TruncatedSeries, names: &[String]) -> String {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    s.display_with(&refs)
}

fn complex_names(n: usize) -> Vec<String> {
    let mut v = vec!["u".to_string(), "v".to_string()];
    v.extend((3..=n).map(|j| format!("w{j}")));
    v
}

fn cmd_check(path: &Path) -> Result<Outcome, Failure> {
    let sys = load(path)?;
    let r = check_hypothesis_h(&sys);
    let spec = sys.spectrum();
    let mut out = String::new();
    writeln!(out, "dimension: {}", sys.dim()).unwrap();
    let eig: Vec<String> = spec.lambda.iter().map(ToString::to_string).collect();
    writeln!(out, "spectrum: {}", eig.join(", ")).unwrap();
    writeln!(out, "lattice_rank: {}", r.lattice.rank).unwrap();
    let gens: Vec<String> = r.lattice.generators.iter().map(|g| fmt_vec(g)).collect();
    writeln!(out, "lattice_generators: {}", if gens.is_empty() { "none".into() } else { gens.join(" ") }).unwrap();
    writeln!(out, "resonance_rank: {}", r.resonance_rank).unwrap();
    writeln!(out, "diagonalizable: {}", r.diagonalizable).unwrap();
    writeln!(out, "hyperbolic: {}", r.all_hyperbolic).unwrap();
    writeln!(out, "same_sign: {}", r.same_sign).unwrap();
    writeln!(out, "extra_resonance: {}", r.extra_resonance.as_deref().map_or("none".into(), fmt_vec)).unwrap();
    writeln!(out, "hypothesis: {}", if r.holds { "holds" } else { "fails" }).unwrap();
    Ok(Outcome::ok(out, if r.holds { EXIT_OK } else { EXIT_NEGATIVE }))
}

fn cmd_normalize(a: &SymbolicArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.path)?;
    let c = complexify(&sys);
    let (nf, t) = match a.degree {
        Some(d) => normalize_with(&c, d, opts(a))?,
        None => {
            let (_, nf, t) = classify_adaptive(&c, None, opts(a))?;
            (nf, t)
        }
    };
    let n = sys.dim();
    let cn = complex_names(n);
    let s_name = vec!["s".to_string()];
    let mut out = String::new();
    writeln!(out, "degree: {}", nf.degree).unwrap();
    writeln!(out, "shape_verified: {}", nf.resonance_shape_verified).unwrap();
    writeln!(out, "g1: {}", show(&nf.g1, &s_name)).unwrap();
    writeln!(out, "g2: {}", show(&nf.g2, &s_name)).unwrap();
    for (j, g) in nf.gj.iter().enumerate() {
        writeln!(out, "g{}: {}", j + 3, show(g, &s_name)).unwrap();
    }
    for (i, p) in t.psi().components().iter().enumerate() {
        writeln!(out, "psi{}: {}", i + 1, show(p, &cn)).unwrap();
    }
    for r in &nf.records {
        writeln!(out, "degree_{}: resonant {} nonresonant {}", r.degree, r.resonant_terms, r.nonresonant_terms).unwrap();
    }
    Ok(Outcome::ok(out, EXIT_OK))
}

fn classification_line(c: &Classification) -> String {
    match c {
        Classification::CenterCandidate(n) => format!("center-candidate({n})"),
        Classification::Focus { l, stability, .. } => format!("focus, l={l}, cyclicity={}, {stability}", l - 1),
    }
}

fn cmd_classify(a: &SymbolicArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.path)?;
    let (c, nf, _) = classify_adaptive(&complexify(&sys), a.degree, opts(a))?;
    let mut out = String::new();
    writeln!(out, "classification: {}", classification_line(&c)).unwrap();
    writeln!(out, "degree: {}", nf.degree).unwrap();
    let code = match &c {
        Classification::CenterCandidate(_) => {
            writeln!(out, "kind: center-candidate").unwrap();
            EXIT_CENTER_CANDIDATE
        }
        Classification::Focus { m, l, stability, focus_quantities } => {
            writeln!(out, "kind: focus").unwrap();
            writeln!(out, "l: {l}").unwrap();
            writeln!(out, "cyclicity: {}", l - 1).unwrap();
            writeln!(out, "stability: {stability}").unwrap();
            writeln!(out, "first_nonzero_index: {m}").unwrap();
            let q: Vec<String> = focus_quantities.iter().map(fmt_rat).collect();
            writeln!(out, "focus_quantities: {}", q.join(", ")).unwrap();
            EXIT_OK
        }
    };
    Ok(Outcome::ok(out, code))
}

fn residual_line(r: &ResidualReport) -> String {
    match r.lowest_nonzero_degree {
        None => format!("zero through degree {}", r.checked_degree),
        Some(d) => format!("nonzero at degree {d}"),
    }
}

fn default_degree(sys: &RealSystem, a: &SymbolicArgs) -> Result<usize, Failure> {
    if let Some(d) = a.degree {
        return Ok(d);
    }
    let (c, ..) = classify_adaptive(&complexify(sys), None, opts(a))?;
    Ok(match c {
        Classification::Focus { l, .. } => 2 * l + 4,
        Classification::CenterCandidate(n) => n.min(8),
    })
}

fn cmd_multiplier(a: &SymbolicArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.path)?;
    let degree = default_degree(&sys, a)?;
    let an = analyze(&sys, degree, opts(a))?;
    let nm = names(&sys);
    let m = &an.multiplier;
    let mut out = String::new();
    writeln!(out, "classification: {}", classification_line(&an.classification)).unwrap();
    writeln!(out, "degree: {degree}").unwrap();
    writeln!(out, "constant: {}", fmt_rat(&m.constant)).unwrap();
    for f in &m.surface_factors {
        match f {
            SurfaceFactor::Real { index, p } => {
                writeln!(out, "factor: {} - ({})", nm[*index], show(p, &nm)).unwrap();
            }
            SurfaceFactor::Pair { indices: (i, j), p: (pa, pb) } => {
                writeln!(out, "factor: ({} - ({}))^2 + ({} - ({}))^2", nm[*i], show(pa, &nm), nm[*j], show(pb, &nm)).unwrap();
            }
        }
    }
    match &m.radial {
        Some(r) => {
            writeln!(out, "l: {}", r.l).unwrap();
            writeln!(out, "radial: ((x - q1)^2 + (y - q2)^2)^{}", r.l).unwrap();
            writeln!(out, "q1: {}", show(&r.q1, &nm)).unwrap();
            writeln!(out, "q2: {}", show(&r.q2, &nm)).unwrap();
            writeln!(out, "h: {}", show(&m.h, &["rho".to_string()])).unwrap();
        }
        None => writeln!(out, "l: none").unwrap(),
    }
    writeln!(out, "V: {}", show(&m.unit, &nm)).unwrap();
    writeln!(out, "J: {}", show(&m.j, &nm)).unwrap();
    writeln!(out, "residual: {}", residual_line(&an.pde)).unwrap();
    let code = if an.pde.is_zero() { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(Outcome::ok(out, code))
}

/// Straightened system and, for a focus, its `l` and stability.
fn prepare(sys: &RealSystem, a: &SymbolicArgs) -> Result<(StraightenedSystem, Classification), Failure> {
    let degree = default_degree(sys, a)?;
    let (c, _, t) = classify_adaptive(&complexify(sys), Some(degree), opts(a))?;
    Ok((straighten(sys, &t)?, c))
}

fn family(args: &FamilyArgs, c: &Classification) -> Result<Option<PerturbationFamily>, Failure> {
    if args.epsilon == 0.0 && args.a.is_empty() && args.a0.is_none() {
        return Ok(None);
    }
    let l = c
        .vanishing_multiplicity()
        .ok_or_else(|| Failure("perturbation family needs a focus".into(), EXIT_INPUT))?;
    let mut a = args.a.clone();
    if a.is_empty() {
        a = vec![0.0; l - 1];
    }
    if a.len() != l - 1 {
        return Err(Failure(format!("--a needs {} values for l = {l}", l - 1), EXIT_INPUT));
    }
    Ok(Some(PerturbationFamily { l, a, a0: args.a0, eps: args.epsilon }))
}

fn cmd_displacement(a: &DisplacementArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.sym.path)?;
    let cfg = a.numeric.config().map_err(|e| Failure(e, EXIT_INPUT))?;
    let (base, c) = prepare(&sys, &a.sym)?;
    let fam = family(&a.family, &c)?;
    let st = match &fam {
        Some(f) => build_perturbation(&base, f)?,
        None => base,
    };
    let window = fit_window(c.vanishing_multiplicity().unwrap_or(2));
    let (lo, hi) = (a.rmin.unwrap_or(window.0), a.rmax.unwrap_or(window.1));
    if !(lo > 0.0 && hi > lo) || a.grid == 0 {
        return Err(Failure("need 0 < rmin < rmax and grid ≥ 1".into(), EXIT_INPUT));
    }
    let curve = displacement(&to_cylindrical(&st, cfg.r_bound), &log_grid(lo, hi, a.grid), a.family.epsilon, &cfg)?;
    let csv = curve.to_csv();
    let mut summary = String::new();
    writeln!(summary, "classification: {}", classification_line(&c)).unwrap();
    writeln!(summary, "rows: {}", curve.samples.len()).unwrap();
    if fam.is_none() {
        match (c.vanishing_multiplicity(), estimate_leading_exponent(&curve, (lo, hi))) {
            (Some(l), Ok(fit)) => {
                writeln!(summary, "k_hat: {:.6}", fit.k).unwrap();
                writeln!(summary, "k_expected: {}", 2 * l - 1).unwrap();
                writeln!(summary, "fit_residual: {:.3e}", fit.residual).unwrap();
            }
            (_, Ok(fit)) => writeln!(summary, "k_hat: {:.6}", fit.k).unwrap(),
            (_, Err(_)) => writeln!(summary, "k_hat: none (displacement below noise floor)").unwrap(),
        }
    }
    match &a.out {
        Some(p) => {
            std::fs::write(p, &csv).map_err(|e| Failure(format!("{}: {e}", p.display()), EXIT_INPUT))?;
            writeln!(summary, "csv: {}", p.display()).unwrap();
            Ok(Outcome::ok(summary, EXIT_OK))
        }
        None => Ok(Outcome { stdout: csv, stderr: summary, code: EXIT_OK }),
    }
}

fn cycle_lines(out: &mut String, r: &hopf::CycleReport) {
    writeln!(out, "count: {}", r.count()).unwrap();
    writeln!(out, "bound: {}", r.bound).unwrap();
    writeln!(out, "scanned_to: {:.6e}", r.window_end).unwrap();
    writeln!(out, "roots: {}", if r.roots.is_empty() { "none".into() } else { fmt_f64s(&r.roots) }).unwrap();
    if !r.unresolved_suspects.is_empty() {
        writeln!(out, "unresolved_near: {}", fmt_f64s(&r.unresolved_suspects)).unwrap();
    }
    writeln!(out, "within_bound: {}", r.within_bound()).unwrap();
}

fn cmd_cycles(a: &CycleArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.sym.path)?;
    let cfg = a.numeric.config().map_err(|e| Failure(e, EXIT_INPUT))?;
    let (base, c) = prepare(&sys, &a.sym)?;
    let Classification::Focus { l, stability, .. } = &c else {
        return Err(Failure("cycle counting needs a focus".into(), EXIT_NEGATIVE));
    };
    let mut out = String::new();
    writeln!(out, "classification: {}", classification_line(&c)).unwrap();
    let report = if a.search {
        let hit = search_cycles(&base, *l, *stability, a.extended, a.grid, &cfg)?;
        writeln!(out, "family: {}", if a.extended { "extended" } else { "basic" }).unwrap();
        let Some(hit) = hit else {
            writeln!(out, "count: 0").unwrap();
            return Ok(Outcome::ok(out, EXIT_NEGATIVE));
        };
        writeln!(out, "epsilon: {}", hit.family.eps).unwrap();
        writeln!(out, "a: {}", fmt_f64s(&hit.family.a)).unwrap();
        writeln!(out, "a0: {}", hit.family.a0.map_or("none".into(), |v| format!("{v:.6e}"))).unwrap();
        writeln!(out, "rmax: {:.6e}", hit.r_max).unwrap();
        hit.report
    } else {
        let fam = family(&a.family, &c)?.unwrap_or_else(|| PerturbationFamily::zero(*l));
        let st = build_perturbation(&base, &fam)?;
        count_cycles(&to_cylindrical(&st, cfg.r_bound), a.rmax, a.grid, *l, &cfg)?
    };
    cycle_lines(&mut out, &report);
    let code = if report.within_bound() && (!a.search || report.count() == report.bound) { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(Outcome::ok(out, code))
}

/// Probe points `(r₀, s₀)` off the invariant hyperplanes.
pub fn identity_probes(s_dim: usize) -> Vec<(f64, Vec<f64>)> {
    [0.02, 0.03, 0.04, 0.05, 0.06]
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, (0..s_dim).map(|j| 0.01 * (1.0 + 0.5 * ((i + j) % 3) as f64)).collect()))
        .collect()
}

/// Relative residuals of the return-map identity for a straightened system,
/// with `J` from the multiplier of that system.
pub fn identity_residuals(
    st: &StraightenedSystem,
    analysis: &MultiplierAnalysis,
    cfg: &HopfConfig,
) -> Result<Vec<f64>, HopfError> {
    let f = to_cylindrical(st, cfg.r_bound);
    let jc = JcEvaluator { j: RealPoly::from_series(&analysis.multiplier.j) };
    identity_probes(f.s_dim())
        .iter()
        .map(|(r, s)| verify_identity(&f, &jc, *r, s, cfg).map(|c| c.relative))
        .collect()
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, Failure> {
    let sys = load(&a.sym.path)?;
    let cfg = a.numeric.config().map_err(|e| Failure(e, EXIT_INPUT))?;
    let degree = default_degree(&sys, &a.sym)?;
    let mut an = analyze(&sys, degree, opts(&a.sym))?;
    if a.corrupt_multiplier {
        let n = sys.dim();
        let x = TruncatedSeries::variable(n, degree, 0);
        an.multiplier.j = &an.multiplier.j + &(&x * &x);
        an.pde = verify_multiplier(&sys, &an.multiplier.j, degree)?;
        an.containment = check_vanishing_on_manifold(&an.multiplier.j, &an.graph)?;
    }
    let mut out = String::new();
    writeln!(out, "classification: {}", classification_line(&an.classification)).unwrap();
    writeln!(out, "degree: {degree}").unwrap();
    writeln!(out, "multiplier_equation: {}", residual_line(&an.pde)).unwrap();
    writeln!(out, "center_manifold_containment: {}", residual_line(&an.containment)).unwrap();
    let mut ok = an.pde.is_zero() && an.containment.is_zero();

    // the identity is checked on the straightened system with its own multiplier
    let st = straighten(&sys, &an.transform)?;
    let mut st_an = analyze(&st.system, degree, opts(&a.sym))?;
    if a.corrupt_multiplier {
        let x = TruncatedSeries::variable(sys.dim(), degree, 0);
        st_an.multiplier.j = &st_an.multiplier.j + &(&x * &x);
    }
    writeln!(out, "straightening: {}", if st.exact { "exact".to_string() } else { format!("defect at degree {}", st.defect_degree.map_or("?".into(), |d| d.to_string())) }).unwrap();
    let res = identity_residuals(&st, &st_an, &cfg)?;
    let worst = res.iter().copied().fold(0.0, f64::max);
    writeln!(out, "identity_residuals: {}", fmt_f64s(&res)).unwrap();
    writeln!(out, "identity_max: {worst:.3e}").unwrap();
    ok &= worst <= 1e-4;
    writeln!(out, "result: {}", if ok { "pass" } else { "fail" }).unwrap();
    Ok(Outcome::ok(out, if ok { EXIT_OK } else { EXIT_NEGATIVE }))
}

pub fn execute(cli: &Cli) -> Outcome {
    let r = match &cli.command {
        Command::Check { path } => cmd_check(path),
        Command::Normalize(a) => cmd_normalize(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Multiplier(a) => cmd_multiplier(a),
        Command::Displacement(a) => cmd_displacement(a),
        Command::Cycles(a) => cmd_cycles(a),
        Command::Verify(a) => cmd_verify(a),
    };
    r.unwrap_or_else(|Failure(msg, code)| Outcome::err(format!("error: {msg}\n"), code))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome::err(text, code)
            } else {
                Outcome::ok(text, code)
            }
        }
    }
}
