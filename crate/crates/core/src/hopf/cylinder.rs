use std::f64::consts::PI;
use std::fmt::Write;

use rayon::prelude::*;

use super::{build_perturbation, check_hyperbolic, integrate, HopfConfig, HopfError, PerturbationFamily, RealPoly, StraightenedSystem};
use crate::normalform::Stability;

/// `Θ, R, S` at one point of the cylinder.
#[derive(Clone, Debug, PartialEq)]
pub struct CylParts {
    pub theta_term: f64,
    pub r_term: f64,
    pub s_term: Vec<f64>,
}

/// The field in `(θ, r, s)`, with all divisions by `r` done on exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct CylindricalField {
    n: usize,
    a: Vec<Vec<f64>>,
    g: Vec<RealPoly>,
    r_bound: f64,
}

pub fn to_cylindrical(sys: &StraightenedSystem, r_bound: f64) -> CylindricalField {
    CylindricalField { n: sys.dim(), a: sys.a.clone(), g: sys.g.clone(), r_bound }
}

impl CylindricalField {
    /// Number of `s` coordinates.
    pub fn s_dim(&self) -> usize {
        self.n - 2
    }

    pub fn parts(&self, theta: f64, r: f64, s: &[f64]) -> CylParts {
        let (sn, cs) = theta.sin_cos();
        // g_i / r
        let q: Vec<f64> = self.g.iter().map(|p| p.eval_cylindrical(cs, sn, r, s, 1)).collect();
        let radial = cs * q[0] + sn * q[1];
        CylParts {
            theta_term: cs * q[1] - sn * q[0],
            r_term: r * radial,
            s_term: (0..self.s_dim()).map(|j| q[j + 2] - s[j] * radial).collect(),
        }
    }

    /// `(dr/dθ, ds/dθ)`.
    pub fn eval(&self, theta: f64, r: f64, s: &[f64], out: &mut [f64]) -> Result<(), HopfError> {
        if r.abs() > self.r_bound || !r.is_finite() {
            return Err(HopfError::OutOfValidity { theta, r });
        }
        let p = self.parts(theta, r, s);
        let denom = 1.0 + p.theta_term;
        if denom <= 0.5 {
            return Err(HopfError::OutOfValidity { theta, r });
        }
        out[0] = p.r_term / denom;
        for j in 0..self.s_dim() {
            let lin: f64 = self.a[j].iter().zip(s).map(|(a, v)| a * v).sum();
            out[j + 1] = (lin + p.s_term[j]) / denom;
        }
        Ok(())
    }

    /// Divergence of `(p, As + q)` in `(r, s)`, by central differences.
    fn divergence(&self, theta: f64, y: &[f64]) -> Result<f64, HopfError> {
        let mut div = 0.0;
        let mut plus = vec![0.0; y.len()];
        let mut minus = vec![0.0; y.len()];
        for i in 0..y.len() {
            let h = 1e-6 * y[i].abs().max(1e-3);
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i] += h;
            ym[i] -= h;
            self.eval(theta, yp[0], &yp[1..], &mut plus)?;
            self.eval(theta, ym[0], &ym[1..], &mut minus)?;
            div += (plus[i] - minus[i]) / (2.0 * h);
        }
        Ok(div)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoincareResult {
    pub r: f64,
    pub s: Vec<f64>,
    pub err_est: f64,
}

fn flow(f: &CylindricalField, t0: f64, t1: f64, r0: f64, s0: &[f64], cfg: &HopfConfig) -> Result<PoincareResult, HopfError> {
    let mut y0 = vec![r0];
    y0.extend_from_slice(s0);
    let tr = integrate(|t, y, dy| f.eval(t, y[0], &y[1..], dy), t0, t1, &y0, &cfg.tol)?;
    Ok(PoincareResult { r: tr.end[0], s: tr.end[1..].to_vec(), err_est: tr.err_est })
}

/// State after one revolution starting on `θ = 0`.
pub fn poincare_map(f: &CylindricalField, r0: f64, s0: &[f64], cfg: &HopfConfig) -> Result<PoincareResult, HopfError> {
    flow(f, 0.0, 2.0 * PI, r0, s0, cfg)
}

/// Integrates backwards from `θ = 2π` to `0`.
pub fn poincare_map_inverse(f: &CylindricalField, r: f64, s: &[f64], cfg: &HopfConfig) -> Result<PoincareResult, HopfError> {
    flow(f, 2.0 * PI, 0.0, r, s, cfg)
}

fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for i in c + 1..n {
            let k = m[i][c] / m[c][c];
            for j in c..n {
                m[i][j] -= k * m[c][j];
            }
            b[i] -= k * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let acc: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (b[i] - acc) / m[i][i];
    }
    Some(x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceSolution {
    pub s: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Return map at the solution.
    pub map: PoincareResult,
}

/// Newton on `s₀ ↦ P_s(r₀, s₀) − s₀`, seeded at `s₀ = 0`.
pub fn solve_slice(f: &CylindricalField, r0: f64, cfg: &HopfConfig) -> Result<SliceSolution, HopfError> {
    let m = f.s_dim();
    let mut s = vec![0.0; m];
    for it in 0..=cfg.newton_max_iter {
        let p = poincare_map(f, r0, &s, cfg)?;
        let res: Vec<f64> = p.s.iter().zip(&s).map(|(a, b)| a - b).collect();
        let rn = norm(&res);
        if rn <= cfg.newton_tol {
            return Ok(SliceSolution { s, iterations: it, residual: rn, map: p });
        }
        if it == cfg.newton_max_iter {
            return Err(HopfError::NewtonFailed { r0, residual: rn });
        }
        let h = cfg.newton_fd_step * norm(&s).max(1.0);
        let mut jac = vec![vec![0.0; m]; m];
        for k in 0..m {
            let mut sk = s.clone();
            sk[k] += h;
            let pk = poincare_map(f, r0, &sk, cfg)?;
            for i in 0..m {
                jac[i][k] = ((pk.s[i] - sk[i]) - res[i]) / h;
            }
        }
        let step = solve_linear(jac, res).ok_or(HopfError::SingularJacobian(r0))?;
        for (si, d) in s.iter_mut().zip(step) {
            *si -= d;
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementSample {
    pub r0: f64,
    pub d: f64,
    pub s_star: Vec<f64>,
    pub newton_iters: usize,
    pub err_est: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementCurve {
    pub eps: f64,
    pub samples: Vec<DisplacementSample>,
}

impl DisplacementCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r0,d,eps,newton_iters,err_est\n");
        for s in &self.samples {
            writeln!(out, "{:e},{:e},{:e},{},{:e}", s.r0, s.d, self.eps, s.newton_iters, s.err_est).unwrap();
        }
        out
    }
}

fn displacement_at(f: &CylindricalField, r0: f64, cfg: &HopfConfig) -> Result<DisplacementSample, HopfError> {
    let sol = solve_slice(f, r0, cfg)?;
    Ok(DisplacementSample {
        r0,
        d: sol.map.r - r0,
        s_star: sol.s,
        newton_iters: sol.iterations,
        err_est: sol.map.err_est,
    })
}

/// `d(r₀, ε)` on the grid, sorted by `r₀`. Grid points are evaluated in
/// parallel; the result does not depend on the schedule.
pub fn displacement(f: &CylindricalField, grid: &[f64], eps: f64, cfg: &HopfConfig) -> Result<DisplacementCurve, HopfError> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let samples = grid.par_iter().map(|&r0| displacement_at(f, r0, cfg)).collect::<Result<Vec<_>, _>>()?;
    Ok(DisplacementCurve { eps, samples })
}

/// `count` points spaced evenly in `log r` on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Default fit window for vanishing multiplicity `l`.
pub fn fit_window(l: usize) -> (f64, f64) {
    if l <= 2 {
        (1e-3, 10f64.powf(-1.5))
    } else {
        (1e-2, 1e-1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub k: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `log|d|` against `log r₀` on the window, skipping
/// samples within 100 error estimates of zero.
pub fn estimate_leading_exponent(curve: &DisplacementCurve, window: (f64, f64)) -> Result<ExponentFit, HopfError> {
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .filter(|s| s.r0 >= window.0 * (1.0 - 1e-12) && s.r0 <= window.1 * (1.0 + 1e-12))
        .filter(|s| s.d.abs() > 100.0 * s.err_est && s.d != 0.0)
        .map(|s| (s.r0.ln(), s.d.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(HopfError::NoiseFloor);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let k = sxy / sxx;
    let intercept = my - k * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - k * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentFit { k, intercept, residual, points: pts.len() })
}

/// `J_c(0, r, s) = J(r, 0, rs) / (r^{n−1}(1 + Θ(0, r, s)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct JcEvaluator {
    pub j: RealPoly,
}

impl JcEvaluator {
    pub fn eval(&self, f: &CylindricalField, r: f64, s: &[f64]) -> f64 {
        let shift = self.j.nvars() as i32 - 1;
        let theta_term = f.parts(0.0, r, s).theta_term;
        self.j.eval_cylindrical(1.0, 0.0, r, s, shift) / (1.0 + theta_term)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative: f64,
    /// `det DP` by central differences.
    pub det: f64,
    /// Same determinant from the integrated divergence, as a cross-check.
    pub det_liouville: f64,
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(c, p);
            det = -det;
        }
        det *= m[c][c];
        for i in c + 1..n {
            let k = m[i][c] / m[c][c];
            for j in c..n {
                m[i][j] -= k * m[c][j];
            }
        }
    }
    det
}

/// Checks `J_c(0, P(r₀,s₀)) = J_c(0, r₀, s₀)·det DP(r₀, s₀)` at `ε = 0`.
pub fn verify_identity(
    f: &CylindricalField,
    jc: &JcEvaluator,
    r0: f64,
    s0: &[f64],
    cfg: &HopfConfig,
) -> Result<IdentityCheck, HopfError> {
    let p = poincare_map(f, r0, s0, cfg)?;
    let lhs = jc.eval(f, p.r, &p.s);
    let base: Vec<f64> = std::iter::once(r0).chain(s0.iter().copied()).collect();
    let dim = base.len();
    let mut jac = vec![vec![0.0; dim]; dim];
    for k in 0..dim {
        let h = cfg.identity_fd_step * base[k].abs().max(1e-3);
        let mut up = base.clone();
        let mut dn = base.clone();
        up[k] += h;
        dn[k] -= h;
        let pu = poincare_map(f, up[0], &up[1..], cfg)?;
        let pd = poincare_map(f, dn[0], &dn[1..], cfg)?;
        let vu: Vec<f64> = std::iter::once(pu.r).chain(pu.s).collect();
        let vd: Vec<f64> = std::iter::once(pd.r).chain(pd.s).collect();
        for i in 0..dim {
            jac[i][k] = (vu[i] - vd[i]) / (2.0 * h);
        }
    }
    let det = determinant(jac);
    // Liouville: d/dθ log det = div along the orbit
    let mut y0 = base.clone();
    y0.push(0.0);
    let tr = integrate(
        |t, y, dy| {
            f.eval(t, y[0], &y[1..dim], &mut dy[..dim])?;
            dy[dim] = f.divergence(t, &y[..dim])?;
            Ok(())
        },
        0.0,
        2.0 * PI,
        &y0,
        &cfg.tol,
    )?;
    let det_liouville = tr.end[dim].exp();
    let rhs = jc.eval(f, r0, s0) * det;
    let scale = lhs.abs().max(rhs.abs());
    if scale < 1e-300 {
        return Err(HopfError::Degenerate);
    }
    Ok(IdentityCheck { lhs, rhs, relative: (lhs - rhs).abs() / scale, det, det_liouville })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    /// Positive roots of `d(·, ε)`, ascending.
    pub roots: Vec<f64>,
    pub bound: usize,
    /// Grid points where `|d|` dips close to zero without a sign change.
    pub unresolved_suspects: Vec<f64>,
    /// Largest `r₀` scanned; below `r_max` when orbits escape further out.
    pub window_end: f64,
    pub grid: Vec<(f64, f64)>,
}

impl CycleReport {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn within_bound(&self) -> bool {
        self.count() <= self.bound
    }
}

/// Scans `d` on an even grid in `(0, r_max]`, then bisects every sign change.
///
/// Where orbits leave the validity region before returning, the return map
/// does not exist and no cycle can enclose the starting point, so the scan
/// stops at the last grid point below the first escape (`window_end`).
pub fn count_cycles(
    f: &CylindricalField,
    r_max: f64,
    grid: usize,
    l: usize,
    cfg: &HopfConfig,
) -> Result<CycleReport, HopfError> {
    if grid < 2 || r_max <= 0.0 {
        return Err(HopfError::Invalid("need a grid of at least 2 points and r_max > 0".into()));
    }
    let rs: Vec<f64> = (1..=grid).map(|i| r_max * i as f64 / grid as f64).collect();
    let samples: Vec<Result<DisplacementSample, HopfError>> = rs.par_iter().map(|&r| displacement_at(f, r, cfg)).collect();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in samples {
        match s {
            Ok(s) => pts.push((s.r0, s.d)),
            Err(HopfError::OutOfValidity { .. } | HopfError::StepUnderflow(_)) if !pts.is_empty() => break,
            Err(e) => return Err(e),
        }
    }
    let window_end = pts.last().map_or(0.0, |p| p.0);
    let brackets: Vec<(f64, f64)> =
        pts.windows(2).filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum()).map(|w| (w[0].0, w[1].0)).collect();
    let roots = brackets
        .par_iter()
        .map(|&(mut lo, mut hi)| {
            let mut dlo = displacement_at(f, lo, cfg)?.d;
            while hi - lo > cfg.root_tol * r_max {
                let mid = 0.5 * (lo + hi);
                let dm = displacement_at(f, mid, cfg)?.d;
                if dm == 0.0 {
                    return Ok(mid);
                }
                if dm.signum() == dlo.signum() {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect::<Result<Vec<f64>, HopfError>>()?;
    let dmax = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let unresolved_suspects = pts
        .windows(3)
        .filter(|w| {
            let same = w[0].1.signum() == w[1].1.signum() && w[1].1.signum() == w[2].1.signum();
            let dip = w[1].1.abs() < w[0].1.abs() && w[1].1.abs() < w[2].1.abs();
            same && dip && w[1].1.abs() < 1e-3 * dmax
        })
        .map(|w| w[1].0)
        .collect();
    Ok(CycleReport { roots, bound: l.saturating_sub(1), unresolved_suspects, window_end, grid: pts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchHit {
    pub family: PerturbationFamily,
    pub r_max: f64,
    pub report: CycleReport,
}

/// Coefficients `c_0 … c_{l−1}` of `σ·Π_{i=1}^{l−1}(t − i)` in powers of `t`.
fn spread_roots(l: usize, sigma: f64) -> Vec<f64> {
    let mut c = vec![sigma];
    for i in 1..l {
        let mut next = vec![0.0; c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k + 1] += v;
            next[k] -= v * i as f64;
        }
        c = next;
    }
    c
}

/// Looks for a member of the perturbation family with `l − 1` cycles.
///
/// To leading order `d(r₀) ≈ r₀(2π h(ρ) + C ρ^{l−1})` with `ρ = r₀²`, where
/// `C` is read off the unperturbed displacement at `r₀ = √ε`. The first
/// candidate places the roots of that polynomial at `ρ = ε, 2ε, …`; the
/// remaining ones are the sign patterns of unit coefficients. Each is tried
/// along decreasing `ε`. With `extended = false` the constant term `a₀` is
/// held at zero, which leaves room for `l − 2` roots only. Returns the best
/// member found.
pub fn search_cycles(
    base: &StraightenedSystem,
    l: usize,
    stability: Stability,
    extended: bool,
    grid: usize,
    cfg: &HopfConfig,
) -> Result<Option<SearchHit>, HopfError> {
    check_hyperbolic(&base.system)?;
    if l < 2 {
        return Err(HopfError::Invalid(format!("cycle search needs l ≥ 2, got {l}")));
    }
    let sigma = match stability {
        Stability::Unstable => 1.0,
        Stability::Stable => -1.0,
    };
    let unperturbed = to_cylindrical(base, cfg.r_bound);
    let free = if extended { l } else { l - 1 };
    let mut best: Option<SearchHit> = None;
    for eps in [0.02f64, 0.01, 0.005] {
        let r_ref = eps.sqrt();
        let c = displacement_at(&unperturbed, r_ref, cfg)?.d / r_ref.powi(2 * l as i32 - 1);
        let c = if c.is_finite() && c != 0.0 { c } else { sigma * 2.0 * PI };
        // d/r₀ = C ρ^{l−1} + 2π Σ ε^{l−s} a_s ρ^s; match C·Π(ρ − iε) in powers of t = ρ/ε
        let (roots, shift) = if extended { (l - 1, 0) } else { (l - 2, 1) };
        let spread = spread_roots(roots + 1, 1.0);
        let mut a = vec![0.0; l - 1];
        let mut a0 = extended.then_some(0.0);
        for (k, v) in spread.iter().enumerate().take(roots) {
            let s = k + shift;
            let val = c * v / (2.0 * PI * eps);
            if s == 0 {
                a0 = Some(val);
            } else {
                a[s - 1] = val;
            }
        }
        let mut candidates = vec![(a0, a)];
        for mask in 0..(1u32 << free) {
            let sgn = |b: usize| if mask >> b & 1 == 1 { -1.0 } else { 1.0 };
            let (a0, off) = if extended { (Some(sgn(0)), 1) } else { (None, 0) };
            candidates.push((a0, (0..l - 1).map(|i| sgn(i + off)).collect()));
        }
        for (a0, a) in candidates {
            let family = PerturbationFamily { l, a, a0, eps };
            let r_max = ((l + 1) as f64 * eps).sqrt().min(0.5 * cfg.r_bound);
            let pert = build_perturbation(base, &family)?;
            let f = to_cylindrical(&pert, cfg.r_bound);
            let report = match count_cycles(&f, r_max, grid, l, cfg) {
                Ok(r) => r,
                Err(HopfError::OutOfValidity { .. }) => continue,
                Err(e) => return Err(e),
            };
            let better = best.as_ref().is_none_or(|b| report.count() > b.report.count());
            let done = report.count() == l - 1;
            if better {
                best = Some(SearchHit { family, r_max, report });
            }
            if done {
                return Ok(best);
            }
        }
    }
    Ok(best)
}
