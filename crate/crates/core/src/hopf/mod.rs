//! Numerical side: cylindrical reduction, return map, displacement function,
//! exponent fits and limit-cycle counting.

mod cylinder;
mod integrate;
mod poly;

pub use cylinder::{
    count_cycles, displacement, estimate_leading_exponent, fit_window, log_grid, poincare_map, poincare_map_inverse,
    search_cycles,
    solve_slice, to_cylindrical, verify_identity, CycleReport, CylParts, CylindricalField, DisplacementCurve,
    DisplacementSample, ExponentFit, IdentityCheck, JcEvaluator, PoincareResult, SearchHit, SliceSolution,
};
pub use integrate::{integrate, Tolerances, Trajectory};
pub use poly::RealPoly;

use thiserror::Error;

use num_traits::Zero;

use crate::algebra::{rat, AlgebraError, ExponentVector, GaussRational, SeriesVector, TruncatedSeries};
use crate::normalform::NormalizationTransform;
use crate::vfield::{ConjugateCoordinates, RealSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfError {
    #[error("left the validity region at θ = {theta}, r = {r}")]
    OutOfValidity { theta: f64, r: f64 },
    #[error("step size underflow at θ = {0}")]
    StepUnderflow(f64),
    #[error("more than {0} steps")]
    TooManySteps(usize),
    #[error("slice Newton did not converge at r0 = {r0} (residual {residual:e})")]
    NewtonFailed { r0: f64, residual: f64 },
    #[error("singular Jacobian in slice Newton at r0 = {0}")]
    SingularJacobian(f64),
    #[error("linear part on z is not hyperbolic")]
    NotHyperbolic,
    #[error("displacement below the noise floor on the whole fit window")]
    NoiseFloor,
    #[error("both sides of the multiplier identity vanish at the probe point")]
    Degenerate,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Numerical settings shared by the hopf operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopfConfig {
    pub tol: Tolerances,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Relative finite-difference step in slice Newton.
    pub newton_fd_step: f64,
    /// Relative step for the Jacobian of the return map.
    pub identity_fd_step: f64,
    /// Bisection stops when the bracket is below this times `r_max`.
    pub root_tol: f64,
    /// Largest admissible `|r|`.
    pub r_bound: f64,
}

impl Default for HopfConfig {
    fn default() -> Self {
        HopfConfig {
            tol: Tolerances::default(),
            newton_tol: 1e-12,
            newton_max_iter: 50,
            newton_fd_step: 1e-7,
            identity_fd_step: 1e-4,
            root_tol: 1e-10,
            r_bound: 0.5,
        }
    }
}

/// Float field `ẋ = −y + g₁, ẏ = x + g₂, ż = Az + g` whose coordinate
/// hyperplanes in `z` are invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct StraightenedSystem {
    /// Exact system at `ε = 0`.
    pub system: RealSystem,
    pub a: Vec<Vec<f64>>,
    /// Every term of the field except `(−y, x, Az)`, one entry per coordinate.
    pub g: Vec<RealPoly>,
    /// `true` when no truncation was needed.
    pub exact: bool,
    /// Lowest degree at which the flattened surfaces stop being invariant.
    pub defect_degree: Option<usize>,
}

impl StraightenedSystem {
    /// Uses the system as given; callers vouch for the invariant hyperplanes.
    pub fn from_system(system: RealSystem) -> Self {
        let g = system.nonlinear().components().iter().map(RealPoly::from_series).collect();
        StraightenedSystem { a: system.a_matrix_f64(), g, exact: true, defect_degree: None, system }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }
}

/// Groups of `z` coordinates that must vanish together: single indices for
/// real blocks, pairs for complex ones.
fn hyperplane_groups(sys: &RealSystem) -> Vec<Vec<usize>> {
    let mut k = 2;
    let mut out = Vec::new();
    for b in sys.blocks() {
        out.push((k..k + b.width()).collect());
        k += b.width();
    }
    out
}

/// Terms of `field` that keep `{z_G = 0}` from being invariant, over all groups.
fn invariance_violations(sys: &RealSystem, field: &SeriesVector) -> TruncatedSeries {
    let n = sys.dim();
    let mut bad = TruncatedSeries::zero(n, field.cap());
    for grp in hyperplane_groups(sys) {
        for &j in &grp {
            let off = field.component(j).filter(|e, _| grp.iter().all(|&i| e.get(i) == 0));
            for (e, c) in off.terms() {
                bad.add_term(e.clone(), c.clone());
            }
        }
    }
    bad
}

/// Whether every hyperplane `z_j = 0` (pair planes for complex blocks) is
/// invariant for the exact polynomial field.
pub fn hyperplanes_invariant(sys: &RealSystem) -> bool {
    invariance_violations(sys, &sys.field(sys.degree())).is_zero()
}

/// Flattens the invariant surfaces `(Φ⁻¹)_j = 0` onto coordinate hyperplanes.
/// Returns the system unchanged when the hyperplanes are already invariant.
pub fn straighten(sys: &RealSystem, t: &NormalizationTransform) -> Result<StraightenedSystem, HopfError> {
    if hyperplanes_invariant(sys) {
        return Ok(StraightenedSystem::from_system(sys.clone()));
    }
    let n = sys.dim();
    let cap = t.inverse.cap();
    let wide = cap + 1;
    let coords = ConjugateCoordinates::for_system(sys, cap);
    let real = |f: &TruncatedSeries| -> Result<TruncatedSeries, AlgebraError> { coords.realify_function(f) };
    let half = GaussRational::real(rat(1, 2));
    let minus_half_i = GaussRational::new(Zero::zero(), rat(-1, 2));
    let f = t.inverse.components();
    let mut comps: Vec<TruncatedSeries> =
        vec![TruncatedSeries::variable(n, cap, 0), TruncatedSeries::variable(n, cap, 1)];
    let mut j = 2;
    while j < n {
        let p = coords.pairing.partner(j);
        if p == j {
            comps.push(real(&f[j])?);
            j += 1;
        } else {
            comps.push(real(&(&f[j] + &f[p]).scale(&half))?);
            comps.push(real(&(&f[j] - &f[p]).scale(&minus_half_i))?);
            j += 2;
        }
    }
    for c in &comps {
        if !c.is_real() {
            return Err(HopfError::Invalid("straightening map is not real".into()));
        }
    }
    // the map is polynomial, so widening the cap keeps it exact
    let map = SeriesVector::new(comps.iter().map(|c| c.recap(wide)).collect())?;
    let inv = map.compositional_inverse()?;
    let pulled = sys.field(wide).compose(&inv, false)?;
    // ẇ = DΦ(Φ⁻¹w)·X(Φ⁻¹w)
    let jac: Vec<Vec<TruncatedSeries>> = map
        .jacobian_matrix()
        .into_iter()
        .map(|row| row.into_iter().map(|e| e.compose(&inv, false)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let new_field = SeriesVector::apply_matrix(&jac, &pulled)?;
    let lin = sys.linear_matrix();
    let nonlinear: Vec<TruncatedSeries> = (0..n)
        .map(|i| {
            let mut c = new_field.component(i).recap(cap);
            for (k, a) in lin[i].iter().enumerate() {
                c.add_term(ExponentVector::unit(n, k), -GaussRational::real(a.clone()));
            }
            c
        })
        .collect();
    if nonlinear.iter().any(|c| c.min_degree().is_some_and(|d| d < 2)) {
        return Err(HopfError::Invalid("straightening changed the linear part".into()));
    }
    let system = RealSystem::new(n, sys.blocks().to_vec(), SeriesVector::new(nonlinear)?)?;
    let violations = invariance_violations(sys, &new_field);
    if violations.min_degree().is_some_and(|d| d <= cap) {
        return Err(HopfError::Invalid(format!(
            "surfaces are not invariant at degree {}",
            violations.min_degree().unwrap_or(0)
        )));
    }
    let mut out = StraightenedSystem::from_system(system);
    out.exact = violations.is_zero() && new_field.components().iter().all(|c| c.max_degree().is_none_or(|d| d <= cap));
    out.defect_degree = violations.min_degree();
    Ok(out)
}

/// `h = ε^l a₀ + Σ_{s=1}^{l−1} ε^{l−s} a_s (x² + y²)^s`, added to every
/// coordinate as `x_i h`. The constant `a₀` term extends the basic family.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationFamily {
    pub l: usize,
    /// `a₁, …, a_{l−1}`.
    pub a: Vec<f64>,
    pub a0: Option<f64>,
    pub eps: f64,
}

impl PerturbationFamily {
    pub fn zero(l: usize) -> Self {
        PerturbationFamily { l, a: vec![0.0; l.saturating_sub(1)], a0: None, eps: 0.0 }
    }

    /// Coefficients of `h` in powers of `ρ = x² + y²`.
    pub fn h_coefficients(&self) -> Vec<f64> {
        let l = self.l as i32;
        let mut c = vec![self.a0.map_or(0.0, |a0| self.eps.powi(l) * a0)];
        for (s, a) in self.a.iter().enumerate() {
            let s = s as i32 + 1;
            c.push(self.eps.powi(l - s) * a);
        }
        c
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

pub fn build_perturbation(base: &StraightenedSystem, fam: &PerturbationFamily) -> Result<StraightenedSystem, HopfError> {
    if fam.l < 2 || fam.a.len() != fam.l - 1 {
        return Err(HopfError::Invalid(format!("need {} coefficients a₁…a_(l−1) for l = {}", fam.l.saturating_sub(1), fam.l)));
    }
    let n = base.dim();
    let mut out = base.clone();
    for (s, c) in fam.h_coefficients().into_iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let s = s as u32;
        for k in 0..=s {
            let coeff = c * binomial(s, k);
            for i in 0..n {
                let mut e = vec![0u32; n];
                e[0] = 2 * k;
                e[1] = 2 * (s - k);
                e[i] += 1;
                out.g[i].push(coeff, e);
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_hyperbolic(sys: &RealSystem) -> Result<(), HopfError> {
    if sys.blocks().iter().any(|b| b.real_part().is_zero()) {
        return Err(HopfError::NotHyperbolic);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::LinearBlock;
    use crate::normalform::normalize;
    use crate::vfield::{complexify, parse_system};

    fn paraboloid() -> RealSystem {
        parse_system("dim 3\nblock real -1\nterm 3 1 2 0 0\nterm 3 1 0 2 0\n").unwrap()
    }

    #[test]
    fn invariance_detection() {
        assert!(hyperplanes_invariant(&parse_system("dim 3\nblock real -1\nterm 1 1 3 0 0\nterm 3 1 1 0 1\n").unwrap()));
        assert!(!hyperplanes_invariant(&paraboloid()));
        // a complex pair only needs the joint plane
        let s = parse_system("dim 4\nblock complex -1 1\nterm 3 1 1 0 0 1\nterm 4 1 0 1 1 0\n").unwrap();
        assert!(hyperplanes_invariant(&s));
    }

    #[test]
    fn paraboloid_straightens_exactly() {
        let sys = paraboloid();
        let (_, t) = normalize(&complexify(&sys), 6).unwrap();
        let st = straighten(&sys, &t).unwrap();
        assert!(st.exact);
        assert_eq!(st.defect_degree, None);
        assert!(st.system.nonlinear().components().iter().all(TruncatedSeries::is_zero));
    }

    #[test]
    fn generic_straightening_reports_defect() {
        let sys = parse_system("dim 3\nblock real -1\nterm 3 1 2 0 0\nterm 3 1 1 1 1\nterm 1 1 1 0 1\n").unwrap();
        let (_, t) = normalize(&complexify(&sys), 5).unwrap();
        let st = straighten(&sys, &t).unwrap();
        assert!(!st.exact);
        assert!(st.defect_degree.is_some_and(|d| d > 5));
        assert!(hyperplanes_invariant(&st.system));
    }

    #[test]
    fn s1_is_its_own_straightening() {
        let sys = parse_system("dim 3\nblock real -1\nterm 1 1 3 0 0\nterm 1 1 1 2 0\nterm 2 1 2 1 0\nterm 2 1 0 3 0\n").unwrap();
        let (_, t) = normalize(&complexify(&sys), 5).unwrap();
        assert_eq!(straighten(&sys, &t).unwrap(), StraightenedSystem::from_system(sys));
    }

    #[test]
    fn perturbation_terms() {
        let sys = RealSystem::linear(vec![LinearBlock::Real(rat(-1, 1))]).unwrap();
        let base = StraightenedSystem::from_system(sys);
        assert_eq!(build_perturbation(&base, &PerturbationFamily::zero(2)).unwrap(), base);
        let fam = PerturbationFamily { l: 2, a: vec![-1.0], a0: None, eps: 0.01 };
        let p = build_perturbation(&base, &fam).unwrap();
        // x·(−0.01)(x² + y²)
        let pt = [0.3, -0.2, 0.5];
        assert!((p.g[0].eval(&pt) - (-0.01 * 0.3 * 0.13)).abs() < 1e-15);
        assert!((p.g[2].eval(&pt) - (-0.01 * 0.5 * 0.13)).abs() < 1e-15);
        assert!(build_perturbation(&base, &PerturbationFamily { l: 3, a: vec![1.0], a0: None, eps: 0.1 }).is_err());
    }
}
