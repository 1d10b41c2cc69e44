//! Distinguished Poincaré–Dulac normalization of a complexified system and
//! the center/focus classification read off from it.
//!
//! The normal form is
//!
//! ```text
//! u̇ = −u(𝐢 + g₁(uv)),  v̇ = v(𝐢 + g₂(uv)),  ẇ_j = w_j(λ_j + g_j(uv))
//! ```
//!
//! reached through `x = y + ψ(y)` where `ψ` has no resonant monomials.

use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::algebra::{AlgebraError, ExponentVector, GaussRational, Rational, SeriesVector, TruncatedSeries};
use crate::vfield::{find_extra_resonance, ComplexifiedSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalFormError {
    #[error("resonance hypothesis fails: {0}")]
    HypothesisFailed(String),
    #[error("degree {0} is too low; need N ≥ 3")]
    DegreeTooLow(usize),
    #[error("resonant monomial {exponent:?} in component {component} has no (u,v,w) normal-form shape")]
    ShapeViolation { component: usize, exponent: Vec<u32> },
    #[error("reality check failed: {0}")]
    NotReal(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// `⟨k, λ⟩ − λ_j`, with `j` a 0-based component index.
pub fn homological_eigenvalue(k: &ExponentVector, j: usize, lambda: &[GaussRational]) -> GaussRational {
    let mut acc = GaussRational::zero();
    for (&e, l) in k.as_slice().iter().zip(lambda) {
        if e != 0 {
            acc += &l.scale(&Rational::from_integer(e.into()));
        }
    }
    acc -= &lambda[j];
    acc
}

/// Whether `y^k e_j` has the shape `u(uv)^m`, `v(uv)^m` or `w_j(uv)^m`.
pub fn has_normal_shape(k: &ExponentVector, j: usize) -> bool {
    let e = k.as_slice();
    let mut r = e.to_vec();
    if r[j] == 0 {
        return false;
    }
    r[j] -= 1;
    r[0] == r[1] && r[2..].iter().all(|&x| x == 0)
}

/// Resonant and non-resonant contributions solved at one degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeRecord {
    pub degree: usize,
    pub resonant_terms: usize,
    pub nonresonant_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormResult {
    /// Univariate series in `s = uv`, no constant term.
    pub g1: TruncatedSeries,
    pub g2: TruncatedSeries,
    pub gj: Vec<TruncatedSeries>,
    pub degree: usize,
    pub resonance_shape_verified: bool,
    /// The normalized field `μy + g(y)` in `(u, v, w)`.
    pub field: SeriesVector,
    pub diagonal: Vec<GaussRational>,
    pub records: Vec<DegreeRecord>,
}

impl NormalFormResult {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// `g₂ − g₁` as a series in `s`.
    pub fn radial_series(&self) -> TruncatedSeries {
        &self.g2 - &self.g1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizationTransform {
    /// `x = y + ψ(y)`.
    pub forward: SeriesVector,
    /// `y` as a function of `x`, to the same degree.
    pub inverse: SeriesVector,
    pub distinguished: bool,
}

impl NormalizationTransform {
    pub fn psi(&self) -> SeriesVector {
        let n = self.forward.len();
        self.forward.try_sub(&SeriesVector::identity(n, self.forward.cap())).expect("same shape")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    /// `g₁ = g₂` through degree `N`; says nothing beyond it.
    CenterCandidate(usize),
    Focus {
        /// First power of `s` with a nonzero coefficient in `g₂ − g₁`.
        m: usize,
        /// Vanishing multiplicity, `m + 1`.
        l: usize,
        stability: Stability,
        /// Coefficients of `s¹, s², …` in `g₂ − g₁`.
        focus_quantities: Vec<Rational>,
    },
}

impl Classification {
    pub fn vanishing_multiplicity(&self) -> Option<usize> {
        match self {
            Classification::Focus { l, .. } => Some(*l),
            Classification::CenterCandidate(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Refuse to run unless the resonance hypothesis holds. When off, the run proceeds and any
    /// resonant term outside the normal-form shape is still an error, so the
    /// shape is certified through the working degree.
    pub require_hypothesis: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { require_hypothesis: true }
    }
}

pub fn normalize(
    sys: &ComplexifiedSystem,
    n_cap: usize,
) -> Result<(NormalFormResult, NormalizationTransform), NormalFormError> {
    normalize_with(sys, n_cap, NormalizeOptions::default())
}

pub fn normalize_with(
    sys: &ComplexifiedSystem,
    n_cap: usize,
    opts: NormalizeOptions,
) -> Result<(NormalFormResult, NormalizationTransform), NormalFormError> {
    if n_cap < 3 {
        return Err(NormalFormError::DegreeTooLow(n_cap));
    }
    if opts.require_hypothesis {
        if !sys.spectrum.all_hyperbolic {
            return Err(NormalFormError::HypothesisFailed("A has an eigenvalue on the imaginary axis".into()));
        }
        if let Some(w) = find_extra_resonance(&sys.spectrum.lambda) {
            return Err(NormalFormError::HypothesisFailed(format!("extra resonance {w:?}")));
        }
    }
    if !sys.is_reality_symmetric()? {
        return Err(NormalFormError::NotReal("input is not fixed by the involution".into()));
    }
    let n = sys.dim();
    let mu = &sys.diagonal;
    let f = sys.nonlinear.recap(n_cap);
    let mut psi = SeriesVector::zero(n, n, n_cap);
    let mut g = SeriesVector::zero(n, n, n_cap);
    let mut records = Vec::new();
    for d in 2..=n_cap {
        // [f(y + ψ) − Dψ·g]_d with ψ, g known below degree d
        let fwd = SeriesVector::identity(n, d).try_add(&psi.recap(d))?;
        let fy = f.recap(d).compose(&fwd, false)?;
        let dpsi_g = SeriesVector::apply_matrix(&psi.recap(d).jacobian_matrix(), &g.recap(d))?;
        let rhs = fy.try_sub(&dpsi_g)?;
        let mut psi_c = psi.clone().into_components();
        let mut g_c = g.clone().into_components();
        let mut rec = DegreeRecord { degree: d, resonant_terms: 0, nonresonant_terms: 0 };
        for j in 0..n {
            for (k, c) in rhs.component(j).homogeneous(d).terms() {
                let ev = homological_eigenvalue(k, j, mu);
                if ev.is_zero() {
                    if !has_normal_shape(k, j) {
                        return Err(NormalFormError::ShapeViolation { component: j, exponent: k.as_slice().to_vec() });
                    }
                    g_c[j].add_term(k.clone(), c.clone());
                    rec.resonant_terms += 1;
                } else {
                    psi_c[j].add_term(k.clone(), c / &ev);
                    rec.nonresonant_terms += 1;
                }
            }
        }
        psi = SeriesVector::new(psi_c)?;
        g = SeriesVector::new(g_c)?;
        records.push(rec);
    }

    let forward = SeriesVector::identity(n, n_cap).try_add(&psi)?;
    let inverse = forward.compositional_inverse()?;
    let mut field_c = g.clone().into_components();
    for (j, c) in field_c.iter_mut().enumerate() {
        c.add_term(ExponentVector::unit(n, j), mu[j].clone());
    }
    let field = SeriesVector::new(field_c)?;
    if field.reality_involution(&sys.pairing)? != field {
        return Err(NormalFormError::NotReal("normalized field is not fixed by the involution".into()));
    }

    let (g1, g2, gj) = extract_g(&g, n_cap);
    let minus_conj_g1 = g1.map_coeffs(|c| -c.conj());
    if minus_conj_g1 != g2 {
        return Err(NormalFormError::NotReal("g₂ ≠ −conj(g₁)".into()));
    }
    let shape_ok = g.components().iter().enumerate().all(|(j, c)| c.terms().all(|(k, _)| has_normal_shape(k, j)));
    let nf = NormalFormResult {
        g1,
        g2,
        gj,
        degree: n_cap,
        resonance_shape_verified: shape_ok,
        field,
        diagonal: mu.clone(),
        records,
    };
    Ok((nf, NormalizationTransform { forward, inverse, distinguished: true }))
}

/// Reads `g₁, g₂, g_j` from the resonant part.
fn extract_g(g: &SeriesVector, n_cap: usize) -> (TruncatedSeries, TruncatedSeries, Vec<TruncatedSeries>) {
    let n = g.len();
    let s_cap = (n_cap - 1) / 2;
    let read = |j: usize, sign: bool| {
        let mut out = TruncatedSeries::zero(1, s_cap);
        for (k, c) in g.component(j).terms() {
            let m = k.get(if j == 1 { 0 } else { 1 });
            let c = if sign { -c } else { c.clone() };
            out.add_term(ExponentVector::new(vec![m]), c);
        }
        out
    };
    let g1 = read(0, true);
    let g2 = read(1, false);
    let gj = (2..n).map(|j| read(j, false)).collect();
    (g1, g2, gj)
}

/// Builds a result directly from `g` data, for hand-made normal forms.
pub fn normal_form_from_g(
    diagonal: Vec<GaussRational>,
    g1: TruncatedSeries,
    g2: TruncatedSeries,
    gj: Vec<TruncatedSeries>,
    n_cap: usize,
) -> NormalFormResult {
    let n = diagonal.len();
    let mut comps: Vec<TruncatedSeries> = (0..n)
        .map(|j| TruncatedSeries::monomial(n, n_cap, ExponentVector::unit(n, j), diagonal[j].clone()))
        .collect();
    let put = |comps: &mut Vec<TruncatedSeries>, j: usize, s: &TruncatedSeries, sign: bool| {
        for (k, c) in s.terms() {
            let m = k.get(0);
            let mut e = vec![0u32; n];
            e[0] = m;
            e[1] = m;
            e[j] += 1;
            comps[j].add_term(ExponentVector::new(e), if sign { -c } else { c.clone() });
        }
    };
    put(&mut comps, 0, &g1, true);
    put(&mut comps, 1, &g2, false);
    for (i, s) in gj.iter().enumerate() {
        put(&mut comps, i + 2, s, false);
    }
    NormalFormResult {
        g1,
        g2,
        gj,
        degree: n_cap,
        resonance_shape_verified: true,
        field: SeriesVector::new(comps).expect("uniform shape"),
        diagonal,
        records: Vec::new(),
    }
}

pub fn classify(nf: &NormalFormResult) -> Classification {
    let radial = nf.radial_series();
    let s_cap = radial.cap();
    let coeffs: Vec<GaussRational> = (1..=s_cap).map(|m| radial.coeff(&ExponentVector::new(vec![m as u32]))).collect();
    match coeffs.iter().position(|c| !c.is_zero()) {
        None => Classification::CenterCandidate(nf.degree),
        Some(i) => {
            let m = i + 1;
            let lead = &coeffs[i];
            debug_assert!(lead.is_real(), "g₂ − g₁ has real coefficients");
            let stability = if lead.re.is_positive() { Stability::Unstable } else { Stability::Stable };
            Classification::Focus {
                m,
                l: m + 1,
                stability,
                focus_quantities: coeffs.into_iter().map(|c| c.re).collect(),
            }
        }
    }
}

/// Degree used first by [`classify_adaptive`].
pub const START_DEGREE: usize = 8;
/// Largest degree tried by [`classify_adaptive`].
pub const MAX_DEGREE: usize = 16;

/// Normalizes at increasing degree: doubles `N` (up to 16) while no focus
/// quantity appears, and raises it to `2l + 4` once `l` is known.
pub fn classify_adaptive(
    sys: &ComplexifiedSystem,
    start: Option<usize>,
    opts: NormalizeOptions,
) -> Result<(Classification, NormalFormResult, NormalizationTransform), NormalFormError> {
    let mut n_cap = start.unwrap_or(START_DEGREE).max(3);
    loop {
        let (nf, t) = normalize_with(sys, n_cap, opts)?;
        let c = classify(&nf);
        match c {
            Classification::Focus { l, .. } if n_cap < 2 * l + 4 && start.is_none() => n_cap = 2 * l + 4,
            Classification::CenterCandidate(_) if n_cap < MAX_DEGREE && start.is_none() => {
                n_cap = (2 * n_cap).min(MAX_DEGREE)
            }
            _ => return Ok((c, nf, t)),
        }
    }
}

/// The field `DΦ⁻¹·(F∘Φ)` for `Φ = forward`, with `(I + Dψ)⁻¹` expanded as
/// a terminating Neumann series. Independent of the homological solve.
pub fn pullback_field(field: &SeriesVector, transform: &NormalizationTransform) -> Result<SeriesVector, AlgebraError> {
    let cap = field.cap();
    let n = field.len();
    let forward = transform.forward.recap(cap);
    let composed = field.compose(&forward, false)?;
    let dpsi = forward.try_sub(&SeriesVector::identity(n, cap))?.jacobian_matrix();
    // (I + M)⁻¹v = v − Mv + M²v − …; M raises the order by ≥ 1
    let mut term = composed.clone();
    let mut acc = composed;
    for k in 1..=cap {
        term = SeriesVector::apply_matrix(&dpsi, &term)?;
        if term.components().iter().all(TruncatedSeries::is_zero) {
            break;
        }
        acc = if k % 2 == 1 { acc.try_sub(&term)? } else { acc.try_add(&term)? };
    }
    Ok(acc)
}
