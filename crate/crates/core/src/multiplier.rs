//! Inverse Jacobian multipliers: built in normal-form coordinates, carried
//! back to the original real coordinates, and checked against
//! `𝒳(J) = J·div 𝒳` by exact substitution.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::{rat, AlgebraError, ExponentVector, GaussRational, Rational, SeriesVector, TruncatedSeries};
use crate::normalform::{
    classify, normalize_with, Classification, NormalFormError, NormalFormResult, NormalizationTransform, NormalizeOptions,
};
use crate::vfield::{complexify, ComplexifiedSystem, ConjugateCoordinates, RealSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiplierError {
    #[error("result is not real: {0}")]
    NotReal(String),
    #[error("inverse integrating factor restriction needs the center case")]
    FocusCase,
    #[error("degree cap {0} too low")]
    DegreeTooLow(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
}

/// Lowest-degree report for a series that should vanish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualReport {
    pub residual: TruncatedSeries,
    /// Degree through which the residual was computed.
    pub checked_degree: usize,
    pub lowest_nonzero_degree: Option<usize>,
}

impl ResidualReport {
    fn new(residual: TruncatedSeries) -> Self {
        ResidualReport { checked_degree: residual.cap(), lowest_nonzero_degree: residual.min_degree(), residual }
    }

    pub fn is_zero(&self) -> bool {
        self.lowest_nonzero_degree.is_none()
    }
}

/// `Σ s_i^k ↦ Σ (y₀y₁)^k`.
fn in_uv(s: &TruncatedSeries, n: usize, cap: usize) -> TruncatedSeries {
    TruncatedSeries::from_terms(
        n,
        cap,
        s.terms().map(|(e, c)| {
            let k = e.get(0);
            let mut v = vec![0u32; n];
            v[0] = k;
            v[1] = k;
            (ExponentVector::new(v), c.clone())
        }),
    )
}

/// Multiplier of the normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalMultiplier {
    /// `J̃` in `(u, v, w)`.
    pub series: TruncatedSeries,
    /// Leading coefficient of `g₂ − g₁` (focus), 1 otherwise.
    pub constant: Rational,
    pub l: Option<usize>,
    /// Univariate `h` with `h(0) = 1`.
    pub h: TruncatedSeries,
}

/// `w₃⋯w_n` (center) or `w₃⋯w_n·uv·(g₂ − g₁)(uv) = c·w₃⋯w_n·(uv)^l·h(uv)`.
pub fn build_normal_multiplier(nf: &NormalFormResult) -> NormalMultiplier {
    let n = nf.dim();
    let cap = nf.degree;
    let mut w = TruncatedSeries::one(n, cap);
    for j in 2..n {
        w = &w * &TruncatedSeries::variable(n, cap, j);
    }
    match classify(nf) {
        Classification::CenterCandidate(_) => {
            NormalMultiplier { series: w, constant: Rational::one(), l: None, h: TruncatedSeries::one(1, 0) }
        }
        Classification::Focus { m, l, focus_quantities, .. } => {
            let radial = nf.radial_series();
            let c = focus_quantities[m - 1].clone();
            let inv_c = GaussRational::real(Rational::one() / &c);
            let h_cap = radial.cap() - m;
            let h = TruncatedSeries::from_terms(
                1,
                h_cap,
                radial.terms().map(|(e, v)| (ExponentVector::new(vec![e.get(0) - m as u32]), v * &inv_c)),
            );
            let mut e = vec![0u32; n];
            e[0] = 1;
            e[1] = 1;
            let uv = TruncatedSeries::monomial(n, cap, ExponentVector::new(e), GaussRational::one());
            let series = &(&w * &uv) * &in_uv(&radial, n, cap);
            NormalMultiplier { series, constant: c, l: Some(l), h }
        }
    }
}

/// One invariant-surface factor of the real multiplier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurfaceFactor {
    /// `z_index − p`.
    Real { index: usize, p: TruncatedSeries },
    /// `(z_a − p_a)² + (z_b − p_b)²` for a complex block on `(z_a, z_b)`.
    Pair { indices: (usize, usize), p: (TruncatedSeries, TruncatedSeries) },
}

impl SurfaceFactor {
    pub fn expand(&self) -> TruncatedSeries {
        match self {
            SurfaceFactor::Real { index, p } => &TruncatedSeries::variable(p.nvars(), p.cap(), *index) - p,
            SurfaceFactor::Pair { indices: (a, b), p: (pa, pb) } => {
                let fa = &TruncatedSeries::variable(pa.nvars(), pa.cap(), *a) - pa;
                let fb = &TruncatedSeries::variable(pb.nvars(), pb.cap(), *b) - pb;
                &(&fa * &fa) + &(&fb * &fb)
            }
        }
    }
}

/// `(x − q₁)² + (y − q₂)²` raised to `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadialFactor {
    pub q1: TruncatedSeries,
    pub q2: TruncatedSeries,
    pub l: usize,
}

impl RadialFactor {
    pub fn base(&self) -> TruncatedSeries {
        let n = self.q1.nvars();
        let cap = self.q1.cap();
        let a = &TruncatedSeries::variable(n, cap, 0) - &self.q1;
        let b = &TruncatedSeries::variable(n, cap, 1) - &self.q2;
        &(&a * &a) + &(&b * &b)
    }
}

/// Inverse Jacobian multiplier in real coordinates with its factored view
/// `c · Π(surface factors) · ρ^l · h(ρ) · V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplierSeries {
    pub j: TruncatedSeries,
    pub surface_factors: Vec<SurfaceFactor>,
    pub radial: Option<RadialFactor>,
    pub constant: Rational,
    /// Univariate, `h(0) = 1`.
    pub h: TruncatedSeries,
    /// `V`, `V(0) = 1`.
    pub unit: TruncatedSeries,
    /// `J` in conjugate coordinates.
    pub complex_j: TruncatedSeries,
    /// Components of `Φ⁻¹` in conjugate coordinates; the zero sets of the
    /// last `n − 2` are the invariant surfaces.
    pub inverse_components: Vec<TruncatedSeries>,
    pub cap: usize,
}

impl MultiplierSeries {
    pub fn l(&self) -> Option<usize> {
        self.radial.as_ref().map(|r| r.l)
    }

    /// Multiplies the factored view back out.
    pub fn expand(&self) -> Result<TruncatedSeries, AlgebraError> {
        let n = self.j.nvars();
        let cap = self.cap;
        let mut acc = TruncatedSeries::constant(n, cap, GaussRational::real(self.constant.clone()));
        for f in &self.surface_factors {
            acc = acc.try_mul(&f.expand())?;
        }
        if let Some(r) = &self.radial {
            let rho = r.base();
            let subs = SeriesVector::new(vec![rho.clone()])?;
            acc = acc.try_mul(&rho.pow(r.l as u32))?.try_mul(&self.h.recap(cap).compose(&subs, false)?)?;
        }
        acc.try_mul(&self.unit)
    }
}

fn conjugate_coordinates(sys: &ComplexifiedSystem, cap: usize) -> ConjugateCoordinates {
    let n = sys.dim();
    let pairs: Vec<(usize, usize)> =
        (0..n).filter(|&i| sys.pairing.partner(i) > i).map(|i| (i, sys.pairing.partner(i))).collect();
    ConjugateCoordinates::new(n, &pairs, cap)
}

fn real_part_checked(s: TruncatedSeries, what: &str) -> Result<TruncatedSeries, MultiplierError> {
    if s.is_real() {
        Ok(s)
    } else {
        Err(MultiplierError::NotReal(what.to_string()))
    }
}

/// Carries `J̃` back through the normalization: `J = (J̃·DΦ)∘Φ⁻¹`, then to
/// real coordinates. Everything is returned at cap `T.cap − 1`, through
/// which the unit factor (built from derivatives of `Φ`) is exact.
pub fn pullback_multiplier(
    jnf: &NormalMultiplier,
    t: &NormalizationTransform,
    sys: &ComplexifiedSystem,
) -> Result<MultiplierSeries, MultiplierError> {
    let tcap = t.forward.cap();
    if tcap < 3 {
        return Err(MultiplierError::DegreeTooLow(tcap));
    }
    let cap = tcap - 1;
    let n = sys.dim();
    let inv = &t.inverse;
    let det = t.forward.jacobian_determinant()?;
    let v_c = det.compose(inv, false)?.recap(cap);
    let j_c = jnf.series.recap(tcap).try_mul(&det)?.compose(inv, false)?.recap(cap);
    let coords = conjugate_coordinates(sys, cap);
    let real = |f: &TruncatedSeries, what: &str| -> Result<TruncatedSeries, MultiplierError> {
        real_part_checked(coords.realify_function(&f.recap(cap))?, what)
    };
    let j = real(&j_c, "pulled-back multiplier")?;
    let unit = real(&v_c, "unit factor")?;

    let f: Vec<TruncatedSeries> = inv.components().iter().map(|c| c.recap(cap)).collect();
    let half = GaussRational::real(rat(1, 2));
    let minus_half_i = GaussRational::new(Rational::zero(), rat(-1, 2));
    let var = |i: usize| TruncatedSeries::variable(n, cap, i);
    let mut surface_factors = Vec::new();
    let mut i = 2;
    while i < n {
        let partner = sys.pairing.partner(i);
        if partner == i {
            let p = &var(i) - &real(&f[i], "surface factor")?;
            surface_factors.push(SurfaceFactor::Real { index: i, p });
            i += 1;
        } else {
            let re = real(&(&f[i] + &f[partner]).scale(&half), "surface factor")?;
            let im = real(&(&f[i] - &f[partner]).scale(&minus_half_i), "surface factor")?;
            surface_factors.push(SurfaceFactor::Pair { indices: (i, partner), p: (&var(i) - &re, &var(partner) - &im) });
            i += 2;
        }
    }
    let radial = match jnf.l {
        None => None,
        Some(l) => {
            // u = x − 𝐢y, v = x + 𝐢y to first order
            let xr = real(&(&f[0] + &f[1]).scale(&half), "radial factor")?;
            let yr = real(&(&f[1] - &f[0]).scale(&minus_half_i), "radial factor")?;
            Some(RadialFactor { q1: &var(0) - &xr, q2: &var(1) - &yr, l })
        }
    };
    Ok(MultiplierSeries {
        j,
        surface_factors,
        radial,
        constant: jnf.constant.clone(),
        h: jnf.h.clone(),
        unit,
        complex_j: j_c,
        inverse_components: f,
        cap,
    })
}

/// `X(J) − J·div X` for a polynomial field, truncated to `J`'s cap.
pub fn multiplier_residual(field: &SeriesVector, j: &TruncatedSeries) -> Result<ResidualReport, AlgebraError> {
    let cap = j.cap();
    let field = field.recap(cap);
    let mut xj = TruncatedSeries::zero(j.nvars(), cap);
    let mut div = TruncatedSeries::zero(j.nvars(), cap);
    for (i, fi) in field.components().iter().enumerate() {
        xj = xj.try_add(&fi.try_mul(&j.derivative(i))?)?;
        div = div.try_add(&fi.derivative(i))?;
    }
    Ok(ResidualReport::new(xj.try_sub(&j.try_mul(&div)?)?))
}

pub fn verify_multiplier(sys: &RealSystem, j: &TruncatedSeries, n_cap: usize) -> Result<ResidualReport, AlgebraError> {
    multiplier_residual(&sys.field(n_cap), &j.recap(n_cap))
}

/// `z = h(x, y)`, real, each `h_j` of order ≥ 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CenterManifoldGraph {
    pub h: Vec<TruncatedSeries>,
    /// `ζ = k(ξ, η)` in conjugate coordinates.
    pub complex: Vec<TruncatedSeries>,
}

impl CenterManifoldGraph {
    /// `(x, y, h(x, y))` as a substitution into functions of `n` variables.
    pub fn embedding(&self) -> SeriesVector {
        let cap = self.h.first().map_or(2, TruncatedSeries::cap);
        let mut comps = vec![TruncatedSeries::variable(2, cap, 0), TruncatedSeries::variable(2, cap, 1)];
        comps.extend(self.h.iter().cloned());
        SeriesVector::new(comps).expect("uniform shape")
    }
}

/// Image of `w = 0` under the forward transform, written as a graph over
/// the `(x, y)` plane.
pub fn center_manifold_graph(t: &NormalizationTransform, sys: &ComplexifiedSystem) -> Result<CenterManifoldGraph, MultiplierError> {
    let n = sys.dim();
    let cap = t.forward.cap();
    let mut plane_subs = vec![TruncatedSeries::variable(2, cap, 0), TruncatedSeries::variable(2, cap, 1)];
    plane_subs.extend((2..n).map(|_| TruncatedSeries::zero(2, cap)));
    let on_plane = t.forward.compose(&SeriesVector::new(plane_subs)?, false)?;
    let plane = SeriesVector::new(vec![on_plane.component(0).clone(), on_plane.component(1).clone()])?;
    let plane_inv = plane.compositional_inverse()?;
    let complex: Vec<TruncatedSeries> =
        (2..n).map(|j| on_plane.component(j).compose(&plane_inv, false)).collect::<Result<_, _>>()?;
    // ξ = x − 𝐢y, η = x + 𝐢y
    let i_unit = GaussRational::i();
    let x = TruncatedSeries::variable(2, cap, 0);
    let iy = TruncatedSeries::variable(2, cap, 1).scale(&i_unit);
    let to_xy = SeriesVector::new(vec![&x - &iy, &x + &iy])?;
    let k: Vec<TruncatedSeries> = complex.iter().map(|c| c.compose(&to_xy, false)).collect::<Result<_, _>>()?;
    let half = GaussRational::real(rat(1, 2));
    let minus_half_i = GaussRational::new(Rational::zero(), rat(-1, 2));
    let mut h = vec![TruncatedSeries::zero(2, cap); n - 2];
    for j in 2..n {
        let p = sys.pairing.partner(j);
        h[j - 2] = if p == j {
            k[j - 2].clone()
        } else if p > j {
            (&k[j - 2] + &k[p - 2]).scale(&half)
        } else {
            (&k[p - 2] - &k[j - 2]).scale(&minus_half_i)
        };
        if !h[j - 2].is_real() {
            return Err(MultiplierError::NotReal(format!("center manifold component z{}", j + 1)));
        }
    }
    Ok(CenterManifoldGraph { h, complex })
}

/// `J(x, y, h(x, y))`.
pub fn check_vanishing_on_manifold(j: &TruncatedSeries, graph: &CenterManifoldGraph) -> Result<ResidualReport, AlgebraError> {
    let emb = graph.embedding().recap(j.cap());
    Ok(ResidualReport::new(j.compose(&emb, false)?))
}

/// `C(x, y) = V(x, y, h(x, y))`; center case only.
pub fn restrict_inverse_integrating_factor(
    m: &MultiplierSeries,
    graph: &CenterManifoldGraph,
) -> Result<TruncatedSeries, MultiplierError> {
    if m.radial.is_some() {
        return Err(MultiplierError::FocusCase);
    }
    let emb = graph.embedding().recap(m.cap);
    Ok(m.unit.compose(&emb, false)?)
}

/// The field restricted to the graph, as a planar field in `(x, y)`.
pub fn restricted_field(sys: &RealSystem, graph: &CenterManifoldGraph, cap: usize) -> Result<SeriesVector, AlgebraError> {
    let emb = graph.embedding().recap(cap);
    let f = sys.field(cap);
    SeriesVector::new(vec![f.component(0).compose(&emb, false)?, f.component(1).compose(&emb, false)?])
}

/// `X|ₘ(C) − C·div(X|ₘ)` for the planar restricted field.
pub fn planar_relation_residual(
    sys: &RealSystem,
    graph: &CenterManifoldGraph,
    c: &TruncatedSeries,
) -> Result<ResidualReport, AlgebraError> {
    multiplier_residual(&restricted_field(sys, graph, c.cap())?, c)
}

/// `ζ_j − φ_j = 0` in conjugate coordinates with its cofactor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantSurface {
    pub index: usize,
    pub defining: TruncatedSeries,
    pub cofactor: TruncatedSeries,
}

/// Surfaces `(Φ⁻¹)_j = 0`, `j ≥ 3`, with cofactors `(λ_j + g_j(uv))∘Φ⁻¹`.
pub fn invariant_surfaces(
    nf: &NormalFormResult,
    t: &NormalizationTransform,
) -> Result<Vec<InvariantSurface>, AlgebraError> {
    let n = nf.dim();
    let cap = t.forward.cap();
    (2..n)
        .map(|j| {
            let mut l = in_uv(&nf.gj[j - 2], n, cap);
            l.add_term(ExponentVector::zeros(n), nf.diagonal[j].clone());
            Ok(InvariantSurface { index: j, defining: t.inverse.component(j).clone(), cofactor: l.compose(&t.inverse, false)? })
        })
        .collect()
}

/// `X̃(f) − L·f` in conjugate coordinates.
pub fn cofactor_residual(sys: &ComplexifiedSystem, s: &InvariantSurface) -> Result<ResidualReport, AlgebraError> {
    let cap = s.defining.cap();
    let field = sys.full_field(cap);
    let mut xf = TruncatedSeries::zero(s.defining.nvars(), cap);
    for (i, fi) in field.components().iter().enumerate() {
        xf = xf.try_add(&fi.try_mul(&s.defining.derivative(i))?)?;
    }
    Ok(ResidualReport::new(xf.try_sub(&s.cofactor.try_mul(&s.defining)?)?))
}

/// Pushes a real multiplier forward through `x = Φ(y)` into normal-form
/// coordinates: `J(Φ(y))/DΦ(y)` in conjugate variables.
pub fn push_forward_multiplier(
    m: &MultiplierSeries,
    t: &NormalizationTransform,
    sys: &ComplexifiedSystem,
) -> Result<TruncatedSeries, AlgebraError> {
    let cap = m.cap;
    let coords = conjugate_coordinates(sys, cap);
    let jc = coords.complexify_function(&m.j)?;
    let fwd = t.forward.recap(cap);
    let det = t.forward.jacobian_determinant()?.recap(cap);
    jc.compose(&fwd, false)?.try_mul(&det.reciprocal()?)
}

/// Normalization, multiplier and center manifold of one system, with the
/// multiplier certified through `degree`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplierAnalysis {
    pub degree: usize,
    pub classification: Classification,
    pub normal_form: NormalFormResult,
    pub transform: NormalizationTransform,
    pub normal_multiplier: NormalMultiplier,
    pub multiplier: MultiplierSeries,
    pub graph: CenterManifoldGraph,
    /// `X(J) − J·div X` through `degree`.
    pub pde: ResidualReport,
    /// `J(x, y, h(x, y))` through `degree`.
    pub containment: ResidualReport,
}

/// Normalizes at `degree + 1` so that the unit factor is exact through `degree`.
pub fn analyze(sys: &RealSystem, degree: usize, opts: NormalizeOptions) -> Result<MultiplierAnalysis, MultiplierError> {
    let c = complexify(sys);
    let (normal_form, transform) = normalize_with(&c, degree + 1, opts)?;
    let normal_multiplier = build_normal_multiplier(&normal_form);
    let multiplier = pullback_multiplier(&normal_multiplier, &transform, &c)?;
    let graph = center_manifold_graph(&transform, &c)?;
    let pde = verify_multiplier(sys, &multiplier.j, degree)?;
    let containment = check_vanishing_on_manifold(&multiplier.j, &graph)?;
    Ok(MultiplierAnalysis {
        degree,
        classification: classify(&normal_form),
        normal_form,
        transform,
        normal_multiplier,
        multiplier,
        graph,
        pde,
        containment,
    })
}
