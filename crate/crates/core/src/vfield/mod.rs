//! Real polynomial systems with a rotation block, their complexified
//! diagonal form, and the resonance lattice of the spectrum.
//!
//! Coordinates are `(x, y, z_3, …, z_n)`. The first two carry the fixed
//! rotation `ẋ = −y, ẏ = x`; `z` is split into real-Jordan blocks of `A`.
//! Complex coordinates are `ξ = x − 𝐢y`, `η = x + 𝐢y` (so that `ξ̇ = −𝐢ξ + …`)
//! and `ζ_j = z_j + 𝐢z_{j+1}`, `ζ_{j+1} = z_j − 𝐢z_{j+1}` for each complex block.

mod lattice;
mod parse;

pub use lattice::{check_hypothesis_h, find_extra_resonance, integer_kernel, pairing_value, resonance_lattice, HypothesisReport, ResonanceLattice};
pub use parse::{parse_system, serialize_system};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::algebra::{
    rat, rat_to_f64, AlgebraError, ExponentVector, GaussRational, Pairing, Rational, SeriesVector, TruncatedSeries,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("series is not reality-symmetric: {0}")]
    NotReal(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// One real-Jordan block of the hyperbolic part `A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearBlock {
    /// Contributes the eigenvalue `a`.
    Real(Rational),
    /// The matrix `[[a, −b], [b, a]]`, contributing `a ± b𝐢`; `b ≠ 0`.
    Complex { a: Rational, b: Rational },
}

impl LinearBlock {
    pub fn width(&self) -> usize {
        match self {
            LinearBlock::Real(_) => 1,
            LinearBlock::Complex { .. } => 2,
        }
    }

    pub fn eigenvalues(&self) -> Vec<GaussRational> {
        match self {
            LinearBlock::Real(a) => vec![GaussRational::real(a.clone())],
            LinearBlock::Complex { a, b } => {
                vec![GaussRational::new(a.clone(), b.clone()), GaussRational::new(a.clone(), -b.clone())]
            }
        }
    }

    pub fn real_part(&self) -> &Rational {
        match self {
            LinearBlock::Real(a) | LinearBlock::Complex { a, .. } => a,
        }
    }
}

/// Eigenvalue data `λ = (𝐢, −𝐢, λ_3, …, λ_n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumData {
    pub lambda: Vec<GaussRational>,
    pub all_hyperbolic: bool,
    pub same_sign: bool,
}

impl SpectrumData {
    pub fn from_blocks(blocks: &[LinearBlock]) -> Self {
        let mut lambda = vec![GaussRational::i(), -GaussRational::i()];
        for b in blocks {
            lambda.extend(b.eigenvalues());
        }
        let reals: Vec<&Rational> = lambda[2..].iter().map(|l| &l.re).collect();
        let all_hyperbolic = reals.iter().all(|r| !r.is_zero());
        let same_sign = all_hyperbolic
            && (reals.iter().all(|r| r.is_positive()) || reals.iter().all(|r| r.is_negative()));
        SpectrumData { lambda, all_hyperbolic, same_sign }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }
}

/// Real system `ẋ = −y + f_1, ẏ = x + f_2, ż = Az + f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealSystem {
    n: usize,
    blocks: Vec<LinearBlock>,
    nonlinear: SeriesVector,
}

impl RealSystem {
    pub fn new(n: usize, blocks: Vec<LinearBlock>, nonlinear: SeriesVector) -> Result<Self, SystemError> {
        if n < 3 {
            return Err(SystemError::Invalid(format!("dimension {n} < 3")));
        }
        let covered: usize = blocks.iter().map(LinearBlock::width).sum();
        if covered != n - 2 {
            return Err(SystemError::Invalid(format!("blocks cover {covered} coordinates, need {}", n - 2)));
        }
        for b in &blocks {
            if let LinearBlock::Complex { b, .. } = b {
                if b.is_zero() {
                    return Err(SystemError::Invalid("complex block with b = 0".into()));
                }
            }
        }
        if nonlinear.len() != n || nonlinear.nvars() != n {
            return Err(SystemError::Invalid(format!(
                "nonlinear part has {} components in {} variables, need {n}",
                nonlinear.len(),
                nonlinear.nvars()
            )));
        }
        for (i, c) in nonlinear.components().iter().enumerate() {
            if c.min_degree().is_some_and(|d| d < 2) {
                return Err(SystemError::Invalid(format!("component {} has a term of degree < 2", i + 1)));
            }
            if !c.is_real() {
                return Err(SystemError::Invalid(format!("component {} has non-real coefficients", i + 1)));
            }
        }
        Ok(RealSystem { n, blocks, nonlinear })
    }

    /// The linear system with the given blocks.
    pub fn linear(blocks: Vec<LinearBlock>) -> Result<Self, SystemError> {
        let n = 2 + blocks.iter().map(LinearBlock::width).sum::<usize>();
        Self::new(n, blocks, SeriesVector::zero(n, n, 2))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[LinearBlock] {
        &self.blocks
    }

    pub fn nonlinear(&self) -> &SeriesVector {
        &self.nonlinear
    }

    /// Highest degree carried by the nonlinear part (its cap).
    pub fn degree(&self) -> usize {
        self.nonlinear.cap()
    }

    pub fn spectrum(&self) -> SpectrumData {
        SpectrumData::from_blocks(&self.blocks)
    }

    /// Full linear part as an `n × n` rational matrix.
    pub fn linear_matrix(&self) -> Vec<Vec<Rational>> {
        let n = self.n;
        let mut m = vec![vec![Rational::zero(); n]; n];
        m[0][1] = -Rational::one();
        m[1][0] = Rational::one();
        let mut k = 2;
        for b in &self.blocks {
            match b {
                LinearBlock::Real(a) => m[k][k] = a.clone(),
                LinearBlock::Complex { a, b } => {
                    m[k][k] = a.clone();
                    m[k][k + 1] = -b.clone();
                    m[k + 1][k] = b.clone();
                    m[k + 1][k + 1] = a.clone();
                }
            }
            k += b.width();
        }
        m
    }

    /// The matrix `A` acting on `z`, as floats.
    pub fn a_matrix_f64(&self) -> Vec<Vec<f64>> {
        let m = self.linear_matrix();
        m[2..].iter().map(|row| row[2..].iter().map(rat_to_f64).collect()).collect()
    }

    /// Linear plus nonlinear part at truncation cap `cap`.
    pub fn field(&self, cap: usize) -> SeriesVector {
        let lin = self.linear_matrix();
        let nl = self.nonlinear.recap(cap);
        let comps = (0..self.n)
            .map(|i| {
                let mut c = nl.component(i).clone();
                for (j, a) in lin[i].iter().enumerate() {
                    if !a.is_zero() && cap >= 1 {
                        c.add_term(ExponentVector::unit(self.n, j), GaussRational::real(a.clone()));
                    }
                }
                c
            })
            .collect();
        SeriesVector::new(comps).expect("uniform shape")
    }

    /// Index pairs of conjugate complex coordinates, starting with `(x, y)`.
    pub fn conjugate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = vec![(0, 1)];
        let mut k = 2;
        for b in &self.blocks {
            if b.width() == 2 {
                pairs.push((k, k + 1));
            }
            k += b.width();
        }
        pairs
    }

    pub fn pairing(&self) -> Pairing {
        Pairing::from_pairs(self.n, &self.conjugate_pairs()).expect("pairs are disjoint")
    }

    /// Same linear part, new nonlinear terms.
    pub fn with_nonlinear(&self, nonlinear: SeriesVector) -> Result<Self, SystemError> {
        Self::new(self.n, self.blocks.clone(), nonlinear)
    }

    /// Variable names `x, y, z3, …` for reports.
    pub fn variable_names(&self) -> Vec<String> {
        let mut v = vec!["x".to_string(), "y".to_string()];
        v.extend((3..=self.n).map(|j| format!("z{j}")));
        v
    }
}

/// Linear change between real coordinates and conjugate coordinates.
#[derive(Clone, Debug)]
pub struct ConjugateCoordinates {
    /// `(ξ, η, ζ)` as functions of `(x, y, z)`.
    pub to_complex: SeriesVector,
    /// `(x, y, z)` as functions of `(ξ, η, ζ)`.
    pub to_real: SeriesVector,
    pub pairing: Pairing,
}

impl ConjugateCoordinates {
    pub fn new(n: usize, pairs: &[(usize, usize)], cap: usize) -> Self {
        let half = rat(1, 2);
        let var = |i: usize| TruncatedSeries::variable(n, cap, i);
        let i_unit = GaussRational::i();
        let mut to_complex: Vec<TruncatedSeries> = (0..n).map(var).collect();
        let mut to_real: Vec<TruncatedSeries> = (0..n).map(var).collect();
        for &(a, b) in pairs {
            let iy = var(b).scale(&i_unit);
            if a == 0 {
                // ξ = x − 𝐢y, η = x + 𝐢y
                to_complex[a] = &var(a) - &iy;
                to_complex[b] = &var(a) + &iy;
                // x = (ξ+η)/2, y = 𝐢(ξ−η)/2
                to_real[a] = (&var(a) + &var(b)).scale_rat(&half);
                to_real[b] = (&var(a) - &var(b)).scale(&i_unit).scale_rat(&half);
            } else {
                // ζ_a = z_a + 𝐢z_b, ζ_b = z_a − 𝐢z_b
                to_complex[a] = &var(a) + &iy;
                to_complex[b] = &var(a) - &iy;
                // z_a = (ζ_a+ζ_b)/2, z_b = −𝐢(ζ_a−ζ_b)/2
                to_real[a] = (&var(a) + &var(b)).scale_rat(&half);
                to_real[b] = (&var(a) - &var(b)).scale(&-i_unit.clone()).scale_rat(&half);
            }
        }
        ConjugateCoordinates {
            to_complex: SeriesVector::new(to_complex).expect("shape"),
            to_real: SeriesVector::new(to_real).expect("shape"),
            pairing: Pairing::from_pairs(n, pairs).expect("disjoint pairs"),
        }
    }

    pub fn for_system(sys: &RealSystem, cap: usize) -> Self {
        Self::new(sys.dim(), &sys.conjugate_pairs(), cap)
    }

    /// A scalar function of real coordinates rewritten in conjugate ones.
    pub fn complexify_function(&self, f: &TruncatedSeries) -> Result<TruncatedSeries, AlgebraError> {
        f.compose(&self.to_real.recap(f.cap()), false)
    }

    /// A scalar function of conjugate coordinates rewritten in real ones.
    pub fn realify_function(&self, f: &TruncatedSeries) -> Result<TruncatedSeries, AlgebraError> {
        f.compose(&self.to_complex.recap(f.cap()), false)
    }

    /// Vector field (or tangent vector) `v(x)` ↦ `C·v(C⁻¹ζ)`.
    pub fn complexify_vector(&self, v: &SeriesVector) -> Result<SeriesVector, AlgebraError> {
        let cap = v.cap();
        let pulled = v.compose(&self.to_real.recap(cap), false)?;
        self.to_complex.recap(cap).compose(&pulled, false)
    }

    /// Inverse of [`Self::complexify_vector`].
    pub fn realify_vector(&self, v: &SeriesVector) -> Result<SeriesVector, AlgebraError> {
        let cap = v.cap();
        let pulled = v.compose(&self.to_complex.recap(cap), false)?;
        self.to_real.recap(cap).compose(&pulled, false)
    }
}

/// The system in conjugate coordinates: `ẋ_i = μ_i x_i + f̃_i(x)` with
/// `μ = (−𝐢, 𝐢, λ_3, …, λ_n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexifiedSystem {
    pub spectrum: SpectrumData,
    pub blocks: Vec<LinearBlock>,
    /// Diagonal entries of the linear part, in coordinate order.
    pub diagonal: Vec<GaussRational>,
    pub nonlinear: SeriesVector,
    pub pairing: Pairing,
}

impl ComplexifiedSystem {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Diagonal linear part plus nonlinear part at cap `cap`.
    pub fn full_field(&self, cap: usize) -> SeriesVector {
        let n = self.dim();
        let nl = self.nonlinear.recap(cap);
        let comps = (0..n)
            .map(|i| {
                let mut c = nl.component(i).clone();
                if cap >= 1 {
                    c.add_term(ExponentVector::unit(n, i), self.diagonal[i].clone());
                }
                c
            })
            .collect();
        SeriesVector::new(comps).expect("uniform shape")
    }

    pub fn is_reality_symmetric(&self) -> Result<bool, AlgebraError> {
        Ok(self.nonlinear.reality_involution(&self.pairing)? == self.nonlinear)
    }
}

/// Diagonal entries of the complexified linear part.
pub fn diagonal_spectrum(blocks: &[LinearBlock]) -> Vec<GaussRational> {
    let mut d = vec![-GaussRational::i(), GaussRational::i()];
    for b in blocks {
        d.extend(b.eigenvalues());
    }
    d
}

/// Rewrites a real system in conjugate coordinates.
pub fn complexify(sys: &RealSystem) -> ComplexifiedSystem {
    let coords = ConjugateCoordinates::for_system(sys, sys.degree());
    let nonlinear = coords.complexify_vector(sys.nonlinear()).expect("shapes agree");
    ComplexifiedSystem {
        spectrum: sys.spectrum(),
        blocks: sys.blocks().to_vec(),
        diagonal: diagonal_spectrum(sys.blocks()),
        nonlinear,
        pairing: coords.pairing,
    }
}

/// Inverse of [`complexify`]; rejects inputs that are not fixed by the
/// reality involution.
pub fn realify(csys: &ComplexifiedSystem) -> Result<RealSystem, SystemError> {
    if !csys.is_reality_symmetric()? {
        return Err(SystemError::NotReal("complexified field is not fixed by the involution".into()));
    }
    let n = csys.dim();
    let pairs: Vec<(usize, usize)> = (0..n).filter(|&i| csys.pairing.partner(i) > i).map(|i| (i, csys.pairing.partner(i))).collect();
    let coords = ConjugateCoordinates::new(n, &pairs, csys.nonlinear.cap());
    let nonlinear = coords.realify_vector(&csys.nonlinear)?;
    RealSystem::new(n, csys.blocks.clone(), nonlinear)
}
