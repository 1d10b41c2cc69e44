//! Sparse multivariate power series over ℚ(𝐢), truncated at a fixed total
//! degree.
//!
//! Every series carries its own truncation cap `N`. Binary operations demand
//! matching variable counts and caps; changing the cap is always an explicit
//! [`TruncatedSeries::recap`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::gauss::{GaussRational, Rational};
use super::AlgebraError;

/// Exponent vector of a monomial `x^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentVector(Vec<u32>);

impl ExponentVector {
    pub fn new(exps: Vec<u32>) -> Self {
        ExponentVector(exps)
    }

    pub fn zeros(n: usize) -> Self {
        ExponentVector(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        ExponentVector(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    fn add(&self, other: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Truncated multivariate power series: the terms of total degree `≤ cap`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    nvars: usize,
    cap: usize,
    terms: BTreeMap<ExponentVector, GaussRational>,
}

impl TruncatedSeries {
    pub fn zero(nvars: usize, cap: usize) -> Self {
        TruncatedSeries { nvars, cap, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, cap: usize, c: GaussRational) -> Self {
        Self::monomial(nvars, cap, ExponentVector::zeros(nvars), c)
    }

    pub fn one(nvars: usize, cap: usize) -> Self {
        Self::constant(nvars, cap, GaussRational::one())
    }

    /// The coordinate function `x_i`.
    pub fn variable(nvars: usize, cap: usize, i: usize) -> Self {
        Self::monomial(nvars, cap, ExponentVector::unit(nvars, i), GaussRational::one())
    }

    pub fn monomial(nvars: usize, cap: usize, exp: ExponentVector, c: GaussRational) -> Self {
        assert_eq!(exp.len(), nvars, "exponent length must equal nvars");
        let mut s = Self::zero(nvars, cap);
        s.add_term(exp, c);
        s
    }

    /// Collects terms, summing duplicates and discarding anything above `cap`.
    pub fn from_terms<I>(nvars: usize, cap: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (ExponentVector, GaussRational)>,
    {
        let mut s = Self::zero(nvars, cap);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length must equal nvars");
            s.add_term(e, c);
        }
        s
    }

    /// Adds `c·x^exp` in place; terms above the cap are dropped.
    pub fn add_term(&mut self, exp: ExponentVector, c: GaussRational) {
        if exp.degree() > self.cap || c.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += &c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVector, &GaussRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exp: &ExponentVector) -> GaussRational {
        self.terms.get(exp).cloned().unwrap_or_else(GaussRational::zero)
    }

    pub fn constant_term(&self) -> GaussRational {
        self.coeff(&ExponentVector::zeros(self.nvars))
    }

    /// Lowest total degree present, `None` for the zero series.
    pub fn min_degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.degree()).min()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.degree()).max()
    }

    /// True when every coefficient has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    /// The homogeneous component of degree `d`.
    pub fn homogeneous(&self, d: usize) -> Self {
        self.filter(|e, _| e.degree() == d)
    }

    pub fn filter<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&ExponentVector, &GaussRational) -> bool,
    {
        TruncatedSeries {
            nvars: self.nvars,
            cap: self.cap,
            terms: self.terms.iter().filter(|(e, c)| keep(e, c)).map(|(e, c)| (e.clone(), c.clone())).collect(),
        }
    }

    /// Reinterprets the stored terms at a new cap. Lowering the cap truncates;
    /// raising it treats the stored terms as exact.
    pub fn recap(&self, cap: usize) -> Self {
        TruncatedSeries {
            nvars: self.nvars,
            cap,
            terms: self.terms.iter().filter(|(e, _)| e.degree() <= cap).map(|(e, c)| (e.clone(), c.clone())).collect(),
        }
    }

    pub fn map_coeffs<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&GaussRational) -> GaussRational,
    {
        Self::from_terms(self.nvars, self.cap, self.terms.iter().map(|(e, c)| (e.clone(), f(c))))
    }

    pub fn scale(&self, c: &GaussRational) -> Self {
        self.map_coeffs(|x| x * c)
    }

    pub fn scale_rat(&self, r: &Rational) -> Self {
        self.map_coeffs(|x| x.scale(r))
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|x| -x)
    }

    fn check_compatible(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.nvars != other.nvars {
            return Err(AlgebraError::NvarsMismatch { left: self.nvars, right: other.nvars });
        }
        if self.cap != other.cap {
            return Err(AlgebraError::CapMismatch { left: self.cap, right: other.cap });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c);
        }
        Ok(out)
    }

    /// Cauchy product truncated at the common cap.
    pub fn try_mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_compatible(other)?;
        Ok(self.mul_truncated(other, self.cap))
    }

    fn by_degree(&self) -> Vec<Vec<(&ExponentVector, &GaussRational)>> {
        let mut groups: Vec<Vec<_>> = vec![Vec::new(); self.cap + 1];
        for (e, c) in &self.terms {
            groups[e.degree()].push((e, c));
        }
        groups
    }

    fn mul_truncated(&self, other: &Self, cap: usize) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.nvars, cap);
        }
        if packable(self.nvars, cap) {
            return scaled_product(self, other, cap);
        }
        let a = self.by_degree();
        let b = other.by_degree();
        let mut acc: HashMap<ExponentVector, GaussRational> = HashMap::new();
        for (da, ga) in a.iter().enumerate() {
            if ga.is_empty() {
                continue;
            }
            for (db, gb) in b.iter().enumerate() {
                if da + db > cap {
                    break;
                }
                for (ea, ca) in ga {
                    for (eb, cb) in gb {
                        let prod = *ca * *cb;
                        acc.entry(ea.add(eb)).and_modify(|c| *c += &prod).or_insert(prod);
                    }
                }
            }
        }
        TruncatedSeries {
            nvars: self.nvars,
            cap,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one(self.nvars, self.cap);
        for _ in 0..k {
            out = out.mul_truncated(self, self.cap);
        }
        out
    }

    /// Partial derivative `∂/∂x_i`. The cap is kept, so the result is only
    /// certified through degree `cap − 1`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars, self.cap);
        for (e, c) in &self.terms {
            let k = e.get(i);
            if k == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne.0[i] -= 1;
            out.add_term(ne, c.scale(&Rational::from_integer(k.into())));
        }
        out
    }

    /// Substitutes `x_i ↦ subs[i]` and truncates to this series' cap.
    ///
    /// Every substituted series must have zero constant term unless
    /// `allow_constant` is set; with constants present, higher-degree terms
    /// missing from a truncated `self` would feed lower degrees, so the caller
    /// takes responsibility for that.
    pub fn compose(&self, subs: &SeriesVector, allow_constant: bool) -> Result<Self, AlgebraError> {
        if subs.len() != self.nvars {
            return Err(AlgebraError::NvarsMismatch { left: self.nvars, right: subs.len() });
        }
        let out_nvars = subs.nvars();
        let cap = self.cap;
        if subs.cap() != cap {
            return Err(AlgebraError::CapMismatch { left: cap, right: subs.cap() });
        }
        let mut valuations = Vec::with_capacity(subs.len());
        for (i, s) in subs.components().iter().enumerate() {
            let v = s.min_degree().unwrap_or(usize::MAX);
            if v == 0 && !allow_constant {
                return Err(AlgebraError::ConstantTerm { index: i });
            }
            valuations.push(v);
        }
        // products of substituted series, keyed by exponent; each new
        // monomial costs one multiplication by a single component
        let mut memo: HashMap<ExponentVector, TruncatedSeries> = HashMap::new();
        let mut out = TruncatedSeries::zero(out_nvars, cap);
        for (e, c) in &self.terms {
            // lowest degree this term can reach after substitution
            let mut low = 0usize;
            let mut vanishes = false;
            for (i, &k) in e.as_slice().iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if valuations[i] == usize::MAX {
                    vanishes = true;
                    break;
                }
                low = low.saturating_add(valuations[i].saturating_mul(k as usize));
            }
            if vanishes || low > cap {
                continue;
            }
            let prod = monomial_product(e, subs, cap, out_nvars, &mut memo);
            for (te, tc) in &prod.terms {
                out.add_term(te.clone(), tc * c);
            }
        }
        Ok(out)
    }

    /// `1/self` for a unit series (nonzero constant term), by degree-by-degree
    /// recursion on homogeneous parts.
    pub fn reciprocal(&self) -> Result<Self, AlgebraError> {
        let a0 = self.constant_term();
        let inv0 = a0.inv().ok_or(AlgebraError::NotUnit)?;
        let parts: Vec<TruncatedSeries> = (0..=self.cap).map(|d| self.homogeneous(d)).collect();
        let mut rparts: Vec<TruncatedSeries> = Vec::with_capacity(self.cap + 1);
        rparts.push(TruncatedSeries::constant(self.nvars, self.cap, inv0.clone()));
        let minus_inv0 = -&inv0;
        for d in 1..=self.cap {
            let mut acc = TruncatedSeries::zero(self.nvars, self.cap);
            for k in 1..=d {
                if parts[k].is_zero() || rparts[d - k].is_zero() {
                    continue;
                }
                let p = parts[k].mul_truncated(&rparts[d - k], self.cap);
                for (e, c) in p.terms {
                    acc.add_term(e, c);
                }
            }
            rparts.push(acc.scale(&minus_inv0));
        }
        let mut out = TruncatedSeries::zero(self.nvars, self.cap);
        for p in rparts {
            for (e, c) in p.terms {
                out.add_term(e, c);
            }
        }
        Ok(out)
    }

    /// Conjugates every coefficient and swaps paired variables.
    pub fn reality_involution(&self, pairing: &Pairing) -> Result<Self, AlgebraError> {
        if pairing.len() != self.nvars {
            return Err(AlgebraError::InvalidPairing(format!(
                "pairing covers {} variables, series has {}",
                pairing.len(),
                self.nvars
            )));
        }
        Ok(Self::from_terms(
            self.nvars,
            self.cap,
            self.terms.iter().map(|(e, c)| {
                let swapped: Vec<u32> = (0..self.nvars).map(|i| e.get(pairing.partner(i))).collect();
                (ExponentVector(swapped), c.conj())
            }),
        ))
    }

    /// Evaluates at a complex point given as (re, im) pairs.
    pub fn eval_f64(&self, point: &[(f64, f64)]) -> (f64, f64) {
        let mut sum = (0.0, 0.0);
        for (e, c) in &self.terms {
            let (mut vr, mut vi) = c.to_f64_pair();
            for (i, &k) in e.as_slice().iter().enumerate() {
                for _ in 0..k {
                    let (pr, pi) = point[i];
                    let nr = vr * pr - vi * pi;
                    vi = vr * pi + vi * pr;
                    vr = nr;
                }
            }
            sum.0 += vr;
            sum.1 += vi;
        }
        sum
    }

    /// Human-readable rendering with the given variable names.
    pub fn display_with(&self, names: &[&str]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        // Render in graded order: low degree first.
        let mut entries: Vec<_> = self.terms.iter().collect();
        entries.sort_by(|a, b| a.0.degree().cmp(&b.0.degree()).then_with(|| b.0.cmp(a.0)));
        for (e, c) in entries {
            let mut mono = Vec::new();
            for (i, &k) in e.as_slice().iter().enumerate() {
                match k {
                    0 => {}
                    1 => mono.push(names[i].to_string()),
                    _ => mono.push(format!("{}^{}", names[i], k)),
                }
            }
            if mono.is_empty() {
                parts.push(c.to_string());
            } else if c.is_one() {
                parts.push(mono.join("*"));
            } else {
                parts.push(format!("{}*{}", c, mono.join("*")));
            }
        }
        parts.join(" + ")
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        write!(f, "{} + O({})", self.display_with(&refs), self.cap + 1)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl<'a> std::ops::$trait<&'a TruncatedSeries> for &'a TruncatedSeries {
            type Output = TruncatedSeries;
            /// Panics on nvars/cap mismatch; use the `try_` form to recover.
            fn $method(self, rhs: &TruncatedSeries) -> TruncatedSeries {
                self.$inner(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Sub, sub, try_sub);
forward_binop!(Mul, mul, try_mul);

/// `Π subs_i^{e_i}` truncated at `cap`, built from the cached product for
/// `e` minus one unit in its last nonzero slot.
fn monomial_product<'a>(
    e: &ExponentVector,
    subs: &SeriesVector,
    cap: usize,
    nvars: usize,
    memo: &'a mut HashMap<ExponentVector, TruncatedSeries>,
) -> &'a TruncatedSeries {
    if !memo.contains_key(e) {
        let val = match e.as_slice().iter().rposition(|&k| k > 0) {
            None => TruncatedSeries::one(nvars, cap),
            Some(i) => {
                let mut prev = e.clone();
                prev.0[i] -= 1;
                monomial_product(&prev, subs, cap, nvars, memo).mul_truncated(&subs.components()[i], cap)
            }
        };
        memo.insert(e.clone(), val);
    }
    &memo[e]
}

/// Conjugation pairing on variables: `partner(i)` is the variable swapped
/// with `i` by the reality involution (itself for real variables).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    partner: Vec<usize>,
}

impl Pairing {
    pub fn new(partner: Vec<usize>) -> Result<Self, AlgebraError> {
        let n = partner.len();
        for (i, &p) in partner.iter().enumerate() {
            if p >= n {
                return Err(AlgebraError::InvalidPairing(format!("partner of {i} is out of range")));
            }
            if partner[p] != i {
                return Err(AlgebraError::InvalidPairing(format!("pairing is not symmetric at {i}")));
            }
        }
        Ok(Pairing { partner })
    }

    /// All variables self-conjugate.
    pub fn trivial(n: usize) -> Self {
        Pairing { partner: (0..n).collect() }
    }

    /// Build from a list of swapped pairs; unlisted variables are real.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self, AlgebraError> {
        let mut partner: Vec<usize> = (0..n).collect();
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b || partner[a] != a || partner[b] != b {
                return Err(AlgebraError::InvalidPairing(format!("bad pair ({a}, {b})")));
            }
            partner[a] = b;
            partner[b] = a;
        }
        Ok(Pairing { partner })
    }

    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }
}

/// An ordered list of series sharing `nvars` and cap: a vector field or a map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesVector {
    nvars: usize,
    cap: usize,
    components: Vec<TruncatedSeries>,
}

impl SeriesVector {
    pub fn new(components: Vec<TruncatedSeries>) -> Result<Self, AlgebraError> {
        let first = components.first().ok_or(AlgebraError::Empty)?;
        let (nvars, cap) = (first.nvars, first.cap);
        for c in &components {
            if c.nvars != nvars {
                return Err(AlgebraError::NvarsMismatch { left: nvars, right: c.nvars });
            }
            if c.cap != cap {
                return Err(AlgebraError::CapMismatch { left: cap, right: c.cap });
            }
        }
        Ok(SeriesVector { nvars, cap, components })
    }

    /// The identity map in `n` variables.
    pub fn identity(n: usize, cap: usize) -> Self {
        SeriesVector { nvars: n, cap, components: (0..n).map(|i| TruncatedSeries::variable(n, cap, i)).collect() }
    }

    pub fn zero(len: usize, nvars: usize, cap: usize) -> Self {
        SeriesVector { nvars, cap, components: vec![TruncatedSeries::zero(nvars, cap); len] }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &TruncatedSeries {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<TruncatedSeries> {
        self.components
    }

    pub fn recap(&self, cap: usize) -> Self {
        SeriesVector { nvars: self.nvars, cap, components: self.components.iter().map(|c| c.recap(cap)).collect() }
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: FnMut(&TruncatedSeries) -> TruncatedSeries,
    {
        SeriesVector::new(self.components.iter().map(f).collect()).expect("map must preserve shape")
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.len() != other.len() {
            return Err(AlgebraError::Shape(format!("vector lengths {} and {}", self.len(), other.len())));
        }
        let comps = self.components.iter().zip(&other.components).map(|(a, b)| a.try_add(b)).collect::<Result<_, _>>()?;
        SeriesVector::new(comps)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.len() != other.len() {
            return Err(AlgebraError::Shape(format!("vector lengths {} and {}", self.len(), other.len())));
        }
        let comps = self.components.iter().zip(&other.components).map(|(a, b)| a.try_sub(b)).collect::<Result<_, _>>()?;
        SeriesVector::new(comps)
    }

    /// Componentwise composition `self ∘ subs`.
    pub fn compose(&self, subs: &SeriesVector, allow_constant: bool) -> Result<Self, AlgebraError> {
        let comps = self.components.iter().map(|c| c.compose(subs, allow_constant)).collect::<Result<_, _>>()?;
        SeriesVector::new(comps)
    }

    /// Matrix of partial derivatives, `m[i][j] = ∂φ_i/∂x_j`.
    pub fn jacobian_matrix(&self) -> Vec<Vec<TruncatedSeries>> {
        self.components.iter().map(|c| (0..self.nvars).map(|j| c.derivative(j)).collect()).collect()
    }

    /// Determinant of the Jacobian matrix, expanded by cofactors row by row
    /// over column subsets.
    pub fn jacobian_determinant(&self) -> Result<TruncatedSeries, AlgebraError> {
        if self.len() != self.nvars {
            return Err(AlgebraError::Shape(format!("map has {} components in {} variables", self.len(), self.nvars)));
        }
        Ok(determinant(&self.jacobian_matrix(), self.nvars, self.cap))
    }

    /// Matrix-vector product with a series matrix.
    pub fn apply_matrix(m: &[Vec<TruncatedSeries>], v: &SeriesVector) -> Result<SeriesVector, AlgebraError> {
        let mut out = Vec::with_capacity(m.len());
        for row in m {
            if row.len() != v.len() {
                return Err(AlgebraError::Shape("matrix/vector size mismatch".into()));
            }
            let mut acc = TruncatedSeries::zero(v.nvars, v.cap);
            for (a, b) in row.iter().zip(&v.components) {
                acc = acc.try_add(&a.try_mul(b)?)?;
            }
            out.push(acc);
        }
        SeriesVector::new(out)
    }

    /// Compositional inverse of a near-identity map `x ↦ x + ψ(x)`, with
    /// `ψ` of order ≥ 2, by fixed-point iteration `y ← x − ψ(y)`; each pass
    /// fixes one more degree.
    pub fn compositional_inverse(&self) -> Result<SeriesVector, AlgebraError> {
        if self.len() != self.nvars {
            return Err(AlgebraError::Shape("inverse needs a square map".into()));
        }
        let id = SeriesVector::identity(self.nvars, self.cap);
        let psi = self.try_sub(&id)?;
        for c in psi.components() {
            if c.min_degree().is_some_and(|d| d < 2) {
                return Err(AlgebraError::NotNearIdentity);
            }
        }
        // y_d = x − ψ(y_{d−1}) is exact through degree d
        let mut y = SeriesVector::identity(self.nvars, 1.min(self.cap));
        for d in 2..=self.cap {
            let yd = y.recap(d);
            let next = SeriesVector::identity(self.nvars, d).try_sub(&psi.recap(d).compose(&yd, false)?)?;
            y = next;
        }
        Ok(y.recap(self.cap))
    }

    /// Applies the reality involution to each component and permutes the
    /// components by the same pairing (the action on vector fields).
    pub fn reality_involution(&self, pairing: &Pairing) -> Result<Self, AlgebraError> {
        if pairing.len() != self.len() {
            return Err(AlgebraError::InvalidPairing("pairing length differs from vector length".into()));
        }
        let mapped: Vec<TruncatedSeries> =
            self.components.iter().map(|c| c.reality_involution(pairing)).collect::<Result<_, _>>()?;
        let permuted = (0..self.len()).map(|i| mapped[pairing.partner(i)].clone()).collect();
        SeriesVector::new(permuted)
    }
}

fn determinant(m: &[Vec<TruncatedSeries>], n: usize, cap: usize) -> TruncatedSeries {
    let mut layer: HashMap<u64, TruncatedSeries> = HashMap::new();
    layer.insert(0, TruncatedSeries::one(n, cap));
    for row in m.iter().take(n) {
        let mut next: HashMap<u64, TruncatedSeries> = HashMap::new();
        let mut masks: Vec<_> = layer.keys().copied().collect();
        masks.sort_unstable();
        for mask in masks {
            let minor = &layer[&mask];
            if minor.is_zero() {
                continue;
            }
            for (j, entry) in row.iter().enumerate() {
                if mask & (1 << j) != 0 || entry.is_zero() {
                    continue;
                }
                // sign from the already-used columns to the right of j
                let inversions = (mask >> (j + 1)).count_ones();
                let mut prod = minor.mul_truncated(entry, cap);
                if inversions % 2 == 1 {
                    prod = prod.neg();
                }
                let slot = next.entry(mask | (1 << j)).or_insert_with(|| TruncatedSeries::zero(n, cap));
                *slot = slot.try_add(&prod).expect("same shape");
            }
        }
        layer = next;
    }
    layer.remove(&((1u64 << n) - 1)).unwrap_or_else(|| TruncatedSeries::zero(n, cap))
}

// Products over a common denominator: numerators are multiplied and summed
// as integers and each output coefficient is reduced once. Exponents are
// packed eight bits per variable.

fn packable(nvars: usize, cap: usize) -> bool {
    nvars <= 16 && cap <= 255
}

fn pack(e: &ExponentVector) -> u128 {
    e.0.iter().enumerate().fold(0u128, |acc, (i, &k)| acc | (u128::from(k) << (8 * i)))
}

fn unpack(p: u128, nvars: usize) -> ExponentVector {
    ExponentVector((0..nvars).map(|i| ((p >> (8 * i)) & 0xff) as u32).collect())
}

struct Scaled {
    den: BigInt,
    /// `(packed exponent, re·den, im·den)` grouped by degree.
    by_degree: Vec<Vec<(u128, BigInt, BigInt)>>,
    bits: u64,
}

fn scaled(s: &TruncatedSeries) -> Scaled {
    let mut den = BigInt::one();
    for c in s.terms.values() {
        for r in [&c.re, &c.im] {
            if !r.denom().is_one() {
                den = den.lcm(r.denom());
            }
        }
    }
    let mut by_degree = vec![Vec::new(); s.cap + 1];
    let mut bits = 0;
    for (e, c) in &s.terms {
        let re = c.re.numer() * (&den / c.re.denom());
        let im = c.im.numer() * (&den / c.im.denom());
        bits = bits.max(re.bits()).max(im.bits());
        by_degree[e.degree()].push((pack(e), re, im));
    }
    Scaled { den, by_degree, bits }
}

fn finish<T: Into<BigInt>>(acc: HashMap<u128, (T, T)>, den: &BigInt, nvars: usize, cap: usize) -> TruncatedSeries {
    let mut terms = BTreeMap::new();
    for (k, (re, im)) in acc {
        let (re, im): (BigInt, BigInt) = (re.into(), im.into());
        if re.is_zero() && im.is_zero() {
            continue;
        }
        terms.insert(unpack(k, nvars), GaussRational::new(Rational::new(re, den.clone()), Rational::new(im, den.clone())));
    }
    TruncatedSeries { nvars, cap, terms }
}

fn scaled_product(a: &TruncatedSeries, b: &TruncatedSeries, cap: usize) -> TruncatedSeries {
    let sa = scaled(a);
    let sb = scaled(b);
    let den = &sa.den * &sb.den;
    let pairs: usize = sa.by_degree.iter().map(Vec::len).sum::<usize>() * sb.by_degree.iter().map(Vec::len).sum::<usize>();
    let sum_bits = u64::from(usize::BITS - pairs.leading_zeros());
    let pairs_of_degrees = |f: &mut dyn FnMut(&(u128, BigInt, BigInt), &(u128, BigInt, BigInt))| {
        for (da, ga) in sa.by_degree.iter().enumerate() {
            for (db, gb) in sb.by_degree.iter().enumerate() {
                if da + db > cap {
                    break;
                }
                for x in ga {
                    for y in gb {
                        f(x, y);
                    }
                }
            }
        }
    };
    if sa.bits + sb.bits + 1 + sum_bits <= 126 {
        let mut acc: HashMap<u128, (i128, i128)> = HashMap::new();
        let small = |v: &BigInt| v.to_i128().expect("fits by the bit bound");
        pairs_of_degrees(&mut |(ka, ar, ai), (kb, br, bi)| {
            let (ar, ai, br, bi) = (small(ar), small(ai), small(br), small(bi));
            let e = acc.entry(ka + kb).or_insert((0, 0));
            e.0 += ar * br - ai * bi;
            e.1 += ar * bi + ai * br;
        });
        finish(acc, &den, a.nvars, cap)
    } else {
        let mut acc: HashMap<u128, (BigInt, BigInt)> = HashMap::new();
        pairs_of_degrees(&mut |(ka, ar, ai), (kb, br, bi)| {
            let e = acc.entry(ka + kb).or_insert_with(|| (BigInt::zero(), BigInt::zero()));
            e.0 += ar * br - ai * bi;
            e.1 += ar * bi + ai * br;
        });
        finish(acc, &den, a.nvars, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::gauss::rat;

    fn x(n: usize, cap: usize, i: usize) -> TruncatedSeries {
        TruncatedSeries::variable(n, cap, i)
    }

    fn c(n: usize, cap: usize, v: i64) -> TruncatedSeries {
        TruncatedSeries::constant(n, cap, GaussRational::from_int(v))
    }

    #[test]
    fn additive_inverse_and_sum() {
        let a = x(2, 3, 0);
        assert!((&a + &a.neg()).is_zero());
        let s = &(&x(2, 3, 0) + &x(2, 3, 1)) + &(&x(2, 3, 0) - &x(2, 3, 1));
        assert_eq!(s, x(2, 3, 0).scale(&GaussRational::from_int(2)));
    }

    #[test]
    fn product_and_truncation() {
        let one = c(1, 2, 1);
        let p = (&one + &x(1, 2, 0)).try_mul(&(&one - &x(1, 2, 0))).unwrap();
        assert_eq!(p, &one - &x(1, 2, 0).pow(2));
        let top = x(1, 4, 0).pow(4);
        assert!((&top * &x(1, 4, 0)).is_zero());
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = x(2, 3, 0);
        let b = x(2, 4, 0);
        assert!(matches!(a.try_add(&b), Err(AlgebraError::CapMismatch { .. })));
        let d = x(3, 3, 0);
        assert!(matches!(a.try_mul(&d), Err(AlgebraError::NvarsMismatch { .. })));
    }

    #[test]
    fn compose_square_of_sum() {
        let f = x(2, 3, 0).pow(2);
        let subs = SeriesVector::new(vec![&x(2, 3, 0) + &x(2, 3, 1), x(2, 3, 1)]).unwrap();
        let g = f.compose(&subs, false).unwrap();
        let expected = &(&x(2, 3, 0).pow(2) + &(&x(2, 3, 0) * &x(2, 3, 1)).scale(&GaussRational::from_int(2))) + &x(2, 3, 1).pow(2);
        assert_eq!(g, expected);
    }

    #[test]
    fn compose_rejects_constants_without_flag() {
        let f = x(1, 3, 0);
        let subs = SeriesVector::new(vec![&c(1, 3, 1) + &x(1, 3, 0)]).unwrap();
        assert!(matches!(f.compose(&subs, false), Err(AlgebraError::ConstantTerm { index: 0 })));
        assert_eq!(f.compose(&subs, true).unwrap(), &c(1, 3, 1) + &x(1, 3, 0));
    }

    #[test]
    fn jacobian_of_unipotent_maps() {
        let id = SeriesVector::identity(3, 4);
        assert_eq!(id.jacobian_determinant().unwrap(), TruncatedSeries::one(3, 4));
        let phi = SeriesVector::new(vec![
            x(3, 4, 0),
            x(3, 4, 1),
            &(&x(3, 4, 2) - &x(3, 4, 0).pow(2)) - &x(3, 4, 1).pow(2),
        ])
        .unwrap();
        assert_eq!(phi.jacobian_determinant().unwrap(), TruncatedSeries::one(3, 4));
    }

    #[test]
    fn reciprocal_of_geometric() {
        let one = c(1, 5, 1);
        let r = (&one - &x(1, 5, 0)).reciprocal().unwrap();
        let expected = TruncatedSeries::from_terms(
            1,
            5,
            (0..=5).map(|k| (ExponentVector::new(vec![k]), GaussRational::one())),
        );
        assert_eq!(r, expected);
        assert!(matches!(x(1, 5, 0).reciprocal(), Err(AlgebraError::NotUnit)));
    }

    #[test]
    fn reality_involution_examples() {
        let p = Pairing::from_pairs(2, &[(0, 1)]).unwrap();
        let f = x(2, 3, 0).scale(&GaussRational::i());
        let g = f.reality_involution(&p).unwrap();
        assert_eq!(g, x(2, 3, 1).scale(&GaussRational::new(rat(0, 1), rat(-1, 1))));
        assert_eq!(g.reality_involution(&p).unwrap(), f);
        assert!(Pairing::new(vec![1, 2, 0]).is_err());
    }

    #[test]
    fn inverse_of_quadratic_map() {
        let phi = SeriesVector::new(vec![&x(2, 6, 0) + &x(2, 6, 1).pow(2), &x(2, 6, 1) + &(&x(2, 6, 0) * &x(2, 6, 1))]).unwrap();
        let inv = phi.compositional_inverse().unwrap();
        assert_eq!(phi.compose(&inv, false).unwrap(), SeriesVector::identity(2, 6));
        assert_eq!(inv.compose(&phi, false).unwrap(), SeriesVector::identity(2, 6));
    }

    #[test]
    fn derivative_lowers_degree() {
        let f = &x(2, 4, 0).pow(3) + &(&x(2, 4, 0) * &x(2, 4, 1));
        let d = f.derivative(0);
        assert_eq!(d, &x(2, 4, 0).pow(2).scale(&GaussRational::from_int(3)) + &x(2, 4, 1));
    }
}
