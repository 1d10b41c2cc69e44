//! Integer relations `⟨k, λ⟩ = 0` among the eigenvalues.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{RealSystem, SpectrumData};
#[cfg(test)]
use super::LinearBlock;
use crate::algebra::GaussRational;

/// Z-basis of `{k ∈ ℤⁿ : ⟨k, λ⟩ = 0}` in Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResonanceLattice {
    pub rank: usize,
    pub generators: Vec<Vec<i64>>,
}

impl ResonanceLattice {
    pub fn contains(&self, k: &[i64]) -> bool {
        // HNF rows: pivot columns strictly increase, so reduce greedily.
        let mut r: Vec<i64> = k.to_vec();
        for g in &self.generators {
            let p = match g.iter().position(|&v| v != 0) {
                Some(p) => p,
                None => continue,
            };
            if r[p] % g[p] != 0 {
                return false;
            }
            let q = r[p] / g[p];
            for (ri, gi) in r.iter_mut().zip(g) {
                *ri -= q * gi;
            }
        }
        r.iter().all(|&v| v == 0)
    }
}

/// `⟨k, λ⟩` evaluated exactly.
pub fn pairing_value(k: &[i64], lambda: &[GaussRational]) -> GaussRational {
    let mut acc = GaussRational::zero();
    for (ki, li) in k.iter().zip(lambda) {
        if *ki != 0 {
            acc += &li.scale(&crate::algebra::rat(*ki, 1));
        }
    }
    acc
}

fn lcm_of_denominators(row: &[crate::algebra::Rational]) -> BigInt {
    row.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Z-basis of the integer kernel of an integer matrix, via unimodular column
/// reduction. The returned basis is in row Hermite normal form.
pub fn integer_kernel(rows: &[Vec<BigInt>], n: usize) -> Vec<Vec<BigInt>> {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    // u starts as the identity; columns of u track the column operations.
    let mut u: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    let mut pivot = 0usize;
    for r in 0..a.len() {
        if pivot >= n {
            break;
        }
        // gcd-eliminate entries right of the pivot in row r
        for j in pivot + 1..n {
            if a[r][j].is_zero() {
                continue;
            }
            let (p, q) = (a[r][pivot].clone(), a[r][j].clone());
            let eg = p.extended_gcd(&q);
            let (g, x, y) = (eg.gcd, eg.x, eg.y);
            let (pg, qg) = (&p / &g, &q / &g);
            // [col_pivot, col_j] ← [x·c_p + y·c_j, −(q/g)·c_p + (p/g)·c_j]
            let mix = |m: &mut Vec<Vec<BigInt>>| {
                for row in m.iter_mut() {
                    let cp = row[pivot].clone();
                    let cj = row[j].clone();
                    row[pivot] = &x * &cp + &y * &cj;
                    row[j] = -(&qg * &cp) + &pg * &cj;
                }
            };
            mix(&mut a);
            mix(&mut u);
        }
        if !a[r][pivot].is_zero() {
            pivot += 1;
        }
    }
    let basis: Vec<Vec<BigInt>> = (pivot..n).map(|c| (0..n).map(|i| u[i][c].clone()).collect()).collect();
    hermite_rows(basis)
}

/// Row Hermite normal form of a full-row-rank integer matrix.
fn hermite_rows(mut b: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let rows = b.len();
    if rows == 0 {
        return b;
    }
    let n = b[0].len();
    let mut r = 0usize;
    for c in 0..n {
        if r >= rows {
            break;
        }
        // Euclid among rows r.. on column c
        loop {
            let nz: Vec<usize> = (r..rows).filter(|&i| !b[i][c].is_zero()).collect();
            if nz.len() <= 1 {
                if let Some(&i) = nz.first() {
                    b.swap(r, i);
                }
                break;
            }
            let min = *nz.iter().min_by_key(|&&i| b[i][c].abs()).unwrap();
            b.swap(r, min);
            for i in r + 1..rows {
                if b[i][c].is_zero() {
                    continue;
                }
                let q = b[i][c].div_floor(&b[r][c]);
                for k in 0..n {
                    let t = &q * &b[r][k];
                    b[i][k] -= t;
                }
            }
        }
        if b[r][c].is_zero() {
            continue;
        }
        if b[r][c].is_negative() {
            for k in 0..n {
                b[r][k] = -b[r][k].clone();
            }
        }
        for i in 0..r {
            let q = b[i][c].div_floor(&b[r][c]);
            if q.is_zero() {
                continue;
            }
            for k in 0..n {
                let t = &q * &b[r][k];
                b[i][k] -= t;
            }
        }
        r += 1;
    }
    b
}

/// Integer kernel of `k ↦ ⟨k, λ⟩`, from the two rational constraint rows
/// `Re⟨k,λ⟩ = 0` and `Im⟨k,λ⟩ = 0`.
pub fn resonance_lattice(spec: &SpectrumData) -> ResonanceLattice {
    let n = spec.dim();
    let re: Vec<_> = spec.lambda.iter().map(|l| l.re.clone()).collect();
    let im: Vec<_> = spec.lambda.iter().map(|l| l.im.clone()).collect();
    let mut rows = Vec::new();
    for row in [re, im] {
        let l = lcm_of_denominators(&row);
        rows.push(row.iter().map(|r| (r * crate::algebra::Rational::from_integer(l.clone())).to_integer()).collect());
    }
    let kernel = integer_kernel(&rows, n);
    let generators: Vec<Vec<i64>> =
        kernel.iter().map(|v| v.iter().map(|x| x.to_i64().expect("lattice generator fits in i64")).collect()).collect();
    ResonanceLattice { rank: generators.len(), generators }
}

/// Outcome of checking the resonance hypothesis on a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypothesisReport {
    /// Unconstrained integer kernel of `k ↦ ⟨k, λ⟩`.
    pub lattice: ResonanceLattice,
    /// Rank of the span of the shifted resonance set
    /// `{k : ⟨k,λ⟩ = 0, k + e_j ∈ ℤ₊ⁿ for some j}`; the hypothesis asks for 1.
    pub resonance_rank: usize,
    /// A member of the shifted resonance set not parallel to `(1,1,0,…,0)`.
    pub extra_resonance: Option<Vec<i64>>,
    /// Guaranteed by the block input format.
    pub diagonalizable: bool,
    pub all_hyperbolic: bool,
    /// All `Re λ_j` (j ≥ 3) of one sign: needed for the analytic center case.
    pub same_sign: bool,
    pub holds: bool,
}

pub fn check_hypothesis_h(sys: &RealSystem) -> HypothesisReport {
    let spec = sys.spectrum();
    let lattice = resonance_lattice(&spec);
    let extra_resonance = find_extra_resonance(&spec.lambda);
    let resonance_rank = if extra_resonance.is_some() { 2 } else { 1 };
    let holds = extra_resonance.is_none() && spec.all_hyperbolic;
    HypothesisReport {
        diagonalizable: true,
        all_hyperbolic: spec.all_hyperbolic,
        same_sign: spec.same_sign,
        resonance_rank,
        extra_resonance,
        holds,
        lattice,
    }
}

/// Searches the shifted resonance set for a vector with nonzero hyperbolic
/// part. Such a vector exists iff the set spans more than `(1,1,0,…,0)`.
///
/// Writing `w` for the hyperbolic part, we need `Σ w_i Re λ_i = 0` and
/// `Σ w_i Im λ_i ∈ ℤ` (the rotation coordinates absorb the integer), with
/// `w ≥ 0` or `w ≥ −e_i`. Mixed or vanishing real parts always admit one;
/// with one sign only the bounded shifted case remains, which is enumerated.
pub fn find_extra_resonance(lambda: &[GaussRational]) -> Option<Vec<i64>> {
    use crate::algebra::Rational;
    let hyp = &lambda[2..];
    let m = hyp.len();
    let finish = |w: Vec<i64>| -> Vec<i64> {
        let im: Rational = w.iter().zip(hyp).map(|(&k, l)| &l.im * Rational::from_integer(k.into())).sum();
        // λ₁ = 𝐢, λ₂ = −𝐢: (v₁ − v₂) + Im = 0
        let diff = (-im).to_integer().to_i64().expect("small");
        let (v1, v2) = if diff >= 0 { (diff, 0) } else { (0, -diff) };
        let mut v = vec![v1, v2];
        v.extend(w);
        v
    };
    let den = |r: &Rational| r.denom().to_i64().expect("denominator fits in i64");
    // vanishing real part
    for (i, l) in hyp.iter().enumerate() {
        if l.re.is_zero() {
            let mut w = vec![0; m];
            w[i] = den(&l.im);
            return Some(finish(w));
        }
    }
    // mixed signs
    let pos = hyp.iter().position(|l| l.re.is_positive());
    let neg = hyp.iter().position(|l| l.re.is_negative());
    if let (Some(p), Some(q)) = (pos, neg) {
        let a = hyp[p].re.clone();
        let b = -hyp[q].re.clone();
        let d = den(&a) * den(&b) * den(&hyp[p].im) * den(&hyp[q].im);
        let mut w = vec![0; m];
        w[p] = (&b * Rational::from_integer(d.into())).to_integer().to_i64().expect("small");
        w[q] = (&a * Rational::from_integer(d.into())).to_integer().to_i64().expect("small");
        return Some(finish(w));
    }
    // one sign: w = −e_{i0} + (nonnegative), Σ_{i≠i0} w_i |Re λ_i| = |Re λ_{i0}|
    for i0 in 0..m {
        let target = hyp[i0].re.abs();
        let mut w = vec![0i64; m];
        w[i0] = -1;
        if let Some(found) = shifted_search(hyp, i0, 0, &target, &mut w) {
            return Some(finish(found));
        }
    }
    None
}

fn shifted_search(
    hyp: &[GaussRational],
    i0: usize,
    idx: usize,
    remaining: &crate::algebra::Rational,
    w: &mut Vec<i64>,
) -> Option<Vec<i64>> {
    use crate::algebra::Rational;
    if remaining.is_zero() {
        let im: Rational = w.iter().zip(hyp).map(|(&k, l)| &l.im * Rational::from_integer(k.into())).sum();
        return im.is_integer().then(|| w.clone());
    }
    if idx == hyp.len() {
        return None;
    }
    if idx == i0 {
        return shifted_search(hyp, i0, idx + 1, remaining, w);
    }
    let step = hyp[idx].re.abs();
    let max = (remaining / &step).floor().to_integer().to_i64().expect("bounded");
    for k in 0..=max {
        w[idx] = k;
        let rest = remaining - &step * Rational::from_integer(k.into());
        if let Some(found) = shifted_search(hyp, i0, idx + 1, &rest, w) {
            return Some(found);
        }
    }
    w[idx] = 0;
    None
}
