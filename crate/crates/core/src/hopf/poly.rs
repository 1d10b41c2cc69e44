//! Float polynomials evaluated on cylinders `x = r cos θ, y = r sin θ, z = r s`.

use crate::algebra::{rat_to_f64, TruncatedSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct RealPoly {
    nvars: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl RealPoly {
    pub fn zero(nvars: usize) -> Self {
        RealPoly { nvars, terms: Vec::new() }
    }

    /// Real parts of the coefficients.
    pub fn from_series(s: &TruncatedSeries) -> Self {
        RealPoly {
            nvars: s.nvars(),
            terms: s.terms().map(|(e, c)| (rat_to_f64(&c.re), e.as_slice().to_vec())).collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    pub fn push(&mut self, c: f64, exps: Vec<u32>) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c != 0.0 {
            self.terms.push((c, exps));
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        RealPoly { nvars: self.nvars, terms: self.terms.iter().map(|(c, e)| (c * k, e.clone())).collect() }
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.iter().map(|(_, e)| e.iter().sum()).min()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// `P(r cos θ, r sin θ, r s) / r^shift`, with the power of `r` reduced
    /// term by term.
    pub fn eval_cylindrical(&self, cos: f64, sin: f64, r: f64, s: &[f64], shift: i32) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                let d: u32 = e.iter().sum();
                let mut v = c * r.powi(d as i32 - shift) * cos.powi(e[0] as i32) * sin.powi(e[1] as i32);
                for (k, sj) in e[2..].iter().zip(s) {
                    v *= sj.powi(*k as i32);
                }
                v
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{ExponentVector, GaussRational};

    #[test]
    fn cylindrical_matches_direct() {
        let s = TruncatedSeries::from_terms(
            3,
            4,
            [
                (ExponentVector::new(vec![2, 1, 0]), GaussRational::from_int(3)),
                (ExponentVector::new(vec![0, 1, 2]), GaussRational::from_int(-2)),
            ],
        );
        let p = RealPoly::from_series(&s);
        let (th, r, sv) = (0.7f64, 0.3, 0.4);
        let direct = p.eval(&[r * th.cos(), r * th.sin(), r * sv]) / r;
        assert!((p.eval_cylindrical(th.cos(), th.sin(), r, &[sv], 1) - direct).abs() < 1e-15);
    }
}
