mod common;

use std::collections::BTreeMap;

use hopfnf::algebra::{rat, ExponentVector, GaussRational, Rational, SeriesVector, TruncatedSeries};
use hopfnf::vfield::{complexify, realify, resonance_lattice, ConjugateCoordinates, SpectrumData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use num_traits::Zero;
use proptest::prelude::*;

type Dense = BTreeMap<Vec<u32>, (Rational, Rational)>;

fn gauss() -> impl Strategy<Value = GaussRational> {
    (-9i64..=9, 1i64..=5, -9i64..=9, 1i64..=5).prop_map(|(a, b, c, d)| GaussRational::new(rat(a, b), rat(c, d)))
}

fn series(nvars: usize, cap: usize, min_deg: u32) -> impl Strategy<Value = TruncatedSeries> {
    // a degree, then that many variable indices
    let exps = (min_deg as usize..=cap, proptest::collection::vec(0..nvars, cap)).prop_map(move |(d, idx)| {
        let mut e = vec![0u32; nvars];
        idx.iter().take(d).for_each(|&i| e[i] += 1);
        e
    });
    proptest::collection::vec((exps, gauss()), 0..8).prop_map(move |terms| {
        TruncatedSeries::from_terms(nvars, cap, terms.into_iter().map(|(e, c)| (ExponentVector::new(e), c)))
    })
}

fn map(nvars: usize, cap: usize) -> impl Strategy<Value = SeriesVector> {
    proptest::collection::vec(series(nvars, cap, 1), nvars).prop_map(|c| SeriesVector::new(c).unwrap())
}

fn dense(s: &TruncatedSeries) -> Dense {
    s.terms().map(|(e, c)| (e.as_slice().to_vec(), (c.re.clone(), c.im.clone()))).collect()
}

/// Schoolbook product on plain exponent vectors.
fn dense_mul(a: &Dense, b: &Dense, cap: u32) -> Dense {
    let mut out = Dense::new();
    for (ea, (ar, ai)) in a {
        for (eb, (br, bi)) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            if e.iter().sum::<u32>() > cap {
                continue;
            }
            let slot = out.entry(e).or_insert_with(|| (Rational::zero(), Rational::zero()));
            slot.0 += ar * br - ai * bi;
            slot.1 += ar * bi + ai * br;
        }
    }
    out.retain(|_, (r, i)| !(r.is_zero() && i.is_zero()));
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn product_matches_dense(a in series(3, 6, 0), b in series(3, 6, 0)) {
        prop_assert_eq!(dense(&(&a * &b)), dense_mul(&dense(&a), &dense(&b), 6));
    }

    #[test]
    fn product_matches_dense_many_variables(a in series(17, 3, 0), b in series(17, 3, 0)) {
        prop_assert_eq!(dense(&(&a * &b)), dense_mul(&dense(&a), &dense(&b), 3));
    }

    /// Numerators past the `i128` range.
    #[test]
    fn product_matches_dense_large_coefficients(a in series(2, 5, 0), b in series(2, 5, 0)) {
        let big = Rational::from_integer(num_bigint::BigInt::from(10).pow(30)) + rat(1, 7);
        let (a, b) = (a.scale_rat(&big), b.scale_rat(&big));
        prop_assert_eq!(dense(&(&a * &b)), dense_mul(&dense(&a), &dense(&b), 5));
    }

    #[test]
    fn ring_axioms(a in series(2, 5, 0), b in series(2, 5, 0), c in series(2, 5, 0)) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
        prop_assert_eq!(&a * &TruncatedSeries::one(2, 5), a);
    }

    #[test]
    fn composition_is_associative(f in series(2, 5, 1), g in map(2, 5), h in map(2, 5)) {
        let left = f.compose(&g, false).unwrap().compose(&h, false).unwrap();
        let right = f.compose(&g.compose(&h, false).unwrap(), false).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn composition_is_a_homomorphism(f in series(2, 5, 0), g in series(2, 5, 0), h in map(2, 5)) {
        let lhs = (&f * &g).compose(&h, false).unwrap();
        let rhs = &f.compose(&h, false).unwrap() * &g.compose(&h, false).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    /// D(f∘G) = (∇f∘G)·DG, compared below the cap where truncation cannot
    /// reach.
    #[test]
    fn chain_rule(f in series(2, 5, 1), g in map(2, 5)) {
        let fg = f.compose(&g, false).unwrap();
        for i in 0..2 {
            let lhs = fg.derivative(i).recap(4);
            let mut rhs = TruncatedSeries::zero(2, 5);
            for k in 0..2 {
                let outer = f.derivative(k).compose(&g, false).unwrap();
                rhs = &rhs + &(&outer * &g.component(k).derivative(i));
            }
            prop_assert_eq!(lhs, rhs.recap(4));
        }
    }

    #[test]
    fn near_identity_inverse(psi in proptest::collection::vec(series(3, 5, 2), 3)) {
        let phi = SeriesVector::identity(3, 5).try_add(&SeriesVector::new(psi).unwrap()).unwrap();
        let inv = phi.compositional_inverse().unwrap();
        prop_assert_eq!(phi.compose(&inv, false).unwrap(), SeriesVector::identity(3, 5));
        prop_assert_eq!(inv.compose(&phi, false).unwrap(), SeriesVector::identity(3, 5));
    }

    #[test]
    fn conjugate_coordinates_round_trip(f in series(4, 4, 0)) {
        let real = f.map_coeffs(|c| GaussRational::real(c.re.clone()));
        let cc = ConjugateCoordinates::new(4, &[(0, 1), (2, 3)], 4);
        let back = cc.realify_function(&cc.complexify_function(&real).unwrap()).unwrap();
        prop_assert_eq!(&back, &real);
        // real functions are fixed by the reality involution in conjugate coordinates
        let z = cc.complexify_function(&real).unwrap();
        prop_assert_eq!(z.reality_involution(&cc.pairing).unwrap(), z);
    }

    #[test]
    fn lattice_generators_are_relations(
        re in proptest::collection::vec((-6i64..=6, 1i64..=4), 1..4),
        im in proptest::collection::vec((-6i64..=6, 1i64..=4), 1..4),
    ) {
        let mut lambda = vec![GaussRational::i(), -GaussRational::i()];
        for ((a, b), (c, d)) in re.iter().zip(&im) {
            lambda.push(GaussRational::new(rat(*a, *b), rat(*c, *d)));
        }
        let lat = resonance_lattice(&SpectrumData { lambda: lambda.clone(), all_hyperbolic: true, same_sign: false });
        prop_assert!(lat.contains(&[1, 1].iter().copied().chain(std::iter::repeat(0).take(lambda.len() - 2)).collect::<Vec<_>>()));
        for g in &lat.generators {
            let mut acc = GaussRational::zero();
            for (k, l) in g.iter().zip(&lambda) {
                acc += &l.scale(&rat(*k, 1));
            }
            prop_assert!(acc.is_zero(), "{:?}", g);
        }
    }

    /// Cofactor expansion along the first row.
    #[test]
    fn determinant_matches_cofactor_expansion(psi in proptest::collection::vec(series(3, 4, 2), 3)) {
        let phi = SeriesVector::identity(3, 4).try_add(&SeriesVector::new(psi).unwrap()).unwrap();
        let m = phi.jacobian_matrix();
        let minor = |r1: usize, r2: usize, c1: usize, c2: usize| &(&m[r1][c1] * &m[r2][c2]) - &(&m[r1][c2] * &m[r2][c1]);
        let det = &(&(&m[0][0] * &minor(1, 2, 1, 2)) - &(&m[0][1] * &minor(1, 2, 0, 2))) + &(&m[0][2] * &minor(1, 2, 0, 1));
        prop_assert_eq!(phi.jacobian_determinant().unwrap(), det);
    }

    #[test]
    fn complexify_realify_round_trip(seed in any::<u64>()) {
        let sys = common::random_cubic_system(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = complexify(&sys);
        prop_assert!(c.is_reality_symmetric().unwrap());
        prop_assert_eq!(realify(&c).unwrap(), sys);
    }
}

#[test]
fn geometric_series_under_substitution() {
    // 1/(1 − x) with x ↦ x + x² is 1/(1 − x − x²): Fibonacci coefficients
    let one = TruncatedSeries::one(1, 6);
    let x = TruncatedSeries::variable(1, 6, 0);
    let geo = (&one - &x).reciprocal().unwrap();
    let sub = SeriesVector::new(vec![&x + &(&x * &x)]).unwrap();
    let got = geo.compose(&sub, false).unwrap();
    let fib = [1, 1, 2, 3, 5, 8, 13];
    for (k, f) in fib.iter().enumerate() {
        assert_eq!(got.coeff(&ExponentVector::new(vec![k as u32])), GaussRational::from_int(*f));
    }
}

