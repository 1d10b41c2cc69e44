#![allow(dead_code)]

use std::path::PathBuf;

use hopfnf::algebra::{rat, Rational, SeriesVector, TruncatedSeries};
use hopfnf::normalform::NormalizeOptions;
use hopfnf::vfield::{check_hypothesis_h, parse_system, RealSystem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Example {
    pub name: &'static str,
    /// Working degree for the symbolic checks.
    pub degree: usize,
    pub opts: NormalizeOptions,
}

/// The shipped systems. `four_d` has the extra resonance `z₃² ∈ ż₄`, so it
/// runs with the hypothesis check relaxed.
pub const EXAMPLES: [Example; 4] = [
    Example { name: "s1", degree: 8, opts: NormalizeOptions { require_hypothesis: true } },
    Example { name: "paraboloid", degree: 8, opts: NormalizeOptions { require_hypothesis: true } },
    Example { name: "l3", degree: 10, opts: NormalizeOptions { require_hypothesis: true } },
    Example { name: "four_d", degree: 8, opts: NormalizeOptions { require_hypothesis: false } },
];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(format!("{name}.sys"))
}

pub fn load(name: &str) -> RealSystem {
    let text = std::fs::read_to_string(data_path(name)).expect("data file");
    parse_system(&text).expect("valid system")
}

fn random_rational(rng: &mut ChaCha8Rng, num: i64, den: i64) -> Rational {
    rat(rng.gen_range(-num..=num), rng.gen_range(1..=den))
}

/// A random system with quadratic and cubic terms whose spectrum satisfies
/// the resonance hypothesis. Hyperbolic eigenvalues share a sign.
pub fn random_cubic_system(rng: &mut ChaCha8Rng) -> RealSystem {
    loop {
        let n = rng.gen_range(3..=5);
        let sign = if rng.gen_bool(0.5) { -1 } else { 1 };
        let mut text = format!("dim {n}\n");
        let mut width = 2;
        while width < n {
            if n - width >= 2 && rng.gen_bool(0.4) {
                let a = rng.gen_range(1..=5) * sign;
                let b = rng.gen_range(1..=4);
                text += &format!("block complex {a}/{} {b}/{}\n", rng.gen_range(1..=3), rng.gen_range(1..=3));
                width += 2;
            } else {
                text += &format!("block real {}/{}\n", rng.gen_range(1..=7) * sign, rng.gen_range(1..=4));
                width += 1;
            }
        }
        for comp in 1..=n {
            for _ in 0..rng.gen_range(2..=5) {
                let mut e = vec![0u32; n];
                let deg = rng.gen_range(2..=3);
                for _ in 0..deg {
                    e[rng.gen_range(0..n)] += 1;
                }
                let c = random_rational(rng, 3, 3);
                let exps: Vec<String> = e.iter().map(u32::to_string).collect();
                text += &format!("term {comp} {c} {}\n", exps.join(" "));
            }
        }
        let sys = parse_system(&text).expect("generated system parses");
        if check_hypothesis_h(&sys).holds {
            return sys;
        }
    }
}

/// `𝒳(J) − J·div 𝒳` through `cap`, written directly from the definition.
pub fn multiplier_defect(field: &SeriesVector, j: &TruncatedSeries, cap: usize) -> TruncatedSeries {
    let j = j.recap(cap);
    let mut out = TruncatedSeries::zero(j.nvars(), cap);
    for (i, f) in field.recap(cap).components().iter().enumerate() {
        out = &out + &(&(f * &j.derivative(i)) - &(&j * &f.derivative(i)));
    }
    out
}
