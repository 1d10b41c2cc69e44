//! Line-oriented text format for real systems.
//!
//! ```text
//! dim 3
//! block real -1/1
//! term 1 1/1 3 0 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{LinearBlock, RealSystem, SystemError};
use crate::algebra::{fmt_rat, ExponentVector, GaussRational, Rational, SeriesVector, TruncatedSeries};

fn parse_err(line: usize, message: impl Into<String>) -> SystemError {
    SystemError::Parse { line, message: message.into() }
}

fn parse_rational(tok: &str, line: usize) -> Result<Rational, SystemError> {
    let (n, d) = match tok.split_once('/') {
        Some((n, d)) => (n, d),
        None => (tok, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| parse_err(line, format!("bad rational `{tok}`")))?;
    let d: BigInt = d.parse().map_err(|_| parse_err(line, format!("bad rational `{tok}`")))?;
    if d.is_zero() {
        return Err(parse_err(line, format!("zero denominator in `{tok}`")));
    }
    Ok(Rational::new(n, d))
}

pub fn parse_system(text: &str) -> Result<RealSystem, SystemError> {
    let mut dim: Option<usize> = None;
    let mut blocks = Vec::new();
    let mut terms: Vec<BTreeMap<Vec<u32>, Rational>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "dim" => {
                if dim.is_some() {
                    return Err(parse_err(line, "duplicate `dim` line"));
                }
                if toks.len() != 2 {
                    return Err(parse_err(line, "expected `dim <n>`"));
                }
                let n: usize = toks[1].parse().map_err(|_| parse_err(line, "bad dimension"))?;
                if n < 3 {
                    return Err(parse_err(line, format!("dimension {n} < 3")));
                }
                dim = Some(n);
                terms = vec![BTreeMap::new(); n];
            }
            "block" => {
                if dim.is_none() {
                    return Err(parse_err(line, "`block` before `dim`"));
                }
                let b = match (toks.get(1).copied(), toks.len()) {
                    (Some("real"), 3) => LinearBlock::Real(parse_rational(toks[2], line)?),
                    (Some("complex"), 4) => {
                        let a = parse_rational(toks[2], line)?;
                        let b = parse_rational(toks[3], line)?;
                        if b.is_zero() {
                            return Err(parse_err(line, "complex block with b = 0"));
                        }
                        LinearBlock::Complex { a, b }
                    }
                    _ => return Err(parse_err(line, "expected `block real a` or `block complex a b`")),
                };
                blocks.push(b);
            }
            "term" => {
                let n = dim.ok_or_else(|| parse_err(line, "`term` before `dim`"))?;
                if toks.len() != 3 + n {
                    return Err(parse_err(line, format!("expected component, coefficient and {n} exponents")));
                }
                let comp: usize = toks[1].parse().map_err(|_| parse_err(line, "bad component index"))?;
                if comp == 0 || comp > n {
                    return Err(parse_err(line, format!("component {comp} out of range 1..{n}")));
                }
                let c = parse_rational(toks[2], line)?;
                let exps = toks[3..]
                    .iter()
                    .map(|t| t.parse::<u32>().map_err(|_| parse_err(line, format!("bad exponent `{t}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let deg: u32 = exps.iter().sum();
                if deg < 2 {
                    return Err(parse_err(line, format!("term of degree {deg}; nonlinear terms need degree ≥ 2")));
                }
                *terms[comp - 1].entry(exps).or_insert_with(Rational::zero) += c;
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    let n = dim.ok_or_else(|| parse_err(1, "missing `dim` line"))?;
    // cap = highest degree that survives summation
    let max_deg = terms
        .iter()
        .flat_map(|m| m.iter().filter(|(_, c)| !c.is_zero()).map(|(e, _)| e.iter().sum::<u32>() as usize))
        .fold(2, usize::max);
    let comps = terms
        .into_iter()
        .map(|m| {
            TruncatedSeries::from_terms(
                n,
                max_deg,
                m.into_iter().map(|(e, c)| (ExponentVector::new(e), GaussRational::real(c))),
            )
        })
        .collect();
    let nonlinear = SeriesVector::new(comps)?;
    RealSystem::new(n, blocks, nonlinear)
}

pub fn serialize_system(sys: &RealSystem) -> String {
    let mut out = String::new();
    writeln!(out, "dim {}", sys.dim()).unwrap();
    for b in sys.blocks() {
        match b {
            LinearBlock::Real(a) => writeln!(out, "block real {}", fmt_rat(a)).unwrap(),
            LinearBlock::Complex { a, b } => writeln!(out, "block complex {} {}", fmt_rat(a), fmt_rat(b)).unwrap(),
        }
    }
    for (i, c) in sys.nonlinear().components().iter().enumerate() {
        for (e, v) in c.terms() {
            let exps: Vec<String> = e.as_slice().iter().map(u32::to_string).collect();
            writeln!(out, "term {} {} {}", i + 1, fmt_rat(&v.re), exps.join(" ")).unwrap();
        }
    }
    out
}
