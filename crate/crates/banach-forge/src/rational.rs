//! Exact rational scalars.
//!
//! The only scalar type in the toolkit is [`Rational`], an arbitrary-precision
//! fraction kept in lowest terms with a positive denominator. Text form is
//! canonical: `p/q` for non-integers, plain `p` otherwise.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid rational literal `{literal}`")]
pub struct ParseRationalError {
    pub literal: String,
}

/// `rat(p, q)` builds `p/q`, reduced.
pub fn rat(p: i64, q: i64) -> Rational {
    assert!(q != 0, "zero denominator");
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// 2^-k as an exact rational.
pub fn pow2_inv(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k)
}

pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        literal: s.to_string(),
    };
    let s = s.trim();
    if s.is_empty() {
        return Err(err());
    }
    match s.split_once('/') {
        None => {
            let n: BigInt = s.parse().map_err(|_| err())?;
            Ok(Rational::from_integer(n))
        }
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            Ok(Rational::new(p, q))
        }
    }
}

/// Canonical text form: `p/q`, or `p` when the denominator is one.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn format_point(x: &[Rational]) -> String {
    x.iter()
        .map(format_rational)
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when the reduced denominator is at most `bound`.
pub fn denominator_within(x: &Rational, bound: u64) -> bool {
    x.denom() <= &BigInt::from(bound)
}

/// Budget membership: |numerator| and denominator both at most `bound`.
pub fn magnitude_within(x: &Rational, bound: u64) -> bool {
    let b = BigInt::from(bound);
    x.numer().abs() <= b && x.denom() <= &b
}

/// Nearest multiple of `1/den`; exact halves round toward zero.
pub fn round_to_grid(x: &Rational, den: u64) -> Rational {
    let den = BigInt::from(den);
    let scaled = x * Rational::from_integer(den.clone());
    let (mut q, r) = scaled.numer().div_rem(scaled.denom());
    // q + r/denom with |r| < denom; pick the closer integer, ties toward zero.
    let twice = BigInt::from(2) * r.abs();
    if &twice > scaled.denom() {
        if r.is_negative() {
            q -= 1;
        } else {
            q += 1;
        }
    }
    Rational::new(q, den)
}

/// All reduced rationals `p/q` with `|p| <= bound`, `1 <= q <= bound`,
/// sorted ascending. This is the coordinate alphabet of a complexity budget.
pub fn budget_grid(bound: u64) -> Vec<Rational> {
    let mut out = std::collections::BTreeSet::new();
    for q in 1..=bound as i64 {
        for p in -(bound as i64)..=bound as i64 {
            out.insert(rat(p, q));
        }
    }
    out.into_iter().collect()
}

use num_integer::Integer;
