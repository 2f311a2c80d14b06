//! Thin helpers over `num_rational::BigRational`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.3"` exactly.
pub fn parse_rational(input: &str) -> Result<Rational> {
    let err = || Error::Parse { what: "rational", input: input.to_string() };
    let s = input.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if whole_digits.is_empty() { "0" } else { whole_digits }, frac);
        let n: BigInt = digits.parse().map_err(|_| err())?;
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let r = Rational::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rational::from_integer(n))
}

/// log2 of a positive big integer, accurate to a few ulps.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().map(|v| (v as f64).log2()).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

/// log2 of a non-negative rational; `-inf` for zero.
pub fn log2_rational(x: &Rational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    debug_assert!(x.is_positive());
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    log2_biguint(n) - log2_biguint(d)
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let l = log2_rational(&x.abs());
        let v = l.exp2();
        if x.is_negative() {
            -v
        } else {
            v
        }
    })
}

pub fn pow2(exp: u64) -> BigUint {
    BigUint::one() << exp
}

pub fn format_rational(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("2/3").unwrap(), rat(2, 3));
        assert_eq!(parse_rational("0.3").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("-1.25").unwrap(), rat(-5, 4));
        assert_eq!(parse_rational(" 7 ").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn log2_of_huge_rationals() {
        let seven = BigUint::from(7u32);
        let big = num_traits::pow(seven, 1000);
        let r = Rational::new(BigInt::one(), BigInt::from(big));
        let expected = -1000.0 * 7f64.log2();
        assert!((log2_rational(&r) - expected).abs() < 1e-9);
        assert!((log2_rational(&rat(3, 4)) - (0.75f64).log2()).abs() < 1e-15);
        assert_eq!(log2_rational(&int(0)), f64::NEG_INFINITY);
    }
}
