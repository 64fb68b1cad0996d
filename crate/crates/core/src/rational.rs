//! Exact arithmetic helpers shared by the combinatorial modules.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn factorial(n: u32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `base^exp / exp!` as an exact rational.
pub fn power_over_factorial(base: &Rational, exp: u32) -> Rational {
    if exp == 0 {
        return Rational::one();
    }
    let mut p = Rational::one();
    for _ in 0..exp {
        p *= base;
    }
    p / Rational::from_integer(factorial(exp))
}

/// Multinomial coefficient `(Σ parts)! / Π parts!`.
pub fn multinomial(parts: &[u32]) -> BigInt {
    let total: u32 = parts.iter().sum();
    let denom = parts
        .iter()
        .fold(BigInt::one(), |acc, &p| acc * factorial(p));
    factorial(total) / denom
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `p/q`, an integer, or a finite decimal such as `0.35` into an
/// exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::InvalidParameter(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let d = BigInt::from(10).pow(frac.len() as u32);
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_multinomials() {
        assert_eq!(factorial(0), BigInt::one());
        assert_eq!(factorial(5), BigInt::from(120));
        assert_eq!(multinomial(&[1, 1]), BigInt::from(2));
        assert_eq!(multinomial(&[2, 1, 1, 0]), BigInt::from(12));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/6").unwrap(), ratio(1, 6));
        assert_eq!(parse_rational("0.35").unwrap(), ratio(7, 20));
        assert_eq!(parse_rational("-2").unwrap(), int(-2));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn huge_ratios_convert() {
        let big = Rational::from_integer(BigInt::from(10).pow(400));
        let r = (big.clone() + int(1)) / (big * int(3));
        assert!((to_f64(&r) - 1.0 / 3.0).abs() < 1e-15);
    }
}
