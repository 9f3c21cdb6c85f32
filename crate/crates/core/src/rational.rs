//! Exact rational numbers plus the formatting and parsing used by reports
//! and scenario files.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// All amounts, prices and values are exact rationals.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n/d`; panics on a zero denominator.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number `{0}`: expected an integer, a decimal or a fraction a/b")]
pub struct ParseRationalError(pub String);

/// Parses `12`, `-0.3`, `+1.5`, `2/3` or `-7/4` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let (negative, body) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    if body.is_empty() {
        return Err(err());
    }
    let value = if let Some((num, den)) = body.split_once('/') {
        let num = parse_digits(num).ok_or_else(err)?;
        let den = parse_digits(den).ok_or_else(err)?;
        if den.is_zero() {
            return Err(err());
        }
        Rational::new(num, den)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if whole.is_empty() && frac.is_empty() {
            return Err(err());
        }
        let whole = if whole.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(whole).ok_or_else(err)?
        };
        let frac_digits = if frac.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(frac).ok_or_else(err)?
        };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        Rational::new(whole * &scale + frac_digits, scale)
    } else {
        Rational::from_integer(parse_digits(body).ok_or_else(err)?)
    };
    Ok(if negative { -value } else { value })
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// Number of decimal digits needed to write `value` exactly, if finite.
fn terminating_digits(value: &Rational) -> Option<usize> {
    let mut den = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    den.is_one().then(|| twos.max(fives))
}

/// Canonical exact rendering: integers and terminating decimals are written
/// in decimal notation, everything else as `num/den`.
pub fn format_exact(value: &Rational) -> String {
    match terminating_digits(value) {
        Some(digits) => format_fixed(value, digits),
        None => format!("{}/{}", value.numer(), value.denom()),
    }
}

/// Always `num/den`, as used by machine-readable output.
pub fn format_fraction(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Truncates toward zero at `precision` decimal digits.
pub fn truncate_to(value: &Rational, precision: usize) -> Rational {
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(10), precision));
    (value * &scale).trunc() / scale
}

/// Display form: truncated toward zero at `precision` digits, trailing zeros
/// dropped.
pub fn format_truncated(value: &Rational, precision: usize) -> String {
    let truncated = truncate_to(value, precision);
    let digits = terminating_digits(&truncated).unwrap_or(precision);
    format_fixed(&truncated, digits)
}

/// Writes a terminating rational with exactly `digits` fractional digits,
/// then trims trailing zeros.
fn format_fixed(value: &Rational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (value * Rational::from_integer(scale.clone())).trunc().to_integer();
    let negative = scaled.is_negative();
    let (whole, frac) = scaled.abs().div_rem(&scale);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&whole.to_string());
    if digits > 0 && !frac.is_zero() {
        let frac = format!("{:0>width$}", frac.to_string(), width = digits);
        out.push('.');
        out.push_str(frac.trim_end_matches('0'));
    }
    out
}

/// Lossy conversion for progress output and benchmarks only.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// A rational extended with `+∞`, ordered above every finite value.
///
/// Only comparisons are supported on the infinite value; there is no
/// arithmetic on `Extended`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extended {
    Finite(Rational),
    Infinity,
}

impl Extended {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Extended::Infinity)
    }

    /// `self >= 1`
    pub fn at_least_one(&self) -> bool {
        match self {
            Extended::Finite(v) => *v >= one(),
            Extended::Infinity => true,
        }
    }

    pub fn display(&self, precision: usize) -> String {
        match self {
            Extended::Finite(v) => format_truncated(v, precision),
            Extended::Infinity => "+inf".to_string(),
        }
    }

    pub fn display_exact(&self) -> String {
        match self {
            Extended::Finite(v) => format_exact(v),
            Extended::Infinity => "+inf".to_string(),
        }
    }
}

impl PartialEq<Rational> for Extended {
    fn eq(&self, other: &Rational) -> bool {
        self.finite() == Some(other)
    }
}

impl From<Rational> for Extended {
    fn from(value: Rational) -> Self {
        Extended::Finite(value)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_exact())
    }
}
