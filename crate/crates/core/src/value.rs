//! Exact valuation arithmetic.
//!
//! Every plot value, friend bonus and utility in this crate is either an
//! exact rational number or the special bottom element [`ExtendedValue::Unacceptable`].
//! The bottom element behaves like negative infinity: it is strictly smaller
//! than every rational and it absorbs addition. That makes utility
//! comparisons total and lets individual-rationality checks treat "agent
//! refuses this outcome" as an ordinary ordering fact instead of a sentinel.
//!
//! No floating point is used anywhere. Decimal input such as `0.3` is parsed
//! to the exact fraction `3/10`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Exact rational scalar backing all finite values.
pub type Rational = BigRational;

/// Builds an exact rational from an integer numerator and denominator.
///
/// Panics if `den` is zero; intended for literals in code and tests.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// An exact rational extended with a bottom element for unacceptable options.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtendedValue {
    /// Strictly below every finite value; absorbs addition.
    Unacceptable,
    Finite(Rational),
}

impl ExtendedValue {
    pub fn zero() -> Self {
        ExtendedValue::Finite(Rational::zero())
    }

    pub fn from_int(v: i64) -> Self {
        ExtendedValue::Finite(Rational::from(BigInt::from(v)))
    }

    /// Exact fraction, e.g. `ExtendedValue::from_ratio(3, 10)` for 0.3.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        ExtendedValue::Finite(ratio(num, den))
    }

    pub fn is_unacceptable(&self) -> bool {
        matches!(self, ExtendedValue::Unacceptable)
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            ExtendedValue::Unacceptable => None,
            ExtendedValue::Finite(r) => Some(r),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtendedValue::Finite(r) if r.is_zero())
    }

    /// Finite and at least zero. `Unacceptable` is never non-negative.
    pub fn is_nonnegative(&self) -> bool {
        matches!(self, ExtendedValue::Finite(r) if !r.is_negative())
    }

    /// Absorbing addition: any sum involving `Unacceptable` is `Unacceptable`.
    pub fn add(&self, rhs: &ExtendedValue) -> ExtendedValue {
        match (self, rhs) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => {
                ExtendedValue::Finite(a + b)
            }
            _ => ExtendedValue::Unacceptable,
        }
    }

    pub fn sum<'a>(values: impl IntoIterator<Item = &'a ExtendedValue>) -> ExtendedValue {
        let mut acc = ExtendedValue::zero();
        for v in values {
            acc = acc.add(v);
            if acc.is_unacceptable() {
                return acc;
            }
        }
        acc
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedValue::Unacceptable, ExtendedValue::Unacceptable) => Ordering::Equal,
            (ExtendedValue::Unacceptable, ExtendedValue::Finite(_)) => Ordering::Less,
            (ExtendedValue::Finite(_), ExtendedValue::Unacceptable) => Ordering::Greater,
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Unacceptable => write!(f, "unacceptable"),
            ExtendedValue::Finite(r) => write!(f, "{}", format_rational(r)),
        }
    }
}

/// Error produced when a textual value cannot be read as an exact rational.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueParseError {
    #[error("empty value")]
    Empty,
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `unacceptable`, a fraction `a/b`, an integer, or a plain decimal
/// such as `-0.25`. Decimals become exact fractions; no rounding happens.
impl FromStr for ExtendedValue {
    type Err = ValueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "unacceptable" {
            return Ok(ExtendedValue::Unacceptable);
        }
        parse_rational(s).map(ExtendedValue::Finite)
    }
}

/// Parses a fraction `a/b`, an integer, or a plain decimal into an exact
/// rational. Scientific notation is rejected.
pub fn parse_rational(s: &str) -> Result<Rational, ValueParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ValueParseError::Empty);
    }
    let malformed = || ValueParseError::Malformed(s.to_string());

    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| malformed())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| malformed())?;
        if den.is_zero() {
            return Err(ValueParseError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(num, den));
    }

    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => match s.strip_prefix('+') {
            Some(rest) => (1, rest),
            None => (1, s),
        },
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(malformed());
    }
    let mut numer = if int_part.is_empty() {
        BigInt::zero()
    } else {
        BigInt::from_str(int_part).map_err(|_| malformed())?
    };
    let mut denom = BigInt::one();
    for digit in frac_part.chars() {
        numer = numer * 10 + digit.to_digit(10).unwrap();
        denom *= 10;
    }
    Ok(Rational::new(BigInt::from(sign) * numer, denom))
}

/// Renders a rational as `n` when integral and `n/d` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders a rational as a terminating decimal when its reduced denominator
/// has only factors 2 and 5; returns `None` otherwise.
pub fn render_decimal(r: &Rational) -> Option<String> {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = BigInt::from(10).pow(places);
    let scaled = r.numer() * &scale / r.denom();
    let negative = scaled.is_negative();
    let digits = scaled.magnitude().to_string();
    let places = places.to_usize().unwrap();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if digits.len() > places {
        out.push_str(&digits[..digits.len() - places]);
    } else {
        out.push('0');
    }
    if places > 0 {
        out.push('.');
        for _ in digits.len()..places {
            out.push('0');
        }
        out.push_str(&digits[digits.len().saturating_sub(places)..]);
    }
    Some(out)
}
