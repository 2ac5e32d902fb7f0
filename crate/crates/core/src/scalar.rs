//! Numeric abstraction shared by the float (solver) path and the exact
//! rational (verifier/golden) path.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact arbitrary-precision rational.
pub type Rational = BigRational;

/// Absolute tolerance used when checking that float probabilities sum to one.
pub const FLOAT_PROB_TOLERANCE: f64 = 1e-12;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Parses a decimal literal (`"0.7"`, `"-3"`, `"1e-3"`) or a fraction
    /// (`"1/3"`). Rationals parse exactly.
    fn parse(text: &str) -> Result<Self>;

    /// Renders a value so that `parse(render(x)) == x`.
    fn render(&self) -> String;

    /// Finite decimal rendering suitable for a JSON number, when one exists.
    fn to_decimal(&self) -> Option<String>;

    fn to_f64(&self) -> f64;

    fn from_usize(n: usize) -> Self;

    /// Tolerance for "probabilities sum to one"; zero for exact arithmetic.
    fn prob_tolerance() -> Self;

    fn is_exact() -> bool;

    fn is_finite_value(&self) -> bool;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n = f64::from_str(n.trim()).map_err(|_| Error::parse(text))?;
            let d = f64::from_str(d.trim()).map_err(|_| Error::parse(text))?;
            if d == 0.0 {
                return Err(Error::parse(text));
            }
            return Ok(n / d);
        }
        let v = f64::from_str(t).map_err(|_| Error::parse(text))?;
        if !v.is_finite() {
            return Err(Error::parse(text));
        }
        Ok(v)
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn to_decimal(&self) -> Option<String> {
        self.is_finite().then(|| format!("{self}"))
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn prob_tolerance() -> Self {
        FLOAT_PROB_TOLERANCE
    }

    fn is_exact() -> bool {
        false
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational {
    fn parse(text: &str) -> Result<Self> {
        parse_rational(text)
    }

    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else if let Some(d) = self.to_decimal() {
            d
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn to_decimal(&self) -> Option<String> {
        rational_to_decimal(self)
    }

    fn to_f64(&self) -> f64 {
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
            _ => {
                // Both parts overflow f64; go through a scaled division.
                let shift = self.denom().bits().max(self.numer().bits()).saturating_sub(1000);
                let n = (self.numer() >> shift).to_f64().unwrap_or(f64::NAN);
                let d = (self.denom() >> shift).to_f64().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    fn from_usize(n: usize) -> Self {
        Rational::from_integer(BigInt::from(n))
    }

    fn prob_tolerance() -> Self {
        Rational::zero()
    }

    fn is_exact() -> bool {
        true
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(Error::parse(text));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = t[pos + 1..].parse().map_err(|_| Error::parse(text))?;
            (&t[..pos], exp)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::parse(text));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::parse(text));
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all.is_empty() { "0" } else { &all })
        .map_err(|_| Error::parse(text))?;
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(Error::parse(text));
    }
    let ten = BigInt::from(10u32);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * pow)
    } else {
        Rational::new(numer, pow)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

fn rational_to_decimal(value: &Rational) -> Option<String> {
    let mut denom = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let digits = scaled.to_integer().abs().to_string();
    let sign = if value.is_negative() { "-" } else { "" };
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    Some(format!("{sign}{int_part}.{frac_part}"))
}

/// Converts between scalar types through the exact decimal rendering of the
/// source value.
pub fn convert<S: Scalar, T: Scalar>(value: &S) -> Result<T> {
    T::parse(&value.render())
}

/// Parses a rational from an `f64` via its shortest round-trip decimal.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    convert::<f64, Rational>(&x)
}
