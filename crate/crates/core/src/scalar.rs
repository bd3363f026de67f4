//! Numbers on one of two backends: exact rationals or fixed-precision binary floats.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION_BITS: u32 = 256;
pub const MIN_PRECISION_BITS: u32 = 64;

/// Numeric backend of a series or table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Float { precision_bits: u32 },
}

impl Backend {
    pub fn float(precision_bits: u32) -> Result<Self> {
        if precision_bits < MIN_PRECISION_BITS {
            return Err(Error::InvalidArgument(format!(
                "precision_bits must be at least {MIN_PRECISION_BITS}, got {precision_bits}"
            )));
        }
        Ok(Backend::Float { precision_bits })
    }

    pub fn default_float() -> Self {
        Backend::Float {
            precision_bits: DEFAULT_PRECISION_BITS,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Backend::Exact)
    }

    /// Working precision; exact tables that must produce floats use the default.
    pub fn precision_bits(&self) -> u32 {
        match *self {
            Backend::Exact => DEFAULT_PRECISION_BITS,
            Backend::Float { precision_bits } => precision_bits,
        }
    }

    /// `2^-p` for float backends, zero for the exact one.
    pub fn unit_roundoff(&self) -> f64 {
        match *self {
            Backend::Exact => 0.0,
            Backend::Float { precision_bits } => 2f64.powi(-(precision_bits as i32)),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Float { precision_bits } => write!(f, "float:{precision_bits}"),
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("exact-rational") {
            return Ok(Backend::Exact);
        }
        if s.eq_ignore_ascii_case("float") {
            return Ok(Backend::default_float());
        }
        if let Some(bits) = s.strip_prefix("float:") {
            let bits: u32 = bits
                .parse()
                .map_err(|_| Error::BackendParse(format!("bad precision in backend {s:?}")))?;
            return Backend::float(bits);
        }
        Err(Error::BackendParse(format!("unknown backend {s:?}")))
    }
}

impl Serialize for Backend {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Backend {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helper writing a rational as its `p/q` string.
pub fn serialize_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Parse `"p/q"`, integers and decimals with optional exponent into an exact rational.
pub fn parse_rational(src: &str) -> Option<Rational> {
    let s = src.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den == 0 {
            return None;
        }
        return Some(num / den);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(Integer::from_str(&all_digits).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = Integer::from(10);
    if scale >= 0 {
        value *= ten.pow(scale as u32);
    } else {
        value /= ten.pow((-scale) as u32);
    }
    if negative {
        value = -value;
    }
    Some(value)
}

/// A number living on a [`Backend`].
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Rational),
    Float(Float),
}

fn mismatch() -> ! {
    panic!("scalar backend mismatch")
}

impl Scalar {
    pub fn zero(backend: Backend) -> Self {
        Self::from_i64(0, backend)
    }

    pub fn one(backend: Backend) -> Self {
        Self::from_i64(1, backend)
    }

    pub fn from_i64(v: i64, backend: Backend) -> Self {
        match backend {
            Backend::Exact => Scalar::Exact(Rational::from(v)),
            Backend::Float { precision_bits } => Scalar::Float(Float::with_val(precision_bits, v)),
        }
    }

    pub fn from_integer(v: &Integer, backend: Backend) -> Self {
        match backend {
            Backend::Exact => Scalar::Exact(Rational::from(v)),
            Backend::Float { precision_bits } => Scalar::Float(Float::with_val(precision_bits, v)),
        }
    }

    /// Correctly rounded on float backends.
    pub fn from_rational(v: &Rational, backend: Backend) -> Self {
        match backend {
            Backend::Exact => Scalar::Exact(v.clone()),
            Backend::Float { precision_bits } => Scalar::Float(Float::with_val(precision_bits, v)),
        }
    }

    pub fn from_f64(v: f64, backend: Backend) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::BackendParse(format!("non-finite value {v}")));
        }
        Ok(match backend {
            Backend::Exact => Scalar::Exact(Rational::from_f64(v).expect("finite")),
            Backend::Float { precision_bits } => Scalar::Float(Float::with_val(precision_bits, v)),
        })
    }

    pub fn parse(src: &str, backend: Backend) -> Result<Self> {
        let r = parse_rational(src).ok_or_else(|| Error::BackendParse(format!("cannot parse number {src:?}")))?;
        Ok(Self::from_rational(&r, backend))
    }

    pub fn backend(&self) -> Backend {
        match self {
            Scalar::Exact(_) => Backend::Exact,
            Scalar::Float(f) => Backend::Float {
                precision_bits: f.prec(),
            },
        }
    }

    /// Re-express on another backend. Float to exact is lossless (floats are dyadic).
    pub fn to_backend(&self, backend: Backend) -> Self {
        match (self, backend) {
            (Scalar::Exact(r), b) => Scalar::from_rational(r, b),
            (Scalar::Float(f), Backend::Exact) => Scalar::Exact(f.to_rational().expect("finite float")),
            (Scalar::Float(f), Backend::Float { precision_bits }) => Scalar::Float(Float::with_val(precision_bits, f)),
        }
    }

    /// Exact rational value of the number.
    pub fn to_rational(&self) -> Rational {
        match self {
            Scalar::Exact(r) => r.clone(),
            Scalar::Float(f) => f.to_rational().expect("finite float"),
        }
    }

    /// Value as a float of the given precision (correctly rounded).
    pub fn to_float(&self, precision_bits: u32) -> Float {
        match self {
            Scalar::Exact(r) => Float::with_val(precision_bits, r),
            Scalar::Float(f) => Float::with_val(precision_bits, f),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64(),
            Scalar::Float(f) => f.to_f64(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => *r == 0,
            Scalar::Float(f) => f.is_zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Scalar::Exact(_) => true,
            Scalar::Float(f) => f.is_finite(),
        }
    }

    pub fn signum(&self) -> Ordering {
        match self {
            Scalar::Exact(r) => r.cmp0(),
            Scalar::Float(f) => f.cmp0().unwrap_or(Ordering::Equal),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn abs(&self) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.clone().abs()),
            Scalar::Float(f) => Scalar::Float(f.clone().abs()),
        }
    }

    /// Total order between two scalars of the same backend.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            (Scalar::Float(a), Scalar::Float(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            _ => mismatch(),
        }
    }

    pub fn mul_int(&self, k: &Integer) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(r * k)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), f * k)),
        }
    }

    pub fn div_int(&self, k: &Integer) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(r / k)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), f / k)),
        }
    }

    pub fn mul_rational(&self, k: &Rational) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(r * k)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), f * k)),
        }
    }

    pub fn recip(&self) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.clone().recip()),
            Scalar::Float(f) => Scalar::Float(f.clone().recip()),
        }
    }

    pub fn powi(&self, e: i32) -> Self {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(r.pow(e))),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), f.pow(e))),
        }
    }

    /// `self^p` for a rational exponent. Exact only for integer `p`.
    pub fn pow_rational(&self, p: &Rational) -> Result<Self> {
        match self {
            Scalar::Exact(r) => {
                if *p.denom() != 1 {
                    return Err(Error::ExactBackendFractionalPower);
                }
                let e = p
                    .numer()
                    .to_i32()
                    .ok_or_else(|| Error::InvalidArgument("exponent out of range".into()))?;
                if *r == 0 && e < 0 {
                    return Err(Error::NonpositiveConstantTerm);
                }
                Ok(Scalar::Exact(Rational::from(r.pow(e))))
            }
            Scalar::Float(f) => {
                let prec = f.prec();
                if *p.denom() == 1 {
                    if let Some(e) = p.numer().to_i32() {
                        return Ok(Scalar::Float(Float::with_val(prec, f.pow(e))));
                    }
                }
                let pf = Float::with_val(prec, p);
                Ok(Scalar::Float(Float::with_val(prec, f.pow(&pf))))
            }
        }
    }

    /// Square root; on the exact backend only perfect rational squares are accepted.
    pub fn sqrt(&self) -> Result<Self> {
        match self {
            Scalar::Exact(r) => {
                if r.cmp0() == Ordering::Less {
                    return Err(Error::InvalidArgument("square root of a negative".into()));
                }
                let (n, d) = (r.numer(), r.denom());
                if n.is_perfect_square() && d.is_perfect_square() {
                    Ok(Scalar::Exact(Rational::from((n.clone().sqrt(), d.clone().sqrt()))))
                } else {
                    Err(Error::ExactBackendIrrational("square root"))
                }
            }
            Scalar::Float(f) => Ok(Scalar::Float(f.clone().sqrt())),
        }
    }

    /// Natural logarithm; always a float (at the default precision for exact inputs).
    pub fn ln_float(&self) -> Float {
        match self {
            Scalar::Exact(r) => Float::with_val(DEFAULT_PRECISION_BITS, r).ln(),
            Scalar::Float(f) => f.clone().ln(),
        }
    }

    /// Decimal (float) or `p/q` (exact) string that parses back to the same value.
    pub fn to_repr_string(&self) -> String {
        match self {
            Scalar::Exact(r) => r.to_string(),
            Scalar::Float(f) => {
                if f.is_zero() {
                    "0".to_string()
                } else {
                    f.to_string_radix(10, None)
                }
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_repr_string())
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_repr_string())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(Rational::from(a $op b)),
                    (Scalar::Float(a), Scalar::Float(b)) => {
                        if a.prec() != b.prec() {
                            mismatch()
                        }
                        Scalar::Float(Float::with_val(a.prec(), a $op b))
                    }
                    _ => mismatch(),
                }
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(Rational::from(-r)),
            Scalar::Float(f) => Scalar::Float(Float::with_val(f.prec(), -f)),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

/// Falling factorial `m (m-1) ... (m-k+1)`.
pub fn falling_factorial(m: u32, k: u32) -> Integer {
    if k > m {
        return Integer::ZERO;
    }
    (m - k + 1..=m).fold(Integer::from(1), |acc, v| acc * v)
}

/// Rising product `(j+1)(j+2)...(j+k)`.
pub fn rising_product(j: u32, k: u32) -> Integer {
    (j + 1..=j + k).fold(Integer::from(1), |acc, v| acc * v)
}

pub fn factorial(n: u32) -> Integer {
    Integer::from(Integer::factorial(n))
}

/// `(a-1)(a-2)...(a-n)`, the numerator constant of the balancing identity.
pub fn height_constant(alpha: &Rational, n: u32) -> Rational {
    (1..=n).fold(Rational::from(1), |acc, i| acc * (alpha.clone() - i))
}
