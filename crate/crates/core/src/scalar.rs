//! Coefficient fields for polynomial arithmetic.
//!
//! Four fields are supported: `f64` and [`Rational`] on the real side,
//! [`Complex64`] and [`GaussRational`] on the complex side. The exact pair is
//! used as an oracle wherever small divisors would make rounding suspect.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

pub use num_complex::Complex64;

/// Exact rational coefficient.
pub type Rational = BigRational;
/// Exact Gaussian rational coefficient, `a + ib` with `a, b` rational.
pub type GaussRational = Complex<BigRational>;

/// Floats below this magnitude are dropped from sparse storage. This only
/// keeps denormals out of the maps; it is never a mathematical tolerance.
pub const FLOAT_PRUNE: f64 = 1e-300;

pub trait Coeff:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// True when exact arithmetic is in use.
    const EXACT: bool;

    /// Whether a coefficient should be dropped from sparse storage.
    fn is_pruned(&self) -> bool;

    /// Absolute value as a float (modulus for complex fields).
    fn magnitude(&self) -> f64;

    /// Whether `self` is zero up to the rounding expected of values of size
    /// `scale`. Exact fields test for zero.
    fn is_roundoff(&self, scale: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() <= 64.0 * f64::EPSILON * scale
        }
    }

    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// JSON encoding of the (real, imaginary) parts.
    fn to_json_parts(&self) -> (Value, Value);

    fn from_json_parts(re: &Value, im: &Value) -> Option<Self>;
}

pub trait RealCoeff: Coeff + PartialOrd {
    type Complex: ComplexCoeff<Real = Self>;

    fn as_f64(&self) -> f64;

    /// Exact conversion from a float; `None` for non-finite input.
    fn from_f64(x: f64) -> Option<Self>;

    /// `1/sqrt(2)`, when representable in the field.
    fn frac_1_sqrt_2() -> Option<Self>;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

pub trait ComplexCoeff: Coeff {
    type Real: RealCoeff<Complex = Self>;

    fn from_parts(re: Self::Real, im: Self::Real) -> Self;
    fn re(&self) -> Self::Real;
    fn im(&self) -> Self::Real;

    fn from_real(re: Self::Real) -> Self {
        Self::from_parts(re, Self::Real::zero())
    }

    fn imag_unit() -> Self {
        Self::from_parts(Self::Real::zero(), Self::Real::one())
    }

    fn conj(&self) -> Self {
        Self::from_parts(self.re(), -self.im())
    }
}

impl Coeff for f64 {
    const EXACT: bool = false;

    fn is_pruned(&self) -> bool {
        f64::abs(*self) < FLOAT_PRUNE
    }

    fn magnitude(&self) -> f64 {
        f64::abs(*self)
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_json_parts(&self) -> (Value, Value) {
        (float_value(*self), float_value(0.0))
    }

    fn from_json_parts(re: &Value, im: &Value) -> Option<Self> {
        let im = json_f64(im).unwrap_or(0.0);
        if im != 0.0 {
            return None;
        }
        json_f64(re)
    }
}

impl RealCoeff for f64 {
    type Complex = Complex64;

    fn as_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn frac_1_sqrt_2() -> Option<Self> {
        Some(std::f64::consts::FRAC_1_SQRT_2)
    }
}

impl Coeff for Complex64 {
    const EXACT: bool = false;

    fn is_pruned(&self) -> bool {
        self.re.abs() < FLOAT_PRUNE && self.im.abs() < FLOAT_PRUNE
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }

    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }

    fn to_json_parts(&self) -> (Value, Value) {
        (float_value(self.re), float_value(self.im))
    }

    fn from_json_parts(re: &Value, im: &Value) -> Option<Self> {
        Some(Complex64::new(json_f64(re)?, json_f64(im).unwrap_or(0.0)))
    }
}

impl ComplexCoeff for Complex64 {
    type Real = f64;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn re(&self) -> f64 {
        self.re
    }

    fn im(&self) -> f64 {
        self.im
    }
}

impl Coeff for Rational {
    const EXACT: bool = true;

    fn is_pruned(&self) -> bool {
        self.is_zero()
    }

    fn magnitude(&self) -> f64 {
        Signed::abs(self).to_f64().unwrap_or(f64::INFINITY)
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_json_parts(&self) -> (Value, Value) {
        (Value::String(rational_string(self)), Value::String("0".into()))
    }

    fn from_json_parts(re: &Value, im: &Value) -> Option<Self> {
        let im = json_rational(im).unwrap_or_else(Rational::zero);
        if !im.is_zero() {
            return None;
        }
        json_rational(re)
    }
}

impl RealCoeff for Rational {
    type Complex = GaussRational;

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn frac_1_sqrt_2() -> Option<Self> {
        None
    }
}

impl Coeff for GaussRational {
    const EXACT: bool = true;

    fn is_pruned(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn magnitude(&self) -> f64 {
        let re = RealCoeff::as_f64(&self.re);
        let im = RealCoeff::as_f64(&self.im);
        re.hypot(im)
    }

    fn from_i64(v: i64) -> Self {
        Complex::new(<Rational as Coeff>::from_i64(v), Rational::zero())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(<Rational as Coeff>::from_ratio(num, den), Rational::zero())
    }

    fn to_json_parts(&self) -> (Value, Value) {
        (
            Value::String(rational_string(&self.re)),
            Value::String(rational_string(&self.im)),
        )
    }

    fn from_json_parts(re: &Value, im: &Value) -> Option<Self> {
        Some(Complex::new(
            json_rational(re)?,
            json_rational(im).unwrap_or_else(Rational::zero),
        ))
    }
}

impl ComplexCoeff for GaussRational {
    type Real = Rational;

    fn from_parts(re: Rational, im: Rational) -> Self {
        Complex::new(re, im)
    }

    fn re(&self) -> Rational {
        self.re.clone()
    }

    fn im(&self) -> Rational {
        self.im.clone()
    }
}

/// `"p/q"` or `"p"` when the denominator is one.
pub fn rational_string(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(BigRational::new(p, q))
            }
        }
        None => {
            if let Ok(p) = s.parse::<BigInt>() {
                return Some(BigRational::from_integer(p));
            }
            s.parse::<f64>().ok().and_then(BigRational::from_float)
        }
    }
}

fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn json_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_rational(s).map(|r| RealCoeff::as_f64(&r)),
        Value::Null => Some(0.0),
        _ => None,
    }
}

fn json_rational(v: &Value) -> Option<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(Rational::from_i64(i))
            } else {
                n.as_f64().and_then(BigRational::from_float)
            }
        }
        Value::Null => Some(Rational::zero()),
        _ => None,
    }
}

/// Error-free transformation `a + b = s + e`.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.carry += e;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Dot product with error-free products and compensated accumulation
/// (Ogita–Rump–Oishi `Dot2`); accurate as if computed in twice the working
/// precision.
pub fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let e = x.mul_add(*y, -p);
        acc.add(p);
        acc.add(e);
    }
    acc.value()
}

/// `k · alpha` for an integer vector, with [`dot2`] accuracy.
pub fn int_dot(k: &[i64], alpha: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (&ki, &a) in k.iter().zip(alpha) {
        let x = ki as f64;
        let p = x * a;
        let e = x.mul_add(a, -p);
        acc.add(p);
        acc.add(e);
    }
    acc.value()
}
