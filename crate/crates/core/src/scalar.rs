//! Exact coefficient arithmetic.
//!
//! Three layers: [`Rational`] (arbitrary precision), [`GaussScalar`] (`Q(i)`)
//! and [`DualScalar`] (`Q(i)[ε]/(ε²)`). Every concrete coefficient in the
//! crate is a [`DualScalar`]; undeformed computations simply keep `eps = 0`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by a non-unit {0}")]
    NonUnit(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Arbitrary precision rational, always in lowest terms with positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Result<Self, ScalarError> {
        if den.is_zero() {
            return Err(ScalarError::NonUnit("0".into()));
        }
        Ok(Rational(BigRational::new(num, den)))
    }

    pub fn integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Representative of `self mod Z` in `[0, 1)`.
    pub fn fract(&self) -> Rational {
        Rational(&self.0 - self.0.floor())
    }

    pub fn inv(&self) -> Result<Rational, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::NonUnit("0".into()));
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! forward_binop {
    ($ty:ident, $trait:ident, $method:ident, $body:expr) => {
        impl<'a> $trait<&'a $ty> for &'a $ty {
            type Output = $ty;
            fn $method(self, rhs: &'a $ty) -> $ty {
                let f: fn(&$ty, &$ty) -> $ty = $body;
                f(self, rhs)
            }
        }
        impl $trait<$ty> for $ty {
            type Output = $ty;
            fn $method(self, rhs: $ty) -> $ty {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a $ty> for $ty {
            type Output = $ty;
            fn $method(self, rhs: &'a $ty) -> $ty {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Rational, Add, add, |a, b| Rational(&a.0 + &b.0));
forward_binop!(Rational, Sub, sub, |a, b| Rational(&a.0 - &b.0));
forward_binop!(Rational, Mul, mul, |a, b| Rational(&a.0 * &b.0));

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::integer(n)
    }
}

impl FromStr for Rational {
    type Err = ScalarError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScalarError::Unsupported(format!("cannot parse rational {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                Rational::from_bigints(n, d)
            }
            None => {
                let n: BigInt = s.trim().parse().map_err(|_| bad())?;
                Ok(Rational(BigRational::from_integer(n)))
            }
        }
    }
}

/// JSON form: `["num","den"]`, decimal strings.
impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.numer().to_string(), self.denom().to_string()].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [n, den]: [String; 2] = Deserialize::deserialize(d)?;
        let n: BigInt = n.parse().map_err(D::Error::custom)?;
        let den: BigInt = den.parse().map_err(D::Error::custom)?;
        Rational::from_bigints(n, den).map_err(D::Error::custom)
    }
}

/// `re + i·im` with rational parts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct GaussScalar {
    pub re: Rational,
    pub im: Rational,
}

impl GaussScalar {
    pub fn new(re: Rational, im: Rational) -> Self {
        GaussScalar { re, im }
    }

    pub fn zero() -> Self {
        GaussScalar::default()
    }

    pub fn one() -> Self {
        GaussScalar::integer(1)
    }

    pub fn i() -> Self {
        GaussScalar::new(Rational::zero(), Rational::one())
    }

    pub fn integer(n: i64) -> Self {
        GaussScalar::new(Rational::integer(n), Rational::zero())
    }

    pub fn rational(r: Rational) -> Self {
        GaussScalar::new(r, Rational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Integer value, if `self` is a rational integer.
    pub fn as_integer(&self) -> Option<i64> {
        if self.im.is_zero() {
            self.re.to_i64()
        } else {
            None
        }
    }

    pub fn conj(&self) -> Self {
        GaussScalar::new(self.re.clone(), -&self.im)
    }

    pub fn inv(&self) -> Result<Self, ScalarError> {
        let norm = &(&self.re * &self.re) + &(&self.im * &self.im);
        let inv = norm.inv().map_err(|_| ScalarError::NonUnit(self.to_string()))?;
        Ok(GaussScalar::new(&self.re * &inv, -(&self.im * &inv)))
    }

    /// Canonical representative of `self mod Z`: real part in `[0, 1)`.
    pub fn mod_integers(&self) -> Self {
        GaussScalar::new(self.re.fract(), self.im.clone())
    }

    /// True when `self - other` is a rational integer.
    pub fn congruent_mod_z(&self, other: &Self) -> bool {
        let d = self - other;
        d.im.is_zero() && d.re.is_integer()
    }
}

forward_binop!(GaussScalar, Add, add, |a, b| GaussScalar::new(&a.re + &b.re, &a.im + &b.im));
forward_binop!(GaussScalar, Sub, sub, |a, b| GaussScalar::new(&a.re - &b.re, &a.im - &b.im));
forward_binop!(GaussScalar, Mul, mul, |a, b| GaussScalar::new(
    &(&a.re * &b.re) - &(&a.im * &b.im),
    &(&a.re * &b.im) + &(&a.im * &b.re)
));

impl Neg for GaussScalar {
    type Output = GaussScalar;
    fn neg(self) -> GaussScalar {
        GaussScalar::new(-self.re, -self.im)
    }
}

impl Neg for &GaussScalar {
    type Output = GaussScalar;
    fn neg(self) -> GaussScalar {
        GaussScalar::new(-&self.re, -&self.im)
    }
}

impl From<i64> for GaussScalar {
    fn from(n: i64) -> Self {
        GaussScalar::integer(n)
    }
}

impl From<Rational> for GaussScalar {
    fn from(r: Rational) -> Self {
        GaussScalar::rational(r)
    }
}

impl fmt::Display for GaussScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                if self.im.numer().is_negative() {
                    write!(f, "({}-{}i)", self.re, -&self.im)
                } else {
                    write!(f, "({}+{}i)", self.re, self.im)
                }
            }
        }
    }
}

impl fmt::Debug for GaussScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `value + ε·eps` with `ε² = 0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DualScalar {
    pub value: GaussScalar,
    pub eps: GaussScalar,
}

impl DualScalar {
    pub fn new(value: GaussScalar, eps: GaussScalar) -> Self {
        DualScalar { value, eps }
    }

    pub fn zero() -> Self {
        DualScalar::default()
    }

    pub fn one() -> Self {
        DualScalar::integer(1)
    }

    pub fn integer(n: i64) -> Self {
        DualScalar::new(GaussScalar::integer(n), GaussScalar::zero())
    }

    pub fn rational(num: i64, den: i64) -> Self {
        DualScalar::new(Rational::new(num, den).into(), GaussScalar::zero())
    }

    pub fn i() -> Self {
        DualScalar::new(GaussScalar::i(), GaussScalar::zero())
    }

    /// The nilpotent generator `ε`.
    pub fn epsilon() -> Self {
        DualScalar::new(GaussScalar::zero(), GaussScalar::one())
    }

    pub fn from_gauss(g: GaussScalar) -> Self {
        DualScalar::new(g, GaussScalar::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero() && self.eps.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.eps.is_zero() && self.value == GaussScalar::one()
    }

    pub fn is_unit(&self) -> bool {
        !self.value.is_zero()
    }

    /// Integer value, if `self` is a rational integer with no `ε` part.
    pub fn as_integer(&self) -> Option<i64> {
        if self.eps.is_zero() {
            self.value.as_integer()
        } else {
            None
        }
    }

    /// `(a+εb)⁻¹ = a⁻¹ − ε·b·a⁻²`.
    pub fn inv(&self) -> Result<Self, ScalarError> {
        if !self.is_unit() {
            return Err(ScalarError::NonUnit(self.to_string()));
        }
        let a = self.value.inv()?;
        let b = -(&(&self.eps * &a) * &a);
        Ok(DualScalar::new(a, b))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        Ok(self * &rhs.inv()?)
    }

    pub fn scale(&self, g: &GaussScalar) -> Self {
        DualScalar::new(&self.value * g, &self.eps * g)
    }

    /// Multiply by `ε`: the value part moves into the `ε` slot.
    pub fn times_epsilon(&self) -> Self {
        DualScalar::new(GaussScalar::zero(), self.value.clone())
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = DualScalar::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }
}

forward_binop!(DualScalar, Add, add, |a, b| DualScalar::new(&a.value + &b.value, &a.eps + &b.eps));
forward_binop!(DualScalar, Sub, sub, |a, b| DualScalar::new(&a.value - &b.value, &a.eps - &b.eps));
forward_binop!(DualScalar, Mul, mul, |a, b| DualScalar::new(
    &a.value * &b.value,
    &(&a.value * &b.eps) + &(&a.eps * &b.value)
));

impl Div for &DualScalar {
    type Output = DualScalar;
    /// Panics on a non-unit divisor; use [`DualScalar::div`] for the fallible form.
    fn div(self, rhs: &DualScalar) -> DualScalar {
        DualScalar::div(self, rhs).expect("division by a non-unit")
    }
}

impl AddAssign<&DualScalar> for DualScalar {
    fn add_assign(&mut self, rhs: &DualScalar) {
        self.value = &self.value + &rhs.value;
        self.eps = &self.eps + &rhs.eps;
    }
}

impl SubAssign<&DualScalar> for DualScalar {
    fn sub_assign(&mut self, rhs: &DualScalar) {
        self.value = &self.value - &rhs.value;
        self.eps = &self.eps - &rhs.eps;
    }
}

impl MulAssign<&DualScalar> for DualScalar {
    fn mul_assign(&mut self, rhs: &DualScalar) {
        *self = &*self * rhs;
    }
}

impl Neg for DualScalar {
    type Output = DualScalar;
    fn neg(self) -> DualScalar {
        DualScalar::new(-self.value, -self.eps)
    }
}

impl Neg for &DualScalar {
    type Output = DualScalar;
    fn neg(self) -> DualScalar {
        DualScalar::new(-&self.value, -&self.eps)
    }
}

impl From<i64> for DualScalar {
    fn from(n: i64) -> Self {
        DualScalar::integer(n)
    }
}

impl From<GaussScalar> for DualScalar {
    fn from(g: GaussScalar) -> Self {
        DualScalar::from_gauss(g)
    }
}

impl From<Rational> for DualScalar {
    fn from(r: Rational) -> Self {
        DualScalar::from_gauss(r.into())
    }
}

impl fmt::Display for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.value.is_zero(), self.eps.is_zero()) {
            (_, true) => write!(f, "{}", self.value),
            (true, false) => write!(f, "{}ε", self.eps),
            (false, false) => write!(f, "({} + {}ε)", self.value, self.eps),
        }
    }
}

impl fmt::Debug for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct DualJson {
    re: Rational,
    im: Rational,
    eps_re: Rational,
    eps_im: Rational,
}

impl Serialize for DualScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DualJson {
            re: self.value.re.clone(),
            im: self.value.im.clone(),
            eps_re: self.eps.re.clone(),
            eps_im: self.eps.im.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DualScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = DualJson::deserialize(d)?;
        Ok(DualScalar::new(
            GaussScalar::new(j.re, j.im),
            GaussScalar::new(j.eps_re, j.eps_im),
        ))
    }
}

/// Generalized binomial `Π_{t<j}(c−t)/j!` evaluated in the dual ring.
///
/// With a nilpotent part this is the first-order Taylor expansion of the
/// binomial polynomial, so `binomial(−ε, j) = (−1)^j ε / j` for `j ≥ 1`.
pub fn binomial(c: &DualScalar, j: u32) -> DualScalar {
    let mut acc = DualScalar::one();
    for t in 0..j {
        acc = &acc * &(c - &DualScalar::integer(t as i64));
    }
    let fact = factorial(j);
    acc.scale(&GaussScalar::rational(Rational(BigRational::new(
        BigInt::one(),
        fact,
    ))))
}

/// `binomial(n, j)` for an integer top entry.
pub fn binomial_int(n: i64, j: u32) -> Rational {
    let mut acc = BigRational::one();
    for t in 0..j {
        acc *= BigRational::from_integer(BigInt::from(n - t as i64));
    }
    Rational(acc / BigRational::from_integer(factorial(j)))
}

pub fn factorial(j: u32) -> BigInt {
    (1..=j as u64).fold(BigInt::one(), |acc, t| acc * BigInt::from(t))
}

/// Coefficients of `x ↦ binomial(n + x, j)` as a polynomial in `x` (index = power).
pub fn binomial_polynomial(n: i64, j: u32) -> Vec<Rational> {
    let mut poly = vec![Rational::one()];
    for t in 0..j {
        // multiply by (x + (n - t))
        let c = Rational::integer(n - t as i64);
        let mut next = vec![Rational::zero(); poly.len() + 1];
        for (k, a) in poly.iter().enumerate() {
            next[k + 1] = &next[k + 1] + a;
            next[k] = &next[k] + &(a * &c);
        }
        poly = next;
    }
    let inv = Rational(BigRational::new(BigInt::one(), factorial(j)));
    poly.into_iter().map(|a| &a * &inv).collect()
}

/// Evaluate a rational polynomial at a dual point (Horner).
pub fn eval_polynomial(poly: &[Rational], x: &DualScalar) -> DualScalar {
    let mut acc = DualScalar::zero();
    for a in poly.iter().rev() {
        acc = &(&acc * x) + &DualScalar::from(a.clone());
    }
    acc
}

/// Formal derivative of a rational polynomial.
pub fn derive_polynomial(poly: &[Rational]) -> Vec<Rational> {
    poly.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * &Rational::integer(k as i64))
        .collect()
}

/// `(−1)^d` for a semisimple eigenvalue; only integer `d` is supported.
pub fn sign_power(d: &GaussScalar) -> Result<DualScalar, ScalarError> {
    match d.as_integer() {
        Some(n) if n.is_even() => Ok(DualScalar::one()),
        Some(_) => Ok(DualScalar::integer(-1)),
        None => Err(ScalarError::Unsupported(format!(
            "(-1)^d for non-integer eigenvalue {d}"
        ))),
    }
}
