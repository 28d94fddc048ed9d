//! Formal calculus in `z` and `ζ = log z`.
//!
//! A [`LogSeries`] is a finite window of a series `Σ c_{α,j} z^α ζ^j` in one
//! or more variable pairs `(zᵢ, ζᵢ)`, with exponents in `Q + Qi`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::scalar::{binomial, sign_power, DualScalar, GaussScalar, Rational, ScalarError};
use crate::state::Vector;

/// Exponent `α` of `z^α`.
///
/// Ordered by coset `α mod Z` first, then by real part, so that the terms of
/// one coset are contiguous and increasing.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Exponent(pub GaussScalar);

impl Exponent {
    pub fn integer(n: i64) -> Self {
        Exponent(GaussScalar::integer(n))
    }

    pub fn coset(&self) -> GaussScalar {
        self.0.mod_integers()
    }

    pub fn shifted(&self, k: i64) -> Self {
        Exponent(&self.0 + &GaussScalar::integer(k))
    }

    pub fn is_integer(&self) -> bool {
        self.0.as_integer().is_some()
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coset()
            .cmp(&other.coset())
            .then_with(|| self.0.re.cmp(&other.0.re))
            .then_with(|| self.0.im.cmp(&other.0.im))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.0;
        if g.im.is_zero() {
            write!(f, "{}", g.re)
        } else {
            write!(f, "{}+{}i", g.re, g.im)
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Coefficient spaces a [`LogSeries`] can carry.
pub trait Coeff: Clone + PartialEq {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, other: &Self);
    fn scale(&self, c: &DualScalar) -> Self;
}

impl Coeff for DualScalar {
    fn zero() -> Self {
        DualScalar::zero()
    }
    fn is_zero(&self) -> bool {
        DualScalar::is_zero(self)
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn scale(&self, c: &DualScalar) -> Self {
        self * c
    }
}

impl<K: Ord + Clone> Coeff for Vector<K> {
    fn zero() -> Self {
        Vector::zero()
    }
    fn is_zero(&self) -> bool {
        Vector::is_zero(self)
    }
    fn add_assign(&mut self, other: &Self) {
        Vector::add_assign(self, other)
    }
    fn scale(&self, c: &DualScalar) -> Self {
        self.scaled(c)
    }
}

/// Monomial `Π zᵢ^{αᵢ} ζᵢ^{jᵢ}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LogMonomial<const N: usize> {
    pub exps: [Exponent; N],
    pub zetas: [u32; N],
}

impl<const N: usize> LogMonomial<N> {
    pub fn new(exps: [Exponent; N], zetas: [u32; N]) -> Self {
        LogMonomial { exps, zetas }
    }
}

/// Finite formal sum of log monomials in `N` variable pairs.
#[derive(Clone, PartialEq)]
pub struct LogSeries<C: Coeff, const N: usize = 1> {
    terms: BTreeMap<LogMonomial<N>, C>,
}

impl<C: Coeff, const N: usize> Default for LogSeries<C, N> {
    fn default() -> Self {
        LogSeries { terms: BTreeMap::new() }
    }
}

impl<C: Coeff, const N: usize> LogSeries<C, N> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(m: LogMonomial<N>, c: C) -> Self {
        let mut s = Self::zero();
        s.add_term(m, c);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LogMonomial<N>, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &LogMonomial<N>) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, m: LogMonomial<N>, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                e.get_mut().add_assign(&c);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_series(&mut self, other: &Self) {
        for (m, c) in other.iter() {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub_series(&mut self, other: &Self) {
        for (m, c) in other.iter() {
            self.add_term(m.clone(), c.scale(&DualScalar::integer(-1)));
        }
    }

    pub fn scaled(&self, c: &DualScalar) -> Self {
        let mut out = Self::zero();
        for (m, v) in self.iter() {
            out.add_term(m.clone(), v.scale(c));
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, mut f: impl FnMut(&C) -> D) -> LogSeries<D, N> {
        let mut out = LogSeries::zero();
        for (m, c) in self.iter() {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Minimal stored real exponent per coset in variable `var`.
    pub fn coset_floors(&self, var: usize) -> BTreeMap<GaussScalar, Rational> {
        let mut floors: BTreeMap<GaussScalar, Rational> = BTreeMap::new();
        for m in self.terms.keys() {
            let e = &m.exps[var];
            let entry = floors.entry(e.coset()).or_insert_with(|| e.0.re.clone());
            if e.0.re < *entry {
                *entry = e.0.re.clone();
            }
        }
        floors
    }

    /// Largest ζ-power stored in variable `var`.
    pub fn max_zeta(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.zetas[var]).max().unwrap_or(0)
    }

    /// Keep only terms whose real exponents lie in `[lo, hi]` in every variable.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        let lo = Rational::integer(lo);
        let hi = Rational::integer(hi);
        let mut out = Self::zero();
        for (m, c) in self.iter() {
            if m.exps.iter().all(|e| e.0.re >= lo && e.0.re <= hi) {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    /// Total derivative `D = ∂_z + z⁻¹∂_ζ` in variable `var`.
    pub fn dz_total(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.iter() {
            let alpha = &m.exps[var].0;
            let mut lowered = m.clone();
            lowered.exps[var] = m.exps[var].shifted(-1);
            if !alpha.is_zero() {
                out.add_term(lowered.clone(), c.scale(&DualScalar::from_gauss(alpha.clone())));
            }
            let j = m.zetas[var];
            if j > 0 {
                lowered.zetas[var] = j - 1;
                out.add_term(lowered, c.scale(&DualScalar::integer(j as i64)));
            }
        }
        out
    }

    pub fn dz_total_pow(&self, var: usize, k: u32) -> Self {
        (0..k).fold(self.clone(), |s, _| s.dz_total(var))
    }

    /// Multiply every monomial by a scalar log series (coefficients multiply as scalars).
    pub fn mul_scalar_series(&self, other: &LogSeries<DualScalar, N>) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in self.iter() {
            for (m2, c2) in other.iter() {
                let exps = std::array::from_fn(|i| Exponent(&m1.exps[i].0 + &m2.exps[i].0));
                let zetas = std::array::from_fn(|i| m1.zetas[i] + m2.zetas[i]);
                out.add_term(LogMonomial::new(exps, zetas), c1.scale(c2));
            }
        }
        out
    }
}

impl<C: Coeff> LogSeries<C, 1> {
    pub fn single(alpha: Exponent, zeta: u32, c: C) -> Self {
        Self::monomial(LogMonomial::new([alpha], [zeta]), c)
    }

    /// Coefficient of `z^α ζ^j`.
    pub fn coeff_at(&self, alpha: &Exponent, zeta: u32) -> C {
        self.coeff(&LogMonomial::new([alpha.clone()], [zeta]))
    }
}

impl<C: Coeff, const N: usize> LogSeries<C, N>
where
    C: fmt::Display,
{
    /// `c * z^(a) * zeta^j + ...`, terms in key order (coset, real part, ζ-power).
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let names = variable_names(N);
        let mut parts = Vec::new();
        for (m, c) in self.iter() {
            let mut s = format!("({c})");
            for i in 0..N {
                let e = &m.exps[i];
                if !e.0.is_zero() {
                    s.push_str(&format!(" * {}^({})", names[i].0, e));
                }
                if m.zetas[i] > 0 {
                    s.push_str(&format!(" * {}^{}", names[i].1, m.zetas[i]));
                }
            }
            parts.push(s);
        }
        parts.join(" + ")
    }
}

fn variable_names(n: usize) -> Vec<(String, String)> {
    if n == 1 {
        vec![("z".into(), "zeta".into())]
    } else {
        (1..=n).map(|i| (format!("z{i}"), format!("zeta{i}"))).collect()
    }
}

impl<C: Coeff + fmt::Display, const N: usize> fmt::Display for LogSeries<C, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl<C: Coeff + fmt::Display, const N: usize> fmt::Debug for LogSeries<C, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl<C: Coeff + Serialize, const N: usize> Serialize for LogSeries<C, N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term<'a, C> {
            exponents: Vec<&'a GaussScalar>,
            zeta: &'a [u32],
            coeff: &'a C,
        }
        let terms: Vec<_> = self
            .iter()
            .map(|(m, c)| Term {
                exponents: m.exps.iter().map(|e| &e.0).collect(),
                zeta: &m.zetas,
                coeff: c,
            })
            .collect();
        terms.serialize(s)
    }
}

/// Which region a two-variable expansion converges in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IotaDirection {
    /// `|z₁| > |z₂|`: powers of `z₂/z₁`.
    Z1ThenZ2,
    /// `|z₂| > |z₁|`: powers of `z₁/z₂`.
    Z2ThenZ1,
}

/// Truncated expansion of `z₁₂^{n+S}` on one spectral component of `S`.
///
/// `d` carries the semisimple eigenvalue in its value part and the nilpotent
/// action (a multiple of `ε`) in its `ε` part.
#[derive(Clone, Debug)]
pub struct IotaExpansion {
    pub direction: IotaDirection,
    pub order: i64,
    pub eigenvalue: DualScalar,
    pub nilpotent_order: u32,
    pub truncation: u32,
    pub series: LogSeries<DualScalar, 2>,
}

/// Expand `ι z₁₂^{n+d}` up to the `J`-th term.
///
/// The factor `z₁^{S}` (resp. `z₂^{S}`) keeps its nilpotent part as
/// `e^{ζ₁N}` (resp. `e^{ζ₂N}`), truncated at `nilpotent_order`.
pub fn iota_expand(
    direction: IotaDirection,
    n: i64,
    d: &DualScalar,
    nilpotent_order: u32,
    truncation: u32,
) -> Result<IotaExpansion, ScalarError> {
    let semisimple = d.value.clone();
    let nil = DualScalar::new(GaussScalar::zero(), d.eps.clone());
    let shift = &DualScalar::integer(n) + d;
    let mut series = LogSeries::zero();
    let sign_d = match direction {
        IotaDirection::Z1ThenZ2 => DualScalar::one(),
        IotaDirection::Z2ThenZ1 => sign_power(&semisimple)?,
    };
    for j in 0..=truncation {
        let b = binomial(&shift, j);
        let sign = match direction {
            IotaDirection::Z1ThenZ2 => parity(j as i64),
            IotaDirection::Z2ThenZ1 => &parity(n + j as i64) * &sign_d,
        };
        let base = &b * &sign;
        // e^{ζ N} = Σ_t ζ^t N^t / t!
        let mut nil_pow = DualScalar::one();
        let mut fact = 1i64;
        for t in 0..nilpotent_order.max(1) {
            if t > 0 {
                nil_pow = &nil_pow * &nil;
                fact *= t as i64;
            }
            if nil_pow.is_zero() {
                break;
            }
            let c = &(&base * &nil_pow) * &DualScalar::rational(1, fact);
            let big = Exponent(&GaussScalar::integer(n - j as i64) + &semisimple);
            let small = Exponent::integer(j as i64);
            let mono = match direction {
                IotaDirection::Z1ThenZ2 => LogMonomial::new([big, small], [t, 0]),
                IotaDirection::Z2ThenZ1 => LogMonomial::new([small, big], [0, t]),
            };
            series.add_term(mono, c);
        }
    }
    Ok(IotaExpansion {
        direction,
        order: n,
        eigenvalue: d.clone(),
        nilpotent_order,
        truncation,
        series,
    })
}

fn parity(k: i64) -> DualScalar {
    if k.rem_euclid(2) == 0 {
        DualScalar::one()
    } else {
        DualScalar::integer(-1)
    }
}

/// One term of `(1/j!) D_{z₂}^j δ_S(z₁, z₂)`: exponents `(−n−1−d, n−j+d)`
/// with coefficient `binomial(n+d, j)`.
pub fn delta_coeff(j: u32, n: i64, d: &DualScalar) -> ([Exponent; 2], DualScalar) {
    let dv = &d.value;
    let e1 = Exponent(&GaussScalar::integer(-n - 1) - dv);
    let e2 = Exponent(&GaussScalar::integer(n - j as i64) + dv);
    (
        [e1, e2],
        binomial(&(&DualScalar::integer(n) + d), j),
    )
}
