//! Non-local Poisson vertex algebras over differential polynomials.
//!
//! Brackets live in `V((λ⁻¹))` and are handled as truncated Laurent series in
//! `λ⁻¹`. Every [`LambdaSeries`] records the exponent from which its
//! coefficients are exact, and each operation propagates that window, so a
//! result is never reported below the order it actually knows.
//!
//! `a(λ+∂)⁻¹b` means `Σ_k (−1)^k λ^{−1−k} a ∂^k b`. In two-variable
//! expressions `(λ+μ+∂)⁻¹` is expanded λ-first, `Σ_k (−1)^k λ^{−1−k}(μ+∂)^k`,
//! while `(μ+∂)⁻¹` is expanded in `μ⁻¹`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::braiding::GradedKey;
use crate::commutative::{derivative, DiffMonomial};
use crate::logva::{self, LogVAError, LogVAInstance};
use crate::nls::{Letter, NLSMonomial, NlsInstance};
use crate::scalar::{binomial_int, factorial, DualScalar, GaussScalar, Rational};
use crate::state::{tensor, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PvaError {
    #[error("truncation underflow: requested order {requested}, achieved {achieved}")]
    TruncationUnderflow { requested: i64, achieved: i64 },
    #[error("not commutative mod ε: {witness}")]
    NotCommutativeModEps { witness: String },
    #[error("bracket ({0}, {1}) has no closed form")]
    NotClosed(String, String),
    #[error("no generator named {0:?}")]
    UnknownGenerator(String),
    #[error("state {0} has no differential-polynomial image")]
    Dictionary(String),
    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error(transparent)]
    LogVA(#[from] LogVAError),
}

pub type DiffPoly = Vector<DiffMonomial>;

pub fn poly_const(c: DualScalar) -> DiffPoly {
    Vector::term(DiffMonomial::one(), c)
}

pub fn poly_one() -> DiffPoly {
    poly_const(DualScalar::one())
}

/// `x_i^{(k)}`.
pub fn poly_var(i: usize, k: u32) -> DiffPoly {
    Vector::basis(DiffMonomial::new(vec![(i, k)]))
}

pub fn poly_mul(a: &DiffPoly, b: &DiffPoly) -> DiffPoly {
    let mut out = Vector::zero();
    for (x, cx) in a.iter() {
        for (y, cy) in b.iter() {
            out.add_term(x.times(y), cx * cy);
        }
    }
    out
}

pub fn poly_derive(p: &DiffPoly) -> DiffPoly {
    p.map_linear(derivative)
}

pub fn poly_derive_n(p: &DiffPoly, n: u32) -> DiffPoly {
    (0..n).fold(p.clone(), |acc, _| poly_derive(&acc))
}

/// `∂p/∂x_i^{(k)}`.
pub fn partial(p: &DiffPoly, var: (usize, u32)) -> DiffPoly {
    let mut out = Vector::zero();
    for (m, c) in p.iter() {
        let f = m.factors();
        let count = f.iter().filter(|x| **x == var).count();
        if count == 0 {
            continue;
        }
        let pos = f.iter().position(|x| *x == var).expect("present");
        let mut rest = f.to_vec();
        rest.remove(pos);
        out.add_term(DiffMonomial::new(rest), c * &DualScalar::integer(count as i64));
    }
    out
}

fn poly_vars(p: &DiffPoly) -> BTreeSet<(usize, u32)> {
    p.keys().flat_map(|m| m.factors().iter().copied()).collect()
}

pub fn max_order(p: &DiffPoly) -> u32 {
    poly_vars(p).iter().map(|(_, k)| *k).max().unwrap_or(0)
}

/// Replace each `x_i` by `images[i]`, so `x_i^{(k)} ↦ ∂^k images[i]`.
pub fn substitute(p: &DiffPoly, images: &[DiffPoly]) -> DiffPoly {
    p.map_linear(|m| {
        m.factors()
            .iter()
            .fold(poly_one(), |acc, (i, k)| poly_mul(&acc, &poly_derive_n(&images[*i], *k)))
    })
}

fn render_var(names: &[String], i: usize, k: u32) -> String {
    let name = names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
    match k {
        0..=3 => format!("{name}{}", "'".repeat(k as usize)),
        _ => format!("{name}^({k})"),
    }
}

fn render_monomial(names: &[String], m: &DiffMonomial) -> String {
    m.factors().iter().map(|(i, k)| render_var(names, *i, *k)).collect::<Vec<_>>().join("*")
}

pub fn render_poly(p: &DiffPoly, names: &[String]) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (m, c)) in p.iter().enumerate() {
        let mono = render_monomial(names, m);
        let minus_one = -&DualScalar::one();
        let term = match (mono.is_empty(), c.is_one(), *c == minus_one) {
            (true, _, _) => c.to_string(),
            (false, true, _) => mono,
            (false, _, true) => format!("-{mono}"),
            _ => format!("{c}*{mono}"),
        };
        if idx > 0 {
            if let Some(rest) = term.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
                continue;
            }
            out.push_str(" + ");
        }
        out.push_str(&term);
    }
    out
}

fn parse_err(input: &str, reason: impl Into<String>) -> PvaError {
    PvaError::Parse { input: input.into(), reason: reason.into() }
}

/// `3`, `1/2`, `2i`, `(1-1/2i)`.
pub fn parse_scalar(tok: &str) -> Option<DualScalar> {
    let t = tok.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(tok);
    let split = t.char_indices().skip(1).filter(|(_, c)| *c == '+' || *c == '-').map(|(i, _)| i).last();
    let (re, im) = match (split, t.strip_suffix('i')) {
        (Some(i), Some(_)) => (&t[..i], t[i..].trim_start_matches('+').trim_end_matches('i')),
        (None, Some(body)) => ("0", body),
        (_, None) => (t, "0"),
    };
    let re: Rational = re.parse().ok()?;
    let im: Rational = if im.is_empty() || im == "-" { format!("{im}1").parse().ok()? } else { im.parse().ok()? };
    Some(DualScalar::from_gauss(GaussScalar::new(re, im)))
}

fn parse_factor(src: &str, tok: &str, names: &[String]) -> Result<DiffPoly, PvaError> {
    if tok.starts_with('(') || tok.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return Ok(poly_const(parse_scalar(tok).ok_or_else(|| parse_err(src, format!("bad number {tok}")))?));
    }
    let mut order: Vec<&String> = names.iter().collect();
    order.sort_by_key(|n| std::cmp::Reverse(n.len()));
    for name in order {
        if let Some(rest) = tok.strip_prefix(name.as_str()) {
            let i = names.iter().position(|n| n == name).expect("listed");
            let primes = rest.chars().take_while(|c| *c == '\'').count();
            let rest = &rest[primes..];
            let (k, power) = if let Some(r) = rest.strip_prefix("^(") {
                let (num, tail) = r.split_once(')').ok_or_else(|| parse_err(src, "unclosed ^("))?;
                let k: u32 = num.parse().map_err(|_| parse_err(src, format!("bad order {num}")))?;
                (primes as u32 + k, tail)
            } else {
                (primes as u32, rest)
            };
            let exp: u32 = match power.strip_prefix('^') {
                Some(e) => e.parse().map_err(|_| parse_err(src, format!("bad power {e}")))?,
                None if power.is_empty() => 1,
                None => return Err(parse_err(src, format!("trailing {power:?}"))),
            };
            let x = poly_var(i, k);
            return Ok((0..exp).fold(poly_one(), |acc, _| poly_mul(&acc, &x)));
        }
    }
    if tok == "i" {
        return Ok(poly_const(DualScalar::i()));
    }
    Err(parse_err(src, format!("unknown factor {tok:?}")))
}

/// Parses sums of `*`-products of numbers, `i`, and variables written
/// `u`, `u'`, `u''`, `u^(k)`, optionally raised to a power `^n`.
pub fn parse_poly(src: &str, names: &[String]) -> Result<DiffPoly, PvaError> {
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(parse_err(src, "empty"));
    }
    let mut terms: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut neg = false;
    let mut depth = 0;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth == 0 && (ch == '+' || ch == '-') && !cur.ends_with('^') {
            if !cur.is_empty() {
                terms.push((neg, std::mem::take(&mut cur)));
            }
            neg = ch == '-';
            continue;
        }
        cur.push(ch);
    }
    if cur.is_empty() {
        return Err(parse_err(src, "dangling sign"));
    }
    terms.push((neg, cur));
    let mut out = Vector::zero();
    for (neg, t) in terms {
        let mut prod = poly_one();
        for f in t.split('*') {
            prod = poly_mul(&prod, &parse_factor(src, f, names)?);
        }
        out.add_scaled(&prod, &DualScalar::integer(if neg { -1 } else { 1 }));
    }
    Ok(out)
}

fn vmax(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(a.max(b)),
    }
}

fn sign(e: i64) -> DualScalar {
    DualScalar::integer(if e.rem_euclid(2) == 0 { 1 } else { -1 })
}

fn inv_factorial(k: u32) -> DualScalar {
    Rational::from_bigints(1.into(), factorial(k)).expect("nonzero factorial").into()
}

/// Truncated Laurent series `Σ_e c_e λ^e` with differential-polynomial
/// coefficients, exact for exponents `≥ valid_from` (`None`: exact).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LambdaSeries {
    terms: BTreeMap<i64, DiffPoly>,
    valid_from: Option<i64>,
}

impl LambdaSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(e: i64, p: DiffPoly) -> Self {
        let mut s = Self::zero();
        s.add_at(e, &p, &DualScalar::one());
        s
    }

    pub fn constant(p: DiffPoly) -> Self {
        Self::monomial(0, p)
    }

    pub fn with_valid_from(mut self, v: Option<i64>) -> Self {
        self.valid_from = vmax(self.valid_from, v);
        self.clip();
        self
    }

    pub fn terms(&self) -> &BTreeMap<i64, DiffPoly> {
        &self.terms
    }

    pub fn coeff(&self, e: i64) -> DiffPoly {
        self.terms.get(&e).cloned().unwrap_or_default()
    }

    pub fn valid_from(&self) -> Option<i64> {
        self.valid_from
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn top(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    /// Largest exponent that may carry a nonzero coefficient.
    fn sup(&self) -> Option<i64> {
        match (self.top(), self.valid_from) {
            (t, None) => t,
            (None, Some(v)) => Some(v - 1),
            (Some(t), Some(v)) => Some(t.max(v - 1)),
        }
    }

    fn add_at(&mut self, e: i64, p: &DiffPoly, c: &DualScalar) {
        if self.valid_from.is_some_and(|v| e < v) || p.is_zero() || c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_default();
        slot.add_scaled(p, c);
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    fn clip(&mut self) {
        if let Some(v) = self.valid_from {
            self.terms = self.terms.split_off(&v);
        }
    }

    pub fn add(&self, other: &LambdaSeries) -> LambdaSeries {
        let mut out = self.clone().with_valid_from(other.valid_from);
        for (e, p) in &other.terms {
            out.add_at(*e, p, &DualScalar::one());
        }
        out
    }

    pub fn sub(&self, other: &LambdaSeries) -> LambdaSeries {
        self.add(&other.scaled(&-&DualScalar::one()))
    }

    pub fn scaled(&self, c: &DualScalar) -> LambdaSeries {
        let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: self.valid_from };
        for (e, p) in &self.terms {
            out.add_at(*e, p, c);
        }
        out
    }

    /// Left multiplication of every coefficient by `p`.
    pub fn mul_poly(&self, p: &DiffPoly) -> LambdaSeries {
        let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: self.valid_from };
        for (e, q) in &self.terms {
            out.add_at(*e, &poly_mul(p, q), &DualScalar::one());
        }
        out
    }

    pub fn mul(&self, other: &LambdaSeries) -> LambdaSeries {
        let (Some(s1), Some(s2)) = (self.sup(), other.sup()) else {
            return LambdaSeries::zero();
        };
        let valid = vmax(self.valid_from.map(|v| v + s2), other.valid_from.map(|v| v + s1));
        let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: valid };
        for (e, p) in &self.terms {
            for (f, q) in &other.terms {
                out.add_at(e + f, &poly_mul(p, q), &DualScalar::one());
            }
        }
        out
    }

    /// Multiplication by `λ^k`.
    pub fn shift(&self, k: i64) -> LambdaSeries {
        LambdaSeries {
            terms: self.terms.iter().map(|(e, p)| (e + k, p.clone())).collect(),
            valid_from: self.valid_from.map(|v| v + k),
        }
    }

    /// `∂` applied to every coefficient.
    pub fn derive(&self) -> LambdaSeries {
        let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: self.valid_from };
        for (e, p) in &self.terms {
            out.add_at(*e, &poly_derive(p), &DualScalar::one());
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&DiffPoly) -> DiffPoly) -> LambdaSeries {
        let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: self.valid_from };
        for (e, p) in &self.terms {
            out.add_at(*e, &f(p), &DualScalar::one());
        }
        out
    }

    /// Drops exponents below `−k`.
    pub fn truncate(&self, k: i64) -> LambdaSeries {
        let dropped = self.terms.keys().next().is_some_and(|e| *e < -k);
        let v = if dropped || self.valid_from.is_some() { vmax(self.valid_from, Some(-k)) } else { None };
        self.clone().with_valid_from(v)
    }

    /// Truncation to order `k`, failing if the series is not known that far.
    pub fn restrict(&self, k: i64) -> Result<LambdaSeries, PvaError> {
        match self.valid_from {
            Some(v) if v > -k => Err(PvaError::TruncationUnderflow { requested: k, achieved: -v }),
            _ => Ok(self.truncate(k)),
        }
    }

    /// `self − other` on exponents `≥ −k`.
    pub fn difference_to(&self, other: &LambdaSeries, k: i64) -> Result<LambdaSeries, PvaError> {
        self.sub(other).restrict(k)
    }

    pub fn render(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (e, p)) in self.terms.iter().rev().enumerate() {
            let body = render_poly(p, names);
            let (neg, body) = match body.strip_prefix('-') {
                Some(rest) if p.len() == 1 => (true, rest.to_string()),
                _ => (false, body),
            };
            out.push_str(match (i, neg) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            });
            if p.len() > 1 {
                out.push_str(&format!("({body}) * lambda^{e}"));
            } else {
                out.push_str(&format!("{body} * lambda^{e}"));
            }
        }
        out
    }

    pub fn to_json(&self, names: &[String]) -> Value {
        json!({
            "order": self.valid_from.map(|v| -v),
            "terms": self.terms.iter().rev().map(|(e, p)| json!([e, render_poly(p, names)])).collect::<Vec<_>>(),
        })
    }
}

/// `(λ+∂)^e X` with `∂` acting on the coefficients of `X`; for `e < 0` the
/// expansion stops below `floor`.
pub fn lambda_shift_pow(e: i64, x: &LambdaSeries, floor: i64) -> LambdaSeries {
    if x.is_zero() && x.valid_from.is_none() {
        return LambdaSeries::zero();
    }
    let mut valid = x.valid_from.map(|v| v + e);
    if e < 0 {
        valid = vmax(valid, Some(floor));
    }
    let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: valid };
    for (a, p) in &x.terms {
        let mut d = p.clone();
        let mut k = 0u32;
        loop {
            let exp = a + e - k as i64;
            if (e >= 0 && k as i64 > e) || (e < 0 && exp < floor) || d.is_zero() {
                break;
            }
            out.add_at(exp, &d, &binomial_int(e, k).into());
            d = poly_derive(&d);
            k += 1;
        }
    }
    out
}

/// `Σ_e h_e (λ+∂)^e Y` with `∂` acting on `Y` only.
pub fn substitute_right(h: &LambdaSeries, y: &LambdaSeries, floor: i64) -> LambdaSeries {
    let mut acc = LambdaSeries::zero();
    for (e, c) in &h.terms {
        acc = acc.add(&lambda_shift_pow(*e, y, floor).mul_poly(c));
    }
    if let (Some(h0), Some(s)) = (h.valid_from, y.sup()) {
        acc = acc.with_valid_from(Some(h0 + s));
    }
    acc
}

/// `a(λ+∂)⁻¹b = Σ_{k<K} (−1)^k λ^{−1−k} a ∂^k b`.
pub fn expand_nonlocal(a: &DiffPoly, b: &DiffPoly, k: i64) -> LambdaSeries {
    let mut out = LambdaSeries { terms: BTreeMap::new(), valid_from: Some(-k) };
    let mut d = b.clone();
    for j in 0..k.max(0) {
        out.add_at(-1 - j, &poly_mul(a, &d), &sign(j));
        d = poly_derive(&d);
    }
    out
}

/// Closed form `Σ_n λ^n L_n + Σ_r p_r(λ+∂)⁻¹q_r`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NonlocalBracket {
    pub local: BTreeMap<u32, DiffPoly>,
    pub nonlocal: Vec<(DiffPoly, DiffPoly)>,
}

impl NonlocalBracket {
    pub fn nonlocal(p: DiffPoly, q: DiffPoly) -> Self {
        NonlocalBracket { local: BTreeMap::new(), nonlocal: vec![(p, q)] }
    }

    pub fn series(&self, k: i64) -> LambdaSeries {
        let mut s = LambdaSeries::zero();
        for (n, l) in &self.local {
            s.add_at(*n as i64, l, &DualScalar::one());
        }
        for (p, q) in &self.nonlocal {
            s = s.add(&expand_nonlocal(p, q, k));
        }
        s
    }

    /// The bracket `{b_λ a} = −{a_{−λ−∂} b}` determined by skew-symmetry.
    pub fn skew(&self) -> NonlocalBracket {
        let mut local = LambdaSeries::zero();
        for (n, l) in &self.local {
            let t = lambda_shift_pow(*n as i64, &LambdaSeries::constant(l.clone()), 0);
            local = local.add(&t.scaled(&-&sign(*n as i64)));
        }
        NonlocalBracket {
            local: local.terms.into_iter().map(|(e, p)| (e as u32, p)).collect(),
            // −(p∂⁻¹q)* = q∂⁻¹p
            nonlocal: self.nonlocal.iter().map(|(p, q)| (q.clone(), p.clone())).collect(),
        }
    }

    fn map_polys(&self, c: &DualScalar, images: &[DiffPoly]) -> NonlocalBracket {
        NonlocalBracket {
            local: self.local.iter().map(|(n, l)| (*n, substitute(l, images).scaled(c))).collect(),
            nonlocal: self
                .nonlocal
                .iter()
                .map(|(p, q)| (substitute(p, images).scaled(c), substitute(q, images)))
                .collect(),
        }
    }
}

pub type SeriesFactory = Arc<dyn Fn(i64) -> Result<LambdaSeries, PvaError> + Send + Sync>;

#[derive(Clone)]
pub enum BracketEntry {
    Closed(NonlocalBracket),
    Series(SeriesFactory),
}

/// Generator brackets `{x_i λ x_j}`; missing entries are zero.
#[derive(Clone)]
pub struct BracketTable {
    names: Vec<String>,
    entries: BTreeMap<(usize, usize), BracketEntry>,
}

impl fmt::Debug for BracketTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BracketTable({:?})", self.names)
    }
}

impl BracketTable {
    pub fn zero(names: Vec<String>) -> Self {
        BracketTable { names, entries: BTreeMap::new() }
    }

    pub fn with_closed(mut self, i: usize, j: usize, b: NonlocalBracket) -> Self {
        self.entries.insert((i, j), BracketEntry::Closed(b));
        self
    }

    pub fn with_series(mut self, i: usize, j: usize, f: SeriesFactory) -> Self {
        self.entries.insert((i, j), BracketEntry::Series(f));
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Result<usize, PvaError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| PvaError::UnknownGenerator(name.into()))
    }

    pub fn series(&self, i: usize, j: usize, k: i64) -> Result<LambdaSeries, PvaError> {
        match self.entries.get(&(i, j)) {
            None => Ok(LambdaSeries::zero()),
            Some(BracketEntry::Closed(b)) => Ok(b.series(k)),
            Some(BracketEntry::Series(f)) => f(k),
        }
    }

    pub fn closed(&self, i: usize, j: usize) -> Result<NonlocalBracket, PvaError> {
        match self.entries.get(&(i, j)) {
            None => Ok(NonlocalBracket::default()),
            Some(BracketEntry::Closed(b)) => Ok(b.clone()),
            Some(BracketEntry::Series(_)) => Err(PvaError::NotClosed(self.names[i].clone(), self.names[j].clone())),
        }
    }

    pub fn to_json(&self, k: i64) -> Result<Value, PvaError> {
        let mut m = serde_json::Map::new();
        for i in 0..self.names.len() {
            for j in 0..self.names.len() {
                let s = self.series(i, j, k)?.restrict(k)?;
                m.insert(format!("{},{}", self.names[i], self.names[j]), s.to_json(&self.names));
            }
        }
        Ok(Value::Object(m))
    }
}

fn uv_names() -> Vec<String> {
    vec!["u".into(), "v".into()]
}

/// The NLS table over `{u, v}`: `{u_λ u} = v(λ+∂)⁻¹v`, `{v_λ u} = −v(λ+∂)⁻¹u`,
/// `{v_λ v} = u(λ+∂)⁻¹u`, with `{u_λ v} = −u(λ+∂)⁻¹v` fixed by skew-symmetry.
pub fn nls_table() -> BracketTable {
    let (u, v) = (poly_var(0, 0), poly_var(1, 0));
    let vu = NonlocalBracket::nonlocal(v.scaled(&-&DualScalar::one()), u.clone());
    BracketTable::zero(uv_names())
        .with_closed(0, 0, NonlocalBracket::nonlocal(v.clone(), v))
        .with_closed(0, 1, vu.skew())
        .with_closed(1, 0, vu)
        .with_closed(1, 1, NonlocalBracket::nonlocal(u.clone(), u))
}

/// The NLS table with both mixed entries equal to `−v(λ+∂)⁻¹u`.
pub fn nls_table_literal() -> BracketTable {
    let (u, v) = (poly_var(0, 0), poly_var(1, 0));
    nls_table().with_closed(0, 1, NonlocalBracket::nonlocal(v.scaled(&-&DualScalar::one()), u))
}

/// Skew-symmetric completion of the literal `{u_λ v} = −v(λ+∂)⁻¹u`; not a PVA.
pub fn nls_table_transposed() -> BracketTable {
    let (u, v) = (poly_var(0, 0), poly_var(1, 0));
    let uv = NonlocalBracket::nonlocal(v.scaled(&-&DualScalar::one()), u);
    nls_table().with_closed(1, 0, uv.skew()).with_closed(0, 1, uv)
}

/// Master formula `Σ (∂g/∂x_j^{(n)})(λ+∂)^n {x_i {}_{λ+∂} x_j}_→ (−λ−∂)^m (∂f/∂x_i^{(m)})`
/// with generator brackets taken to order `kw`.
fn master_core(
    f: &DiffPoly,
    g: &DiffPoly,
    table: &BracketTable,
    kw: i64,
) -> Result<LambdaSeries, PvaError> {
    let floor = -kw;
    let mut cache: BTreeMap<(usize, usize), LambdaSeries> = BTreeMap::new();
    let mut acc = LambdaSeries::zero();
    for (j, n) in poly_vars(g) {
        let gd = partial(g, (j, n));
        let mut inner = LambdaSeries::zero();
        for (i, m) in poly_vars(f) {
            let fd = partial(f, (i, m));
            if fd.is_zero() {
                continue;
            }
            let y = lambda_shift_pow(m as i64, &LambdaSeries::constant(fd), floor).scaled(&sign(m as i64));
            let h = match cache.get(&(i, j)) {
                Some(h) => h.clone(),
                None => {
                    let h = table.series(i, j, kw)?;
                    cache.insert((i, j), h.clone());
                    h
                }
            };
            inner = inner.add(&substitute_right(&h, &y, floor));
        }
        acc = acc.add(&lambda_shift_pow(n as i64, &inner, floor).mul_poly(&gd));
    }
    Ok(acc)
}

fn working_order(f: &DiffPoly, g: &DiffPoly, k: i64) -> i64 {
    k + (max_order(f) + max_order(g)) as i64 + 2
}

/// `{f_λ g}` to order `k`.
pub fn master_bracket(f: &DiffPoly, g: &DiffPoly, table: &BracketTable, k: i64) -> Result<LambdaSeries, PvaError> {
    master_core(f, g, table, working_order(f, g, k))?.restrict(k)
}

/// `−{a_{−λ−∂} b}` from `h = {a_λ b}`, with `∂` acting on the coefficients.
pub fn skew_partner(h: &LambdaSeries, k: i64) -> LambdaSeries {
    let mut acc = LambdaSeries::zero();
    for (e, c) in &h.terms {
        acc = acc.add(&lambda_shift_pow(*e, &LambdaSeries::constant(c.clone()), -k).scaled(&sign(*e)));
    }
    acc.with_valid_from(h.valid_from).truncate(k).scaled(&-&DualScalar::one())
}

/// Defect `{b_λ a} + {a_{−λ−∂} b}` for generators `a`, `b`.
pub fn check_skew(table: &BracketTable, pair: (usize, usize), k: i64) -> Result<LambdaSeries, PvaError> {
    let (a, b) = pair;
    let hab = table.series(a, b, k)?;
    let hba = table.series(b, a, k)?;
    hba.difference_to(&skew_partner(&hab, k), k)
}

/// Skew-symmetry defect for arbitrary differential polynomials.
pub fn skew_defect(f: &DiffPoly, g: &DiffPoly, table: &BracketTable, k: i64) -> Result<LambdaSeries, PvaError> {
    let fg = master_bracket(f, g, table, k)?;
    let gf = master_bracket(g, f, table, k)?;
    gf.difference_to(&skew_partner(&fg, k), k)
}

/// `Σ c_{pq} λ^p μ^q`, dropping exponents below the floors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DoubleSeries {
    terms: BTreeMap<(i64, i64), DiffPoly>,
    floor: (i64, i64),
}

impl DoubleSeries {
    pub fn zero(floor: (i64, i64)) -> Self {
        DoubleSeries { terms: BTreeMap::new(), floor }
    }

    pub fn terms(&self) -> &BTreeMap<(i64, i64), DiffPoly> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_at(&mut self, p: i64, q: i64, poly: &DiffPoly, c: &DualScalar) {
        if p < self.floor.0 || q < self.floor.1 || poly.is_zero() || c.is_zero() {
            return;
        }
        let slot = self.terms.entry((p, q)).or_default();
        slot.add_scaled(poly, c);
        if slot.is_zero() {
            self.terms.remove(&(p, q));
        }
    }

    fn add_scaled(&mut self, other: &DoubleSeries, c: &DualScalar) {
        for ((p, q), poly) in &other.terms {
            self.add_at(*p, *q, poly, c);
        }
    }

    fn mul_poly(&self, x: &DiffPoly) -> DoubleSeries {
        let mut out = DoubleSeries::zero(self.floor);
        for ((p, q), poly) in &self.terms {
            out.add_at(*p, *q, &poly_mul(x, poly), &DualScalar::one());
        }
        out
    }

    /// `Σ l_p m_q λ^p μ^q`.
    fn product(l: &LambdaSeries, m: &LambdaSeries, floor: (i64, i64)) -> DoubleSeries {
        let mut out = DoubleSeries::zero(floor);
        for (p, a) in &l.terms {
            for (q, b) in &m.terms {
                out.add_at(*p, *q, &poly_mul(a, b), &DualScalar::one());
            }
        }
        out
    }

    fn from_lambda(l: &LambdaSeries, floor: (i64, i64)) -> DoubleSeries {
        Self::product(l, &LambdaSeries::constant(poly_one()), floor)
    }

    /// Coefficients with `p ≥ −k` and `q ≥ −k`.
    pub fn window(&self, k: i64) -> DoubleSeries {
        DoubleSeries {
            terms: self.terms.iter().filter(|((p, q), _)| *p >= -k && *q >= -k).map(|(x, y)| (*x, y.clone())).collect(),
            floor: (-k, -k),
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .rev()
            .map(|((p, q), poly)| format!("({}) * lambda^{p} mu^{q}", render_poly(poly, names)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// `(λ+μ+∂)^f Y`, expanded λ-first, `∂` acting on the coefficients of `Y`.
fn nu_power_right(f: i64, y: &DoubleSeries) -> DoubleSeries {
    let mut out = DoubleSeries::zero(y.floor);
    for ((p, q), poly) in &y.terms {
        let mut derivs = vec![poly.clone()];
        let mut j = 0u32;
        loop {
            let lp = p + f - j as i64;
            if (f >= 0 && j as i64 > f) || lp < y.floor.0 {
                break;
            }
            let bj: DualScalar = binomial_int(f, j).into();
            for t in 0..=j {
                let mq = q + (j - t) as i64;
                if mq < y.floor.1 {
                    break;
                }
                while derivs.len() <= t as usize {
                    let next = poly_derive(derivs.last().expect("nonempty"));
                    derivs.push(next);
                }
                let c = &bj * &binomial_int(j as i64, t).into();
                out.add_at(lp, mq, &derivs[t as usize], &c);
            }
            j += 1;
        }
    }
    out
}

/// `Σ_e h_e (λ+μ+∂)^e Y` for a series `h` in `ν = λ+μ`.
fn substitute_nu(h: &LambdaSeries, y: &DoubleSeries) -> DoubleSeries {
    let mut out = DoubleSeries::zero(y.floor);
    for (e, c) in &h.terms {
        out.add_scaled(&nu_power_right(*e, y).mul_poly(c), &DualScalar::one());
    }
    out
}

/// `{q_{ν+∂} x_c}_→ X` with `ν = λ+μ` expanded λ-first and `∂` acting on `X` only.
fn left_arrow(q: &DiffPoly, c: usize, x: &DoubleSeries, table: &BracketTable, kl: i64) -> Result<DoubleSeries, PvaError> {
    let mut out = DoubleSeries::zero(x.floor);
    for (i, m) in poly_vars(q) {
        let y = nu_power_right(m as i64, &x.mul_poly(&partial(q, (i, m))));
        out.add_scaled(&substitute_nu(&table.series(i, c, kl)?, &y), &sign(m as i64));
    }
    Ok(out)
}

/// Jacobi defect `{a_λ{b_μ c}} − {{a_λ b}_{λ+μ} c} − {b_μ{a_λ c}}` on the window `p, q ≥ −k`.
///
/// The `(a,b)` and `(b,c)` entries must be closed forms: the nested inverse
/// operators are reassembled from them before expansion.
pub fn check_jacobi(table: &BracketTable, triple: (usize, usize, usize), k: i64) -> Result<DoubleSeries, PvaError> {
    let (a, b, c) = triple;
    let kl = k + 6;
    let km = 2 * k + 6;
    let floor = (-kl, -km);
    let one = poly_one();
    let x = |i: usize| poly_var(i, 0);
    let unit = DoubleSeries::from_lambda(&LambdaSeries::constant(one.clone()), floor);

    // {b_μ{a_λ c}}: λ outside, μ inside.
    let mut t2 = DoubleSeries::zero(floor);
    for (e, ce) in &table.series(a, c, kl)?.terms {
        for (q, poly) in &master_core(&x(b), ce, table, km)?.terms {
            t2.add_at(*e, *q, poly, &DualScalar::one());
        }
    }

    // {a_λ{b_μ c}} through Leibniz on the closed form of {b_μ c}.
    let bc = table.closed(b, c)?;
    let mut t1 = DoubleSeries::zero(floor);
    for (n, l) in &bc.local {
        for (p, poly) in &master_core(&x(a), l, table, kl)?.terms {
            t1.add_at(*p, *n as i64, poly, &DualScalar::one());
        }
    }
    for (p, q) in &bc.nonlocal {
        let ap = master_core(&x(a), p, table, kl)?;
        t1.add_scaled(&DoubleSeries::product(&ap, &expand_nonlocal(&one, q, km), floor), &DualScalar::one());
        let aq = DoubleSeries::from_lambda(&master_core(&x(a), q, table, kl)?, floor);
        t1.add_scaled(&nu_power_right(-1, &aq).mul_poly(p), &DualScalar::one());
    }

    // {{a_λ b}_{λ+μ} c} through left Leibniz on the closed form of {a_λ b}.
    let ab = table.closed(a, b)?;
    let mut t3 = DoubleSeries::zero(floor);
    for (n, l) in &ab.local {
        let h = master_core(l, &x(c), table, kl)?;
        for ((p, q), poly) in &substitute_nu(&h, &unit).terms {
            t3.add_at(p + *n as i64, *q, poly, &DualScalar::one());
        }
    }
    for (p, q) in &ab.nonlocal {
        let h = master_core(p, &x(c), table, kl)?;
        let y = DoubleSeries::from_lambda(&expand_nonlocal(&one, q, kl), floor);
        t3.add_scaled(&substitute_nu(&h, &y), &DualScalar::one());
        // {((λ+∂)⁻¹q)_{ν+∂} c}_→ p = {q_{ν+∂} c}_→ (λ−ν−∂)⁻¹p, and λ−ν = −μ.
        let minus_one = -&DualScalar::one();
        let inv_p = DoubleSeries::product(&LambdaSeries::constant(one.clone()), &expand_nonlocal(&poly_const(minus_one), p, km), floor);
        t3.add_scaled(&left_arrow(q, c, &inv_p, table, kl)?, &DualScalar::one());
    }

    let mut defect = t1;
    defect.add_scaled(&t2, &-&DualScalar::one());
    defect.add_scaled(&t3, &-&DualScalar::one());
    Ok(defect.window(k))
}

/// Where `(λ+∂)⁻¹` acts inside `μ_{−1}(S(·))` in the limit bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// `μ_{−1}(S((λ+∂)⁻¹a ⊗ b))`, as displayed.
    FirstFactor,
    /// `μ_{−1}(S(a ⊗ (λ+∂)⁻¹b))`.
    SecondFactor,
}

impl Placement {
    pub const ALL: [Placement; 2] = [Placement::FirstFactor, Placement::SecondFactor];

    pub fn name(self) -> &'static str {
        match self {
            Placement::FirstFactor => "first-factor",
            Placement::SecondFactor => "second-factor",
        }
    }
}

pub type Dictionary<K> = Arc<dyn Fn(&K) -> Result<DiffPoly, PvaError> + Send + Sync>;

fn witness_json<K: GradedKey>(check: &str, a: &K, b: &K, n: Option<i64>, v: &Vector<K>) -> String {
    json!({"check": check, "a": a.to_string(), "b": b.to_string(), "n": n, "value": v}).to_string()
}

/// `X/ε` for `X ∈ εV`.
fn divide_epsilon<K: GradedKey>(v: &Vector<K>, witness: impl Fn() -> String) -> Result<Vector<K>, PvaError> {
    let mut out = Vector::zero();
    for (k, c) in v.iter() {
        if !c.value.is_zero() {
            return Err(PvaError::NotCommutativeModEps { witness: witness() });
        }
        out.add_term(k.clone(), DualScalar::from_gauss(c.eps.clone()));
    }
    Ok(out)
}

fn to_poly<K: GradedKey>(v: &Vector<K>, dict: &Dictionary<K>) -> Result<DiffPoly, PvaError> {
    let mut out = Vector::zero();
    for (k, c) in v.iter() {
        out.add_scaled(&dict(k)?, c);
    }
    Ok(out)
}

/// Requires `μ_n(a⊗b) ∈ εV` for `n ≥ 0` and `S(a⊗b) ∈ εV⊗V` on basis pairs up to `degree`.
pub fn check_commutative_mod_eps<I: LogVAInstance>(inst: &I, degree: i64) -> Result<(), PvaError> {
    let keys = logva::basis_up_to(inst, degree);
    for a in &keys {
        for b in &keys {
            let s = inst.braiding().apply_pair(a, b);
            if s.iter().any(|(_, c)| !c.value.is_zero()) {
                let flat: Vector<I::Key> = Vector::zero();
                return Err(PvaError::NotCommutativeModEps {
                    witness: json!({"check": "braiding", "a": a.to_string(), "b": b.to_string(), "value": s, "mu": flat})
                        .to_string(),
                });
            }
            for n in 0..inst.truncation_bound(a, b) {
                let m = inst.mode(a, n, b)?;
                divide_epsilon(&m, || witness_json("mu", a, b, Some(n), &m))?;
            }
        }
    }
    Ok(())
}

/// `{a_λ b} = Σ_n (λ^n/n!) μ_n(a⊗b)/ε + μ_{−1}(S((λ+∂)⁻¹a ⊗ b))/ε mod ε` to order `k`,
/// with `(λ+∂)⁻¹ = Σ_j (−1)^j λ^{−1−j} T^j` on states.
pub fn limit_bracket<I: LogVAInstance>(
    inst: &I,
    dict: &Dictionary<I::Key>,
    a: &I::Key,
    b: &I::Key,
    k: i64,
    placement: Placement,
) -> Result<LambdaSeries, PvaError> {
    let mut out = LambdaSeries::zero();
    let (va, vb) = (Vector::basis(a.clone()), Vector::basis(b.clone()));
    for n in 0..inst.truncation_bound(a, b) {
        let m = inst.mode(a, n, b)?;
        let d = divide_epsilon(&m, || witness_json("mu", a, b, Some(n), &m))?;
        out.add_at(n, &to_poly(&d, dict)?, &inv_factorial(n as u32));
    }
    out = out.with_valid_from(Some(-k));
    let t = inst.translation();
    for j in 0..k.max(0) {
        let pairs = match placement {
            Placement::FirstFactor => tensor(&t.apply_pow(&va, j as u32), &vb),
            Placement::SecondFactor => tensor(&va, &t.apply_pow(&vb, j as u32)),
        };
        let r = logva::mu_pairs(inst, -1, &inst.braiding().apply(&pairs))?;
        let d = divide_epsilon(&r, || witness_json("braided-product", a, b, Some(-1), &r))?;
        out.add_at(-1 - j, &to_poly(&d, dict)?, &sign(j));
    }
    Ok(out)
}

/// Bracket table on the generators of `V^ε/εV^ε`.
pub fn poisson_limit<I: LogVAInstance + 'static>(
    inst: Arc<I>,
    names: Vec<String>,
    generators: Vec<I::Key>,
    dict: Dictionary<I::Key>,
    placement: Placement,
    check_degree: i64,
) -> Result<BracketTable, PvaError> {
    check_commutative_mod_eps(&*inst, check_degree)?;
    let mut table = BracketTable::zero(names);
    for (i, a) in generators.iter().enumerate() {
        for (j, b) in generators.iter().enumerate() {
            let (inst, dict, a, b) = (inst.clone(), dict.clone(), a.clone(), b.clone());
            let f: SeriesFactory = Arc::new(move |k| limit_bracket(&*inst, &dict, &a, &b, k, placement));
            table = table.with_series(i, j, f);
        }
    }
    Ok(table)
}

/// `g_{−1−k}|0⟩ ↦ ∂^k g / k!`, extended multiplicatively; `w ↦ x_0`, `w̄ ↦ x_1`.
pub fn nls_dictionary(m: &NLSMonomial) -> Result<DiffPoly, PvaError> {
    let mut out = poly_one();
    for (g, n) in m.factors() {
        if *n > -1 {
            return Err(PvaError::Dictionary(m.to_string()));
        }
        let k = (-1 - n) as u32;
        let var = match g {
            Letter::W => 0,
            Letter::Wb => 1,
        };
        out = poly_mul(&out, &poly_var(var, k).scaled(&inv_factorial(k)));
    }
    Ok(out)
}

/// Limit table of the deformed NLS instance over `{w, wb}`.
pub fn nls_limit_table(placement: Placement, check_degree: i64) -> Result<BracketTable, PvaError> {
    let inst = Arc::new(NlsInstance::new(true));
    let gens = Letter::ALL.iter().map(|g| NLSMonomial::generator(*g)).collect();
    poisson_limit(inst, vec!["w".into(), "wb".into()], gens, Arc::new(nls_dictionary), placement, check_degree)
}

/// New generators `y_i = Σ_a forward[i][a] x_a`; `images[a]` expresses the old `x_a` in the new ones.
pub fn change_generators(
    table: &BracketTable,
    names: Vec<String>,
    forward: Vec<Vec<DualScalar>>,
    images: Vec<DiffPoly>,
) -> BracketTable {
    let old = table.names.len();
    let mut out = BracketTable::zero(names.clone());
    for i in 0..names.len() {
        for j in 0..names.len() {
            let coeffs: Vec<(usize, usize, DualScalar)> = (0..old)
                .flat_map(|a| (0..old).map(move |b| (a, b)))
                .map(|(a, b)| (a, b, &forward[i][a] * &forward[j][b]))
                .filter(|(_, _, c)| !c.is_zero())
                .collect();
            let closed: Option<Vec<NonlocalBracket>> =
                coeffs.iter().map(|(a, b, c)| table.closed(*a, *b).ok().map(|x| x.map_polys(c, &images))).collect();
            if let Some(parts) = closed {
                let mut merged = NonlocalBracket::default();
                for part in parts {
                    for (n, l) in part.local {
                        merged.local.entry(n).or_default().add_assign(&l);
                    }
                    merged.nonlocal.extend(part.nonlocal.into_iter().filter(|(p, q)| !p.is_zero() && !q.is_zero()));
                }
                merged.local.retain(|_, l| !l.is_zero());
                out = out.with_closed(i, j, merged);
            } else {
                let (old_table, images) = (table.clone(), images.clone());
                let f: SeriesFactory = Arc::new(move |k| {
                    let mut s = LambdaSeries::zero();
                    for (a, b, c) in &coeffs {
                        let t = old_table.series(*a, *b, k)?.map_coeffs(|p| substitute(p, &images));
                        s = s.add(&t.scaled(c));
                    }
                    Ok(s)
                });
                out = out.with_series(i, j, f);
            }
        }
    }
    out
}

/// `{w, w̄} → {u, v}` with `u = (w+w̄)/2`, `v = (w−w̄)/(2i)`.
pub fn basis_change(table: &BracketTable) -> BracketTable {
    let half = DualScalar::rational(1, 2);
    let minus_half_i = DualScalar::from_gauss(GaussScalar::new(Rational::zero(), Rational::new(-1, 2)));
    let forward = vec![vec![half.clone(), half], vec![minus_half_i.clone(), -&minus_half_i]];
    let (u, v) = (poly_var(0, 0), poly_var(1, 0));
    let iv = v.scaled(&DualScalar::i());
    let images = vec![u.sum(&iv), u.difference(&iv)];
    change_generators(table, uv_names(), forward, images)
}

/// Pairs whose brackets differ on exponents `≥ −k`.
pub fn table_mismatches(
    x: &BracketTable,
    y: &BracketTable,
    k: i64,
) -> Result<Vec<((String, String), LambdaSeries)>, PvaError> {
    let mut out = Vec::new();
    for i in 0..x.names.len() {
        for j in 0..x.names.len() {
            let d = x.series(i, j, k)?.difference_to(&y.series(i, j, k)?, k)?;
            if !d.is_zero() {
                out.push(((x.names[i].clone(), x.names[j].clone()), d));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names() -> Vec<String> {
        uv_names()
    }

    fn p(s: &str) -> DiffPoly {
        parse_poly(s, &names()).unwrap()
    }

    #[test]
    fn parse_and_render_round_trip() {
        let x = p("2*u*v'' - u^(4) + 1/2*v^2 - i*u' + (1-3/2i)*v");
        let back = parse_poly(&render_poly(&x, &names()), &names()).unwrap();
        assert_eq!(x, back);
        assert!(parse_poly("u +", &names()).is_err());
        assert!(parse_poly("q", &names()).is_err());
    }

    #[test]
    fn partial_derivatives() {
        assert_eq!(partial(&p("u^3*v'"), (0, 0)), p("3*u^2*v'"));
        assert_eq!(partial(&p("u^3*v'"), (1, 0)), DiffPoly::zero());
        assert_eq!(poly_derive(&p("u*v")), p("u'*v + u*v'"));
    }

    #[test]
    fn nonlocal_expansion_examples() {
        // a(λ+∂)⁻¹1 = aλ⁻¹
        let s = expand_nonlocal(&p("u"), &poly_one(), 5);
        assert_eq!(s.terms().len(), 1);
        assert_eq!(s.coeff(-1), p("u"));
        let s = expand_nonlocal(&p("u"), &p("v"), 3);
        assert_eq!(s.coeff(-1), p("u*v"));
        assert_eq!(s.coeff(-2), p("-u*v'"));
        assert_eq!(s.coeff(-3), p("u*v''"));
        assert_eq!(s.valid_from(), Some(-3));
    }

    #[test]
    fn geometric_inverse_is_inverse() {
        // (λ+∂)·(λ+∂)⁻¹b = b up to the truncation edge.
        let s = expand_nonlocal(&poly_one(), &p("u*v"), 8);
        let back = lambda_shift_pow(1, &s, -8);
        assert!(back.difference_to(&LambdaSeries::constant(p("u*v")), 7).unwrap().is_zero());
    }

    #[test]
    fn table_generators_match_closed_forms() {
        let t = nls_table();
        let uu = master_bracket(&p("u"), &p("u"), &t, 8).unwrap();
        assert_eq!(uu, expand_nonlocal(&p("v"), &p("v"), 8));
        let uv = master_bracket(&p("u"), &p("v"), &t, 8).unwrap();
        assert_eq!(uv, expand_nonlocal(&p("-u"), &p("v"), 8));
        let vu = master_bracket(&p("v"), &p("u"), &t, 8).unwrap();
        assert_eq!(vu, expand_nonlocal(&p("-v"), &p("u"), 8));
    }

    #[test]
    fn sesquilinearity_example() {
        let t = nls_table();
        let lhs = master_bracket(&p("u'"), &p("u"), &t, 7).unwrap();
        let rhs = master_bracket(&p("u"), &p("u"), &t, 8).unwrap().shift(1).scaled(&-&DualScalar::one());
        assert!(lhs.difference_to(&rhs, 7).unwrap().is_zero());
    }

    #[test]
    fn leibniz_example() {
        let t = nls_table();
        let lhs = master_bracket(&p("u"), &p("v^2"), &t, 8).unwrap();
        let rhs = master_bracket(&p("u"), &p("v"), &t, 8).unwrap().mul_poly(&p("2*v"));
        assert!(lhs.difference_to(&rhs, 8).unwrap().is_zero());
    }

    #[test]
    fn bracket_with_unit_vanishes() {
        let t = nls_table();
        assert!(master_bracket(&p("u"), &poly_one(), &t, 6).unwrap().is_zero());
        assert!(master_bracket(&poly_one(), &p("v"), &t, 6).unwrap().is_zero());
    }

    #[test]
    fn truncation_underflow_is_reported() {
        let s = expand_nonlocal(&p("u"), &p("v"), 3);
        assert_eq!(s.restrict(5), Err(PvaError::TruncationUnderflow { requested: 5, achieved: 3 }));
    }

    #[test]
    fn skew_on_nls_table() {
        let t = nls_table();
        for pair in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!(check_skew(&t, pair, 8).unwrap().is_zero(), "{pair:?}");
        }
    }

    #[test]
    fn literal_mixed_entries_are_not_skew() {
        let t = nls_table_literal();
        let d = check_skew(&t, (0, 1), 8).unwrap();
        assert!(!d.is_zero());
        // −v(λ+∂)⁻¹u + u(λ+∂)⁻¹v: first disagreement at λ⁻².
        assert_eq!(d.coeff(-1), DiffPoly::zero());
        assert_eq!(d.coeff(-2), p("v*u' - u*v'"));
    }

    #[test]
    fn skew_negative_control() {
        let bad = BracketTable::zero(names()).with_closed(
            0,
            0,
            NonlocalBracket { local: BTreeMap::from([(1, p("u"))]), nonlocal: vec![] },
        );
        let d = check_skew(&bad, (0, 0), 8).unwrap();
        // λu + (−λ−∂)u = −u′
        assert_eq!(d, LambdaSeries::monomial(0, p("-u'")).truncate(8));
    }

    #[test]
    fn skew_of_composite_polynomials() {
        let t = nls_table();
        for (f, g) in [("u*v", "u"), ("u'", "v^2"), ("u*u'", "v'")] {
            assert!(skew_defect(&p(f), &p(g), &t, 6).unwrap().is_zero(), "{f} {g}");
        }
    }

    #[test]
    fn jacobi_on_nls_table() {
        let t = nls_table();
        for triple in [(0, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 0), (0, 0, 1)] {
            let d = check_jacobi(&t, triple, 6).unwrap();
            assert!(d.is_zero(), "{triple:?}: {}", d.render(&names()));
        }
    }

    #[test]
    fn jacobi_trivial_and_local() {
        let zero = BracketTable::zero(names());
        assert!(check_jacobi(&zero, (0, 1, 0), 6).unwrap().is_zero());
        // {u_λ u} = (∂+2λ)u + 3λ³
        let vir = BracketTable::zero(vec!["u".into()]).with_closed(
            0,
            0,
            NonlocalBracket {
                local: BTreeMap::from([(0, p("u'")), (1, p("2*u")), (3, p("3"))]),
                nonlocal: vec![],
            },
        );
        assert!(check_skew(&vir, (0, 0), 6).unwrap().is_zero());
        assert!(check_jacobi(&vir, (0, 0, 0), 6).unwrap().is_zero());
        // {u_λ u} = (∂+3λ)u breaks Jacobi.
        let bad = BracketTable::zero(vec!["u".into()]).with_closed(
            0,
            0,
            NonlocalBracket { local: BTreeMap::from([(0, p("u'")), (1, p("3*u"))]), nonlocal: vec![] },
        );
        assert!(!check_jacobi(&bad, (0, 0, 0), 6).unwrap().is_zero());
    }

    #[test]
    fn jacobi_rejects_transposed_mixed_entries() {
        let t = nls_table_transposed();
        assert!(check_skew(&t, (0, 1), 8).unwrap().is_zero());
        let d = check_jacobi(&t, (0, 1, 0), 2).unwrap();
        assert!(!d.is_zero());
    }

    #[test]
    fn jacobi_on_rank_one_linear_tables() {
        // {x_i λ x_j} = ξ_j(λ+∂)⁻¹ξ_i with ξ = (a u, b v) is constant in log coordinates.
        for (a, b) in [(1, 1), (1, -1), (2, 3), (1, 0)] {
            let xi = [poly_var(0, 0).scaled(&DualScalar::integer(a)), poly_var(1, 0).scaled(&DualScalar::integer(b))];
            let mut t = BracketTable::zero(names());
            for i in 0..2 {
                for j in 0..2 {
                    t = t.with_closed(i, j, NonlocalBracket::nonlocal(xi[j].clone(), xi[i].clone()));
                }
            }
            for triple in [(0, 0, 0), (0, 1, 0), (1, 0, 0), (0, 0, 1), (1, 1, 0)] {
                assert!(check_jacobi(&t, triple, 4).unwrap().is_zero(), "{a} {b} {triple:?}");
            }
        }
    }

    #[test]
    fn jacobi_requires_closed_entries() {
        let f: SeriesFactory = Arc::new(|_| Ok(LambdaSeries::zero()));
        let t = BracketTable::zero(names()).with_series(0, 0, f);
        assert!(matches!(check_jacobi(&t, (0, 0, 0), 4), Err(PvaError::NotClosed(..))));
    }

    #[test]
    fn limit_positive_products_vanish() {
        let inst = NlsInstance::new(true);
        let w = NLSMonomial::generator(Letter::W);
        assert!(inst.mode(&w, 0, &w).unwrap().is_zero());
    }

    #[test]
    fn limit_precondition() {
        check_commutative_mod_eps(&NlsInstance::new(true), 3).unwrap();
        let err = check_commutative_mod_eps(&NlsInstance::new(false), 2).unwrap_err();
        assert!(matches!(err, PvaError::NotCommutativeModEps { .. }));
    }

    #[test]
    fn limit_ww_bracket() {
        let wn = vec!["w".to_string(), "wb".to_string()];
        for placement in Placement::ALL {
            let t = nls_limit_table(placement, 2).unwrap();
            let ww = t.series(0, 0, 6).unwrap();
            let x = poly_var(0, 0);
            assert_eq!(ww, expand_nonlocal(&x.scaled(&-&DualScalar::one()), &x, 6), "{}", ww.render(&wn));
        }
    }

    #[test]
    fn limit_with_unit_vanishes() {
        let inst = NlsInstance::new(true);
        let dict: Dictionary<NLSMonomial> = Arc::new(nls_dictionary);
        let w = NLSMonomial::generator(Letter::W);
        for placement in Placement::ALL {
            let s = limit_bracket(&inst, &dict, &NLSMonomial::vacuum(), &w, 6, placement).unwrap();
            assert!(s.is_zero());
            let s = limit_bracket(&inst, &dict, &w, &NLSMonomial::vacuum(), 6, placement).unwrap();
            assert!(s.is_zero());
        }
    }

    #[test]
    fn limit_refinement_is_stable() {
        let t = nls_limit_table(Placement::FirstFactor, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let a = t.series(i, j, 5).unwrap();
                let b = t.series(i, j, 8).unwrap();
                assert!(a.difference_to(&b, 5).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn basis_change_of_zero_table() {
        let z = BracketTable::zero(vec!["w".into(), "wb".into()]);
        let t = basis_change(&z);
        for i in 0..2 {
            for j in 0..2 {
                assert!(t.series(i, j, 6).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn basis_change_round_trip_on_closed_table() {
        // {w, w̄} table of the skew-completed NLS brackets, written directly.
        let (w, wb) = (poly_var(0, 0), poly_var(1, 0));
        let m1 = -&DualScalar::one();
        let wt = BracketTable::zero(vec!["w".into(), "wb".into()])
            .with_closed(0, 0, NonlocalBracket::nonlocal(w.scaled(&m1), w.clone()))
            .with_closed(0, 1, NonlocalBracket::nonlocal(wb.clone(), w.clone()))
            .with_closed(1, 0, NonlocalBracket::nonlocal(w.clone(), wb.clone()))
            .with_closed(1, 1, NonlocalBracket::nonlocal(wb.scaled(&m1), wb));
        assert!(table_mismatches(&basis_change(&wt), &nls_table(), 8).unwrap().is_empty());
    }

    #[test]
    fn limit_matches_under_one_placement() {
        let target = nls_table();
        let first = basis_change(&nls_limit_table(Placement::FirstFactor, 2).unwrap());
        let second = basis_change(&nls_limit_table(Placement::SecondFactor, 2).unwrap());
        let m1 = table_mismatches(&first, &target, 8).unwrap();
        let m2 = table_mismatches(&second, &target, 8).unwrap();
        assert!(m1.is_empty(), "{:?}", m1.iter().map(|(k, _)| k).collect::<Vec<_>>());
        let pairs: Vec<_> = m2.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(pairs, vec![("u".into(), "v".into()), ("v".into(), "u".into())]);
    }

    #[test]
    fn series_json_and_text() {
        let s = expand_nonlocal(&p("u"), &p("v"), 2);
        assert_eq!(s.render(&names()), "u*v * lambda^-1 - u*v' * lambda^-2");
        assert_eq!(s.to_json(&names())["order"], json!(2));
    }

    fn arb_poly() -> impl Strategy<Value = DiffPoly> {
        let factor = (0usize..2, 0u32..3);
        let mono = prop::collection::vec(factor, 0..3);
        prop::collection::vec((mono, -3i64..4), 1..4).prop_map(|terms| {
            let mut out = DiffPoly::zero();
            for (f, c) in terms {
                out.add_term(DiffMonomial::new(f), DualScalar::integer(c));
            }
            out
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sesquilinearity(f in arb_poly(), g in arb_poly()) {
            let t = nls_table();
            let k = 6;
            let base = master_bracket(&f, &g, &t, k + 1).unwrap();
            let left = master_bracket(&poly_derive(&f), &g, &t, k).unwrap();
            prop_assert!(left.difference_to(&base.shift(1).scaled(&-&DualScalar::one()), k).unwrap().is_zero());
            let right = master_bracket(&f, &poly_derive(&g), &t, k).unwrap();
            prop_assert!(right.difference_to(&lambda_shift_pow(1, &base, -k - 1), k).unwrap().is_zero());
        }

        #[test]
        fn leibniz(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
            let t = nls_table();
            let k = 5;
            let lhs = master_bracket(&f, &poly_mul(&g, &h), &t, k).unwrap();
            let rhs = master_bracket(&f, &g, &t, k).unwrap().mul_poly(&h)
                .add(&master_bracket(&f, &h, &t, k).unwrap().mul_poly(&g));
            prop_assert!(lhs.difference_to(&rhs, k).unwrap().is_zero());
        }

        #[test]
        fn skew_symmetry_extends(f in arb_poly(), g in arb_poly()) {
            prop_assert!(skew_defect(&f, &g, &nls_table(), 5).unwrap().is_zero());
        }
    }
}
