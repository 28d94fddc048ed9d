//! Generic engine for braided logarithmic vertex algebras.
//!
//! An algebra is supplied through [`LogVAInstance`]: a graded basis, the
//! products `μ_n(a⊗b) = a_{(n+S)}b` on basis keys, a translation operator and a
//! braiding map. Everything else (state-field series, `(n+S)`-th products of
//! states, and the axiom checks) is computed here from that data.
//!
//! Checks return defect data. Every sum is cut by the grading, never by a
//! heuristic bound: `μ_n(a⊗b)` has degree `deg a + deg b − n − 1` and so
//! vanishes for `n ≥ deg a + deg b`.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::braiding::{BraidingError, BraidingMap, EndoMap, GradedKey};
use crate::logseries::{Exponent, LogMonomial, LogSeries};
use crate::nls::NlsError;
use crate::scalar::{
    binomial_polynomial, derive_polynomial, eval_polynomial, factorial, sign_power, DualScalar, GaussScalar,
    Rational, ScalarError,
};
use crate::state::{KeyFmt, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogVAError {
    #[error(transparent)]
    Braiding(#[from] BraidingError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Nls(#[from] NlsError),
    #[error("recursion bound exceeded at {witness}")]
    NonTermination { witness: String },
    #[error("declared translation disagrees with a_(-2)|0> at {witness}")]
    TranslationMismatch { witness: String },
    #[error("s-matrix is not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),
}

pub type Pairs<K> = Vector<(K, K)>;
pub type Triples<K> = Vector<(K, K, K)>;

/// The data defining a braided logVA.
pub trait LogVAInstance: Send + Sync {
    type Key: GradedKey + Hash;

    fn name(&self) -> &str;
    /// Whether coefficients live in the dual ring.
    fn is_dual(&self) -> bool;
    fn vacuum(&self) -> Self::Key;
    fn basis(&self, degree: i64) -> Vec<Self::Key>;
    fn generators(&self) -> Vec<Self::Key>;
    /// `μ_n(a⊗b)`.
    fn mode(&self, a: &Self::Key, n: i64, b: &Self::Key) -> Result<Vector<Self::Key>, LogVAError>;
    fn translation(&self) -> &EndoMap<Self::Key>;
    fn braiding(&self) -> &BraidingMap<Self::Key>;

    /// `μ_n(a⊗b) = 0` for `n ≥ truncation_bound(a, b)`.
    fn truncation_bound(&self, a: &Self::Key, b: &Self::Key) -> i64 {
        a.degree() + b.degree()
    }

    /// Bound on `|Re d|` over semisimple eigenvalues `d` of `S` on `a⊗b` with
    /// `deg a = da`, `deg b = db`.
    fn eigenvalue_bound(&self, da: i64, db: i64) -> i64 {
        let mut best = 0;
        for a in self.basis(da) {
            for b in self.basis(db) {
                if let Ok(comps) = self.braiding().decompose_pair(&a, &b) {
                    for c in comps {
                        best = best.max(ceil(&c.eigenvalue.re.abs()));
                    }
                }
            }
        }
        best
    }
}

fn floor(r: &Rational) -> i64 {
    r.floor().try_into().expect("exponent fits in i64")
}

fn ceil(r: &Rational) -> i64 {
    -floor(&-r.clone())
}

/// `μ_n` extended bilinearly.
pub fn mu<I: LogVAInstance>(inst: &I, a: &Vector<I::Key>, n: i64, b: &Vector<I::Key>) -> Result<Vector<I::Key>, LogVAError> {
    let mut out = Vector::zero();
    for (x, cx) in a.iter() {
        for (y, cy) in b.iter() {
            if n >= inst.truncation_bound(x, y) {
                continue;
            }
            out.add_scaled(&inst.mode(x, n, y)?, &(cx * cy));
        }
    }
    Ok(out)
}

pub fn mu_pairs<I: LogVAInstance>(inst: &I, n: i64, v: &Pairs<I::Key>) -> Result<Vector<I::Key>, LogVAError> {
    let mut out = Vector::zero();
    for ((x, y), c) in v.iter() {
        if n >= inst.truncation_bound(x, y) {
            continue;
        }
        out.add_scaled(&inst.mode(x, n, y)?, c);
    }
    Ok(out)
}

fn inv_factorial(t: u32) -> DualScalar {
    Rational::from_bigints(1.into(), factorial(t)).expect("t! > 0").into()
}

/// `binom(n+S, j)` on one spectral component: `Σ_{t<m} (1/t!) p^{(t)}(d) N^t v`
/// with `p(x) = binom(n+x, j)`.
pub fn binom_op<V: crate::logseries::Coeff>(
    n: i64,
    j: u32,
    d: &GaussScalar,
    nilpotent_order: u32,
    v: &V,
    nil: impl Fn(&V) -> V,
) -> V {
    let mut poly = binomial_polynomial(n, j);
    let x = DualScalar::from_gauss(d.clone());
    let mut out = V::zero();
    let mut cur = v.clone();
    for t in 0..nilpotent_order.max(1) {
        if t > 0 {
            cur = nil(&cur);
            poly = derive_polynomial(&poly);
        }
        if cur.is_zero() {
            break;
        }
        let c = eval_polynomial(&poly, &x);
        out.add_assign(&cur.scale(&(&c * &inv_factorial(t))));
    }
    out
}

/// `f(S)` on pairs, where `coeff(d, t)` is the `t`-th Taylor coefficient of `f` at `d`.
fn s_function<K: GradedKey>(
    braiding: &BraidingMap<K>,
    v: &Pairs<K>,
    coeff: impl Fn(&GaussScalar, u32) -> Result<DualScalar, LogVAError>,
) -> Result<Pairs<K>, LogVAError> {
    let mut out = Pairs::zero();
    for ((a, b), x) in v.iter() {
        for comp in braiding.decompose_pair(a, b)? {
            let mut cur = comp.vector.clone();
            for t in 0..comp.nilpotent_order.max(1) {
                if t > 0 {
                    cur = braiding.nilpotent_apply(&comp.eigenvalue, &cur);
                }
                if cur.is_zero() {
                    break;
                }
                out.add_scaled(&cur, &(&coeff(&comp.eigenvalue, t)? * x));
            }
        }
    }
    Ok(out)
}

fn taylor_binom(n: i64, j: u32) -> impl Fn(&GaussScalar, u32) -> Result<DualScalar, LogVAError> {
    let base = binomial_polynomial(n, j);
    move |d, t| {
        let mut p = base.clone();
        for _ in 0..t {
            p = derive_polynomial(&p);
        }
        Ok(&eval_polynomial(&p, &DualScalar::from_gauss(d.clone())) * &inv_factorial(t))
    }
}

/// `binom(n+S, j)` on pairs.
pub fn binom_s<K: GradedKey>(braiding: &BraidingMap<K>, n: i64, j: u32, v: &Pairs<K>) -> Result<Pairs<K>, LogVAError> {
    s_function(braiding, v, taylor_binom(n, j))
}

/// `(−1)^{S^(s)} binom(n+S, j)` on pairs.
pub fn signed_binom_s<K: GradedKey>(braiding: &BraidingMap<K>, n: i64, j: u32, v: &Pairs<K>) -> Result<Pairs<K>, LogVAError> {
    let f = taylor_binom(n, j);
    s_function(braiding, v, move |d, t| Ok(&f(d, t)? * &sign_power(d)?))
}

/// Apply a pair operator to positions `(i, j)` of every triple.
fn on_positions<K: GradedKey>(
    t: &Triples<K>,
    pos: (usize, usize),
    f: impl Fn(&Pairs<K>) -> Result<Pairs<K>, LogVAError>,
) -> Result<Triples<K>, LogVAError> {
    let mut out = Triples::zero();
    for (key, x) in t.iter() {
        let parts = [&key.0, &key.1, &key.2];
        let image = f(&Pairs::basis((parts[pos.0].clone(), parts[pos.1].clone())))?;
        for ((p, q), y) in image.iter() {
            let mut k = [key.0.clone(), key.1.clone(), key.2.clone()];
            k[pos.0] = p.clone();
            k[pos.1] = q.clone();
            let [k0, k1, k2] = k;
            out.add_term((k0, k1, k2), x * y);
        }
    }
    Ok(out)
}

fn triple<K: GradedKey>(a: &K, b: &K, c: &K) -> Triples<K> {
    Triples::basis((a.clone(), b.clone(), c.clone()))
}

/// `Σ_j (−1)^j μ_{m+n−j}(I⊗μ_{k+j}) binom(n+S₁₂, j)` on `a⊗b⊗c`.
fn borcherds_first<I: LogVAInstance>(inst: &I, m: i64, n: i64, k: i64, a: &I::Key, b: &I::Key, c: &I::Key) -> Result<Vector<I::Key>, LogVAError> {
    let mut out = Vector::zero();
    let top = b.degree() + c.degree() - k;
    for j in 0..top.max(0) {
        let pairs = binom_s(inst.braiding(), n, j as u32, &Pairs::basis((a.clone(), b.clone())))?;
        let sign = if j % 2 == 0 { DualScalar::one() } else { DualScalar::integer(-1) };
        for ((x, y), coef) in pairs.iter() {
            let inner = mu(inst, &Vector::basis(y.clone()), k + j, &Vector::basis(c.clone()))?;
            let outer = mu(inst, &Vector::basis(x.clone()), m + n - j, &inner)?;
            out.add_scaled(&outer, &(coef * &sign));
        }
    }
    Ok(out)
}

/// `Σ_j (−1)^{n+j} μ_{n+k−j}(I⊗μ_{m+j})(−1)^{S^(s)₁₂} binom(n+S₁₂, j) P₁₂` on `a⊗b⊗c`.
fn borcherds_second<I: LogVAInstance>(inst: &I, m: i64, n: i64, k: i64, a: &I::Key, b: &I::Key, c: &I::Key) -> Result<Vector<I::Key>, LogVAError> {
    let mut out = Vector::zero();
    let top = a.degree() + c.degree() - m;
    for j in 0..top.max(0) {
        let pairs = signed_binom_s(inst.braiding(), n, j as u32, &Pairs::basis((b.clone(), a.clone())))?;
        let sign = if (n + j).rem_euclid(2) == 0 { DualScalar::one() } else { DualScalar::integer(-1) };
        for ((y, x), coef) in pairs.iter() {
            let inner = mu(inst, &Vector::basis(x.clone()), m + j, &Vector::basis(c.clone()))?;
            let outer = mu(inst, &Vector::basis(y.clone()), n + k - j, &inner)?;
            out.add_scaled(&outer, &(coef * &sign));
        }
    }
    Ok(out)
}

/// `Σ_j μ_{m+k−j}(μ_{n+j}⊗I) binom(m+S₁₃, j)` on `a⊗b⊗c`, for `j ≥ j0`.
fn borcherds_third<I: LogVAInstance>(inst: &I, m: i64, n: i64, a: &I::Key, b: &I::Key, c: &I::Key, j0: i64) -> Result<Vec<(i64, Triples<I::Key>)>, LogVAError> {
    let mut out = Vec::new();
    let top = a.degree() + b.degree() - n;
    for j in j0..top.max(j0) {
        let t = on_positions(&triple(a, b, c), (0, 2), |p| binom_s(inst.braiding(), m, j as u32, p))?;
        if !t.is_zero() {
            out.push((j, t));
        }
    }
    Ok(out)
}

/// Left side minus right side of the Borcherds identity on `a⊗b⊗c`.
pub fn check_borcherds<I: LogVAInstance>(inst: &I, a: &I::Key, b: &I::Key, c: &I::Key, m: i64, n: i64, k: i64) -> Result<Vector<I::Key>, LogVAError> {
    let mut defect = borcherds_first(inst, m, n, k, a, b, c)?;
    defect.sub_assign(&borcherds_second(inst, m, n, k, a, b, c)?);
    for (j, t) in borcherds_third(inst, m, n, a, b, c, 0)? {
        for ((x, y, z), coef) in t.iter() {
            let inner = mu(inst, &Vector::basis(x.clone()), n + j, &Vector::basis(y.clone()))?;
            let outer = mu(inst, &inner, m + k - j, &Vector::basis(z.clone()))?;
            defect.add_scaled(&outer, &-coef);
        }
    }
    Ok(defect)
}

/// `μ_K((a_{(n+S)}b) ⊗ c)` from the Borcherds identity at a fixed `m`,
/// recursing on `n` through the correction terms.
pub fn nth_product_modes<I: LogVAInstance>(inst: &I, a: &I::Key, n: i64, b: &I::Key, big_k: i64, c: &I::Key, m: i64) -> Result<Vector<I::Key>, LogVAError> {
    NthProduct::new(inst, m).eval(a, n, b, big_k, c)
}

type NthKey<K> = (K, i64, K, i64, K);

/// Memoized solver for `μ_K((a_{(n+S)}b) ⊗ c)` at a fixed Borcherds parameter `m`.
pub struct NthProduct<'a, I: LogVAInstance> {
    inst: &'a I,
    m: i64,
    budget: u64,
    memo: HashMap<NthKey<I::Key>, Vector<I::Key>>,
}

impl<'a, I: LogVAInstance> NthProduct<'a, I> {
    pub fn new(inst: &'a I, m: i64) -> Self {
        NthProduct { inst, m, budget: 1_000_000, memo: HashMap::new() }
    }

    pub fn eval(&mut self, a: &I::Key, n: i64, b: &I::Key, big_k: i64, c: &I::Key) -> Result<Vector<I::Key>, LogVAError> {
        let (inst, m) = (self.inst, self.m);
        if n >= inst.truncation_bound(a, b) {
            return Ok(Vector::zero());
        }
        let key = (a.clone(), n, b.clone(), big_k, c.clone());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.budget == 0 {
            return Err(LogVAError::NonTermination { witness: format!("({a})_({n}) ({b}) mode {big_k} on {c}, m = {m}") });
        }
        self.budget -= 1;
        let k = big_k - m;
        let mut out = borcherds_first(inst, m, n, k, a, b, c)?;
        out.sub_assign(&borcherds_second(inst, m, n, k, a, b, c)?);
        for (j, t) in borcherds_third(inst, m, n, a, b, c, 1)? {
            for ((x, y, z), coef) in t.iter() {
                let v = self.eval(x, n + j, y, big_k - j, z)?;
                out.add_scaled(&v, &-coef);
            }
        }
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// `S(μ_n⊗I) − (μ_n⊗I)(S₁₃+S₂₃)` on `a⊗b⊗c`.
pub fn check_hexagon<I: LogVAInstance>(inst: &I, a: &I::Key, b: &I::Key, c: &I::Key, n: i64) -> Result<Pairs<I::Key>, LogVAError> {
    let s = inst.braiding();
    let prod = mu(inst, &Vector::basis(a.clone()), n, &Vector::basis(b.clone()))?;
    let mut lhs = Pairs::zero();
    for (x, cx) in prod.iter() {
        lhs.add_scaled(&s.apply_pair(x, c), cx);
    }
    let t = triple(a, b, c);
    let mut sum = on_positions(&t, (0, 2), |p| Ok(s.apply(p)))?;
    sum.add_assign(&on_positions(&t, (1, 2), |p| Ok(s.apply(p)))?);
    let mut rhs = Pairs::zero();
    for ((x, y, z), coef) in sum.iter() {
        let p = mu(inst, &Vector::basis(x.clone()), n, &Vector::basis(y.clone()))?;
        for (w, cw) in p.iter() {
            rhs.add_term((w.clone(), z.clone()), coef * cw);
        }
    }
    Ok(lhs.difference(&rhs))
}

/// One failed vacuum condition.
#[derive(Clone, Debug, Serialize)]
pub struct VacuumDefect {
    pub axiom: String,
    pub input: String,
    pub defect: String,
}

/// `S(|0⟩⊗a) = S(a⊗|0⟩) = 0`, `μ_n(|0⟩⊗a) = δ_{n,−1}a` and `μ_{−1}(a⊗|0⟩) = a`
/// for modes `n ∈ [−window, window]`.
pub fn check_vacuum<I: LogVAInstance>(inst: &I, a: &I::Key, window: i64) -> Result<Vec<VacuumDefect>, LogVAError> {
    let vac = inst.vacuum();
    let mut out = Vec::new();
    let mut push = |axiom: &str, d: String| out.push(VacuumDefect { axiom: axiom.into(), input: a.to_string(), defect: d });
    let s1 = inst.braiding().apply_pair(&vac, a);
    if !s1.is_zero() {
        push("S(vac (x) a) = 0", s1.to_string());
    }
    let s2 = inst.braiding().apply_pair(a, &vac);
    if !s2.is_zero() {
        push("S(a (x) vac) = 0", s2.to_string());
    }
    for n in -window..=window {
        let v = mu(inst, &Vector::basis(vac.clone()), n, &Vector::basis(a.clone()))?;
        let expected = if n == -1 { Vector::basis(a.clone()) } else { Vector::zero() };
        if v != expected {
            push(&format!("vac_({n}) a"), v.difference(&expected).to_string());
        }
    }
    let v = mu(inst, &Vector::basis(a.clone()), -1, &Vector::basis(vac.clone()))?;
    if v != Vector::basis(a.clone()) {
        push("a_(-1) vac = a", v.difference(&Vector::basis(a.clone())).to_string());
    }
    Ok(out)
}

/// `T(a) = a_{(−2+S)}|0⟩`, checked against the declared translation.
pub fn translate<I: LogVAInstance>(inst: &I, a: &I::Key) -> Result<Vector<I::Key>, LogVAError> {
    let t = mu(inst, &Vector::basis(a.clone()), -2, &Vector::basis(inst.vacuum()))?;
    if t != inst.translation().apply_key(a) {
        return Err(LogVAError::TranslationMismatch { witness: a.to_string() });
    }
    Ok(t)
}

fn monomial1(alpha: GaussScalar, zeta: u32) -> LogMonomial<1> {
    LogMonomial::new([Exponent(alpha)], [zeta])
}

/// `Y(a,z)b = Σ_n μ_n(z^{−n−1−S}(a⊗b))`, every term with real exponent in `[lo, hi]`.
pub fn y_action<I: LogVAInstance>(inst: &I, a: &I::Key, b: &I::Key, lo: i64, hi: i64) -> Result<LogSeries<Vector<I::Key>, 1>, LogVAError> {
    let s = inst.braiding();
    let mut out = LogSeries::zero();
    let top = inst.truncation_bound(a, b);
    for comp in s.decompose_pair(a, b)? {
        let d = &comp.eigenvalue;
        // −n−1−Re d ≤ hi
        let n_lo = -hi - 1 - floor(&d.re) - 1;
        let mut cur = comp.vector.clone();
        let mut fact = DualScalar::one();
        for t in 0..comp.nilpotent_order.max(1) {
            if t > 0 {
                cur = s.nilpotent_apply(d, &cur);
                fact = &fact * &DualScalar::integer(-(t as i64));
            }
            if cur.is_zero() {
                break;
            }
            let scale = fact.inv()?;
            for n in n_lo..top {
                let v = mu_pairs(inst, n, &cur)?;
                if v.is_zero() {
                    continue;
                }
                let alpha = &GaussScalar::integer(-n - 1) - d;
                out.add_term(monomial1(alpha, t), v.scaled(&scale));
            }
        }
    }
    Ok(out.restrict(lo, hi))
}

/// `Y(a,z)v` for a state `v`.
pub fn y_action_state<I: LogVAInstance>(inst: &I, a: &I::Key, v: &Vector<I::Key>, lo: i64, hi: i64) -> Result<LogSeries<Vector<I::Key>, 1>, LogVAError> {
    let mut out = LogSeries::zero();
    for (b, c) in v.iter() {
        out.add_series(&y_action(inst, a, b, lo, hi)?.scaled(c));
    }
    Ok(out)
}

/// `[T, Y(a,z)]b − D_z Y(a,z)b` on the window `[lo, hi]`.
pub fn check_translation_covariance<I: LogVAInstance>(inst: &I, a: &I::Key, b: &I::Key, lo: i64, hi: i64) -> Result<LogSeries<Vector<I::Key>, 1>, LogVAError> {
    let t = inst.translation();
    let y = y_action(inst, a, b, lo, hi + 1)?;
    let mut lhs = y.restrict(lo, hi).map_coeffs(|v| t.apply(v));
    lhs.sub_series(&y_action_state(inst, a, &t.apply_key(b), lo, hi)?);
    let rhs = y.dz_total(0).restrict(lo, hi);
    lhs.sub_series(&rhs);
    Ok(lhs)
}

/// One side of the locality identity:
/// `Y(z_big)(I⊗Y(z_small)) ι z₁₂^{N+S}(x⊗y)⊗c`, with `big = 0` for the
/// `|z₁| > |z₂|` expansion and `big = 1` for the opposite one.
fn locality_side<I: LogVAInstance>(inst: &I, x: &I::Key, y: &I::Key, c: &I::Key, big_n: i64, big: usize, lo: i64, hi: i64) -> Result<LogSeries<Vector<I::Key>, 2>, LogVAError> {
    let s = inst.braiding();
    let small = 1 - big;
    let e = inst.eigenvalue_bound(y.degree(), c.degree());
    let j_max = hi + y.degree() + c.degree() + e + 1;
    let mut out: LogSeries<Vector<I::Key>, 2> = LogSeries::zero();
    for comp in s.decompose_pair(x, y)? {
        let d = &comp.eigenvalue;
        let sign_d = if big == 0 { DualScalar::one() } else { sign_power(d)? };
        for j in 0..=j_max {
            let sign_j = if big == 0 { j } else { big_n + j };
            let sign = if sign_j.rem_euclid(2) == 0 { sign_d.clone() } else { -&sign_d };
            let binned = binom_op(big_n, j as u32, d, comp.nilpotent_order, &comp.vector, |v| s.nilpotent_apply(d, v));
            // z_big^{S}: z^{d} e^{ζ N}
            let mut cur = binned;
            let mut fact = DualScalar::one();
            for t in 0..comp.nilpotent_order.max(1) {
                if t > 0 {
                    cur = s.nilpotent_apply(d, &cur);
                    fact = &fact * &DualScalar::integer(t as i64);
                }
                if cur.is_zero() {
                    break;
                }
                let coef = &sign * &fact.inv()?;
                let big_alpha = &GaussScalar::integer(big_n - j) + d;
                let shift_re = floor(&big_alpha.re);
                for ((p, q), cpq) in cur.iter() {
                    // Y(q, z_small) c, then Y(p, z_big) on each coefficient.
                    let inner = y_action(inst, q, c, lo - j, hi - j)?;
                    for (imono, ivec) in inner.iter() {
                        let outer = y_action_state(inst, p, ivec, lo - shift_re - 1, hi - shift_re + 1)?;
                        for (omono, ovec) in outer.iter() {
                            let mut exps = [Exponent(GaussScalar::zero()), Exponent(GaussScalar::zero())];
                            let mut zetas = [0, 0];
                            exps[small] = Exponent(&imono.exps[0].0 + &GaussScalar::integer(j));
                            zetas[small] = imono.zetas[0];
                            exps[big] = Exponent(&omono.exps[0].0 + &big_alpha);
                            zetas[big] = omono.zetas[0] + t;
                            out.add_term(LogMonomial::new(exps, zetas), ovec.scaled(&(&coef * cpq)));
                        }
                    }
                }
            }
        }
    }
    Ok(out.restrict(lo, hi))
}

/// `Y(z₁)(I⊗Y(z₂)) ι_{z₁,z₂} z₁₂^{N+S}(a⊗b)⊗c − Y(z₂)(I⊗Y(z₁)) ι_{z₂,z₁} z₁₂^{N+S}(b⊗a)⊗c`
/// on the window `[lo, hi]` in both variables.
pub fn check_locality<I: LogVAInstance>(inst: &I, a: &I::Key, b: &I::Key, c: &I::Key, big_n: i64, lo: i64, hi: i64) -> Result<LogSeries<Vector<I::Key>, 2>, LogVAError> {
    let mut lhs = locality_side(inst, a, b, c, big_n, 0, lo, hi)?;
    lhs.sub_series(&locality_side(inst, b, a, c, big_n, 1, lo, hi)?);
    Ok(lhs)
}

/// Field expressions built from generators by `(n+Ŝ)`-th products.
#[derive(Clone, Debug)]
pub enum FieldExpr<K> {
    Identity,
    Field(K),
    Product(Box<FieldExpr<K>>, i64, Box<FieldExpr<K>>),
}

/// `Θ(expr) = expr(z)|0⟩|_{z=0}`. A product node is evaluated as the
/// `(−1)`-st mode of `Θ(A)_{(n+S)}Θ(B)` on the vacuum, through the mode
/// recursion of [`nth_product_modes`].
pub fn theta_reconstruct<I: LogVAInstance>(inst: &I, expr: &FieldExpr<I::Key>) -> Result<Vector<I::Key>, LogVAError> {
    match expr {
        FieldExpr::Identity => Ok(Vector::basis(inst.vacuum())),
        FieldExpr::Field(k) => Ok(Vector::basis(k.clone())),
        FieldExpr::Product(x, n, y) => {
            let a = theta_reconstruct(inst, x)?;
            let b = theta_reconstruct(inst, y)?;
            let vac = inst.vacuum();
            let mut out = Vector::zero();
            for (p, cp) in a.iter() {
                for (q, cq) in b.iter() {
                    let m = p.degree() + 1;
                    out.add_scaled(&nth_product_modes(inst, p, *n, q, -1, &vac, m)?, &(cp * cq));
                }
            }
            Ok(out)
        }
    }
}

/// Generalized vertex algebra data read off a diagonal braiding.
#[derive(Clone, Debug, Serialize)]
pub struct GVAData {
    pub labels: Vec<String>,
    /// Class index of every label.
    pub class_of: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
    /// `I_i + I_j`, when the defining index set is non-empty.
    pub sum: Vec<Vec<Option<usize>>>,
    /// `−I_i`, when non-empty.
    pub negative: Vec<Option<usize>>,
    /// `Δ(I_i, I_j) = s_ij mod Z`.
    pub delta: Vec<Vec<GaussScalar>>,
    pub eta: Vec<Vec<i64>>,
    /// Group-law combinations that had no representative.
    pub partial: Vec<String>,
}

fn is_integer(x: &GaussScalar) -> bool {
    x.as_integer().is_some()
}

/// Classes `I_i = {j | s_jl − s_il ∈ Z ∀l}`, the group law on them, `Δ` and `η ≡ 1`.
pub fn gva_extract(labels: &[String], s: &[Vec<GaussScalar>]) -> Result<GVAData, LogVAError> {
    let n = labels.len();
    for i in 0..n {
        for j in 0..n {
            if s[i][j] != s[j][i] {
                return Err(LogVAError::NonSymmetric(i, j));
            }
        }
    }
    let same = |i: usize, j: usize| (0..n).all(|l| is_integer(&(&s[j][l] - &s[i][l])));
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|j| same(i, *j)).collect();
        for j in &members {
            class_of[*j] = classes.len();
        }
        classes.push(members);
    }
    let rep = |c: usize| classes[c][0];
    // r I_i + t I_j = {k | s_kl − r s_il − t s_jl ∈ Z ∀l}
    let combine = |r: i64, i: usize, t: i64, j: usize| -> Option<usize> {
        (0..n)
            .find(|k| {
                (0..n).all(|l| {
                    let v = &(&s[*k][l] - &(&GaussScalar::integer(r) * &s[i][l])) - &(&GaussScalar::integer(t) * &s[j][l]);
                    is_integer(&v)
                })
            })
            .map(|k| class_of[k])
    };
    let nc = classes.len();
    let mut partial = Vec::new();
    let mut sum = vec![vec![None; nc]; nc];
    let mut delta = vec![vec![GaussScalar::zero(); nc]; nc];
    for ci in 0..nc {
        for cj in 0..nc {
            sum[ci][cj] = combine(1, rep(ci), 1, rep(cj));
            if sum[ci][cj].is_none() {
                partial.push(format!("I{ci} + I{cj}"));
            }
            delta[ci][cj] = s[rep(ci)][rep(cj)].mod_integers();
        }
    }
    let negative: Vec<Option<usize>> = (0..nc)
        .map(|ci| {
            let r = combine(-1, rep(ci), 0, rep(ci));
            if r.is_none() {
                partial.push(format!("-I{ci}"));
            }
            r
        })
        .collect();
    Ok(GVAData {
        labels: labels.to_vec(),
        class_of,
        classes,
        sum,
        negative,
        delta,
        eta: vec![vec![1; nc]; nc],
        partial,
    })
}

/// One line of a verification report.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub indices: Vec<String>,
    pub defect: Option<Value>,
}

impl CheckRecord {
    pub fn passed(&self) -> bool {
        self.defect.is_none()
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

fn record<T: Serialize>(check: &str, indices: Vec<String>, defect: Option<T>) -> CheckRecord {
    CheckRecord {
        check: check.into(),
        indices,
        defect: defect.map(|d| serde_json::to_value(d).unwrap_or(Value::Null)),
    }
}

fn error_record(check: &str, indices: Vec<String>, e: &LogVAError) -> CheckRecord {
    CheckRecord { check: check.into(), indices, defect: Some(Value::String(format!("error: {e}"))) }
}

/// Basis keys of degree at most `max_degree`.
pub fn basis_up_to<I: LogVAInstance>(inst: &I, max_degree: i64) -> Vec<I::Key> {
    (0..=max_degree).flat_map(|d| inst.basis(d)).collect()
}

fn nonzero<T: KeyFmt + Ord + Clone>(v: Vector<T>) -> Option<Vector<T>> {
    (!v.is_zero()).then_some(v)
}

fn nonzero_series<C: crate::logseries::Coeff, const N: usize>(s: LogSeries<C, N>) -> Option<LogSeries<C, N>> {
    (!s.is_zero()).then_some(s)
}

/// Borcherds sweep over generator pairs `(a, b)`, targets of degree `≤ degree`
/// and `m, n, k ∈ [−window, window]`.
pub fn sweep_borcherds<I: LogVAInstance>(inst: &I, degree: i64, window: i64) -> Vec<CheckRecord> {
    let gens = inst.generators();
    let targets = basis_up_to(inst, degree);
    let mut cases = Vec::new();
    for a in &gens {
        for b in &gens {
            for c in &targets {
                for m in -window..=window {
                    for n in -window..=window {
                        for k in -window..=window {
                            cases.push((a, b, c, m, n, k));
                        }
                    }
                }
            }
        }
    }
    cases
        .par_iter()
        .map(|(a, b, c, m, n, k)| {
            let idx = vec![a.to_string(), b.to_string(), c.to_string(), m.to_string(), n.to_string(), k.to_string()];
            match check_borcherds(inst, a, b, c, *m, *n, *k) {
                Ok(d) => record("borcherds", idx, nonzero(d)),
                Err(e) => error_record("borcherds", idx, &e),
            }
        })
        .collect()
}

/// Hexagon sweep: generators `a, b`, targets of degree `≤ degree`, `n ∈ [−window, window]`.
pub fn sweep_hexagon<I: LogVAInstance>(inst: &I, degree: i64, window: i64) -> Vec<CheckRecord> {
    let keys = basis_up_to(inst, degree);
    let gens = inst.generators();
    let mut cases = Vec::new();
    for a in gens.iter().chain(std::iter::once(&inst.vacuum())) {
        for b in &gens {
            for c in &keys {
                for n in -window..=window {
                    cases.push((a.clone(), b, c, n));
                }
            }
        }
    }
    cases
        .par_iter()
        .map(|(a, b, c, n)| {
            let idx = vec![a.to_string(), b.to_string(), c.to_string(), n.to_string()];
            match check_hexagon(inst, a, b, c, *n) {
                Ok(d) => record("hexagon", idx, nonzero(d)),
                Err(e) => error_record("hexagon", idx, &e),
            }
        })
        .collect()
}

/// Vacuum sweep over every basis key of degree `≤ degree`.
pub fn sweep_vacuum<I: LogVAInstance>(inst: &I, degree: i64, window: i64) -> Vec<CheckRecord> {
    basis_up_to(inst, degree)
        .par_iter()
        .map(|a| {
            let idx = vec![a.to_string()];
            match check_vacuum(inst, a, window) {
                Ok(d) => record("vacuum", idx, (!d.is_empty()).then_some(d)),
                Err(e) => error_record("vacuum", idx, &e),
            }
        })
        .collect()
}

/// Translation covariance for `a` a generator or the vacuum, and the declared
/// `T` against `a_{(−2+S)}|0⟩` on every basis key.
pub fn sweep_translation<I: LogVAInstance>(inst: &I, degree: i64, window: i64) -> Vec<CheckRecord> {
    let keys = basis_up_to(inst, degree);
    let mut sources = inst.generators();
    sources.push(inst.vacuum());
    let mut cases = Vec::new();
    for a in &sources {
        for b in &keys {
            if a.degree() + b.degree() <= degree + 1 {
                cases.push((a, b));
            }
        }
    }
    let mut out: Vec<CheckRecord> = cases
        .par_iter()
        .map(|(a, b)| {
            let idx = vec![a.to_string(), b.to_string()];
            match check_translation_covariance(inst, a, b, -window, window) {
                Ok(d) => record("translation", idx, nonzero_series(d).map(|s| s.render())),
                Err(e) => error_record("translation", idx, &e),
            }
        })
        .collect();
    out.extend(keys.par_iter().map(|a| {
        let idx = vec![a.to_string()];
        match translate(inst, a) {
            Ok(_) => record::<String>("translate", idx, None),
            Err(e) => error_record("translate", idx, &e),
        }
    }).collect::<Vec<_>>());
    out
}

/// Locality with exponent `N` for generator pairs on targets of degree `≤ degree`.
pub fn sweep_locality<I: LogVAInstance>(inst: &I, degree: i64, window: i64, big_n: i64) -> Vec<CheckRecord> {
    let gens = inst.generators();
    let targets = basis_up_to(inst, degree);
    let mut cases = Vec::new();
    for a in &gens {
        for b in &gens {
            for c in &targets {
                cases.push((a, b, c));
            }
        }
    }
    cases
        .par_iter()
        .map(|(a, b, c)| {
            let idx = vec![a.to_string(), b.to_string(), c.to_string(), big_n.to_string()];
            match check_locality(inst, a, b, c, big_n, -window, window) {
                Ok(d) => record("locality", idx, nonzero_series(d).map(|s| s.render())),
                Err(e) => error_record("locality", idx, &e),
            }
        })
        .collect()
}

/// The `(n+S)`-th product identity: modes of `a_{(n+S)}b` obtained by the
/// Borcherds recursion (at several choices of `m`) against the products of the
/// state `μ_n(a⊗b)`, for generator pairs, `|n| ≤ window`, targets of degree
/// `≤ degree` and every nonvanishing mode `K ≥ −window − 1`.
pub fn sweep_nth_product<I: LogVAInstance>(inst: &I, degree: i64, window: i64) -> Vec<CheckRecord> {
    let gens = inst.generators();
    let targets = basis_up_to(inst, degree);
    let mut cases = Vec::new();
    for a in &gens {
        for b in &gens {
            for c in &targets {
                for n in -window..=window {
                    cases.push((a, b, c, n));
                }
            }
        }
    }
    cases
        .par_iter()
        .flat_map(|(a, b, c, n)| {
            let state = match mu(inst, &Vector::basis((*a).clone()), *n, &Vector::basis((*b).clone())) {
                Ok(s) => s,
                Err(e) => return vec![error_record("nth-product", vec![a.to_string(), b.to_string(), n.to_string()], &e)],
            };
            let top = a.degree() + b.degree() - n - 1 + c.degree();
            let mut recs = Vec::new();
            let mut solvers: Vec<(i64, NthProduct<I>)> =
                [a.degree() + c.degree(), 0, -1 - window].into_iter().map(|m| (m, NthProduct::new(inst, m))).collect();
            for big_k in (-window - 1)..top.max(-window - 1) {
                let direct = match mu(inst, &state, big_k, &Vector::basis((*c).clone())) {
                    Ok(v) => v,
                    Err(e) => {
                        recs.push(error_record("nth-product", vec![a.to_string(), b.to_string(), n.to_string()], &e));
                        continue;
                    }
                };
                for (m, solver) in solvers.iter_mut() {
                    let idx = vec![a.to_string(), b.to_string(), c.to_string(), n.to_string(), big_k.to_string(), format!("m={m}")];
                    match solver.eval(a, *n, b, big_k, c) {
                        Ok(v) => recs.push(record("nth-product", idx, nonzero(v.difference(&direct)))),
                        Err(e) => recs.push(error_record("nth-product", idx, &e)),
                    }
                }
            }
            recs
        })
        .collect()
}

/// Counts of passed and failed records per check name.
pub fn summarize(records: &[CheckRecord]) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = out.entry(r.check.clone()).or_default();
        if r.passed() {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commutative::{Commutative, DiffMonomial};
    use crate::nls::{NLSMonomial, NlsInstance};
    use crate::scalar::binomial;
    use proptest::prelude::*;

    fn m(s: &str) -> NLSMonomial {
        s.parse().unwrap()
    }

    fn g(n: i64) -> GaussScalar {
        GaussScalar::integer(n)
    }

    type P = Vector<(u8, u8)>;

    fn p(c: i64) -> P {
        Vector::term((0, 1), DualScalar::integer(c))
    }

    // A nilpotent shift (0,1) ↦ (1,1) ↦ 0.
    fn shift(v: &P) -> P {
        v.iter().filter(|((a, _), _)| *a == 0).map(|((_, b), c)| ((1, *b), c.clone())).collect()
    }

    #[test]
    fn binom_op_examples() {
        let v = p(1);
        assert_eq!(binom_op(5, 0, &g(3), 1, &v, |x| x.clone()), v);
        assert_eq!(binom_op(0, 2, &g(-1), 1, &v, |_| P::zero()), v);
        let got = binom_op(0, 1, &g(0), 2, &v, shift);
        assert_eq!(got, Vector::basis((1, 1)));
    }

    #[test]
    fn vacuum_field_is_identity() {
        let inst = NlsInstance::new(false);
        let b = m("w[-2] wb[-1] |0>");
        let y = y_action(&inst, &inst.vacuum(), &b, -5, 5).unwrap();
        assert_eq!(y, LogSeries::single(Exponent::integer(0), 0, Vector::basis(b)));
    }

    #[test]
    fn creation_property() {
        let inst = NlsInstance::new(true);
        for a in basis_up_to(&inst, 3) {
            let y = y_action(&inst, &a, &inst.vacuum(), -4, 0).unwrap();
            assert_eq!(y.restrict(0, 0), LogSeries::single(Exponent::integer(0), 0, Vector::basis(a.clone())));
            assert!(y.restrict(-4, -1).is_zero());
        }
    }

    #[test]
    fn nls_field_exponents_follow_charge() {
        let inst = NlsInstance::new(false);
        let (a, b) = (m("w[-1] |0>"), m("wb[-1] |0>"));
        let y = y_action(&inst, &a, &b, -6, 6).unwrap();
        assert!(!y.is_zero());
        for (mono, v) in y.iter() {
            let e = mono.exps[0].0.as_integer().expect("integer exponent");
            assert_eq!(mono.zetas[0], 0);
            let n = -e - 2;
            assert_eq!(*v, inst.mode(&a, n, &b).unwrap());
        }
    }

    #[test]
    fn braiding_dichotomy() {
        let plain = NlsInstance::new(false);
        let dual = NlsInstance::new(true);
        let keys = basis_up_to(&plain, 2);
        for a in &plain.generators() {
            for b in &keys {
                let y = y_action(&plain, a, b, -4, 4).unwrap();
                assert_eq!(y.max_zeta(0), 0);
            }
        }
        let mut saw_zeta = false;
        for a in &dual.generators() {
            for b in &basis_up_to(&dual, 2) {
                for (mono, v) in y_action(&dual, a, b, -4, 4).unwrap().iter() {
                    assert!(mono.exps[0].is_integer());
                    if mono.zetas[0] > 0 {
                        saw_zeta = true;
                        assert!(v.iter().all(|(_, c)| c.value.is_zero()));
                    }
                }
            }
        }
        assert!(saw_zeta);
    }

    #[test]
    fn translate_examples() {
        let inst = NlsInstance::new(false);
        assert!(translate(&inst, &inst.vacuum()).unwrap().is_zero());
        assert_eq!(translate(&inst, &m("w[-1] |0>")).unwrap(), Vector::basis(m("w[-2] |0>")));
        let c = Commutative::new(1);
        let x = DiffMonomial::variable(0);
        assert_eq!(translate(&c, &x).unwrap(), Vector::basis(DiffMonomial::new(vec![(0, 1)])));
    }

    #[test]
    fn vacuum_covariance_is_trivial() {
        let inst = NlsInstance::new(true);
        for b in basis_up_to(&inst, 3) {
            assert!(check_translation_covariance(&inst, &inst.vacuum(), &b, -3, 3).unwrap().is_zero());
        }
    }

    #[test]
    fn nth_product_of_vacuum_recovers_modes() {
        let inst = NlsInstance::new(false);
        let a = m("w[-1] |0>");
        let vac = inst.vacuum();
        for c in basis_up_to(&inst, 2) {
            for k in -3..3 {
                let direct = inst.mode(&a, k, &c).unwrap();
                for mm in [-2, 0, 3] {
                    assert_eq!(nth_product_modes(&inst, &a, -1, &vac, k, &c, mm).unwrap(), direct);
                }
            }
        }
    }

    #[test]
    fn derivative_state_has_derivative_field() {
        for deformed in [false, true] {
            let inst = NlsInstance::new(deformed);
            let (w1, w2, b) = (m("w[-1] |0>"), m("w[-2] |0>"), m("wb[-1] |0>"));
            let lhs = y_action(&inst, &w2, &b, -4, 4).unwrap();
            let rhs = y_action(&inst, &w1, &b, -4, 5).unwrap().dz_total(0).restrict(-4, 4);
            assert_eq!(lhs, rhs);
            for k in -3..2 {
                let via = nth_product_modes(&inst, &w1, -2, &inst.vacuum(), k, &b, 2).unwrap();
                assert_eq!(via, inst.mode(&w2, k, &b).unwrap());
            }
        }
    }

    #[test]
    fn borcherds_reproduces_first_relation() {
        let inst = NlsInstance::new(false);
        let w = m("w[-1] |0>");
        for mm in -3..=3 {
            for k in -3..=3 {
                assert!(check_borcherds(&inst, &w, &w, &inst.vacuum(), mm, 0, k).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn deformed_mixed_borcherds() {
        let inst = NlsInstance::new(true);
        let (w, wb) = (m("w[-1] |0>"), m("wb[-1] |0>"));
        for mm in -2..=2 {
            for n in -2..=2 {
                for k in -2..=2 {
                    let d = check_borcherds(&inst, &w, &wb, &w, mm, n, k).unwrap();
                    assert!(d.is_zero(), "({mm},{n},{k}): {d}");
                }
            }
        }
    }

    #[test]
    fn printed_mixed_relation_breaks_borcherds() {
        let inst = NlsInstance::deformed_printed();
        let (w, wb) = (m("w[-1] |0>"), m("wb[-1] |0>"));
        let d = check_borcherds(&inst, &wb, &w, &inst.vacuum(), -1, -1, -1).unwrap();
        let mut expected = Vector::zero();
        expected.add_term(m("w[-2] wb[-1] |0>"), DualScalar::rational(1, 2).times_epsilon());
        assert_eq!(d, expected);
    }

    #[test]
    fn commutative_borcherds() {
        let c = Commutative::new(2);
        let keys = basis_up_to(&c, 2);
        for a in &keys {
            for b in &keys {
                for x in &keys {
                    assert!(check_borcherds(&c, a, b, x, -1, -2, 0).unwrap().is_zero());
                }
            }
        }
    }

    #[test]
    fn locality_of_vacuum() {
        let inst = NlsInstance::new(false);
        let vac = inst.vacuum();
        for c in basis_up_to(&inst, 2) {
            assert!(check_locality(&inst, &vac, &vac, &c, 0, -3, 3).unwrap().is_zero());
        }
    }

    #[test]
    fn locality_at_zero_order() {
        let inst = NlsInstance::new(false);
        let w = m("w[-1] |0>");
        assert!(check_locality(&inst, &w, &w, &inst.vacuum(), 0, -3, 3).unwrap().is_zero());
        let c = Commutative::new(1);
        let x = DiffMonomial::variable(0);
        assert!(check_locality(&c, &x, &x, &c.vacuum(), 0, -3, 3).unwrap().is_zero());
    }

    #[test]
    fn theta_examples() {
        let inst = NlsInstance::new(true);
        assert_eq!(theta_reconstruct(&inst, &FieldExpr::Identity).unwrap(), Vector::basis(inst.vacuum()));
        let w = FieldExpr::Field(m("w[-1] |0>"));
        let wb = FieldExpr::Field(m("wb[-1] |0>"));
        assert_eq!(theta_reconstruct(&inst, &w).unwrap(), Vector::basis(m("w[-1] |0>")));
        for n in -3..=1 {
            let e = FieldExpr::Product(Box::new(w.clone()), n, Box::new(wb.clone()));
            let expected = inst.mode(&m("w[-1] |0>"), n, &m("wb[-1] |0>")).unwrap();
            assert_eq!(theta_reconstruct(&inst, &e).unwrap(), expected);
        }
        let nested = FieldExpr::Product(
            Box::new(wb.clone()),
            -1,
            Box::new(FieldExpr::Product(Box::new(w.clone()), -2, Box::new(wb))),
        );
        let inner = inst.mode(&m("w[-1] |0>"), -2, &m("wb[-1] |0>")).unwrap();
        let expected = mu(&inst, &Vector::basis(m("wb[-1] |0>")), -1, &inner).unwrap();
        assert_eq!(theta_reconstruct(&inst, &nested).unwrap(), expected);
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i}")).collect()
    }

    fn rat(num: i64, den: i64) -> GaussScalar {
        GaussScalar::rational(Rational::new(num, den))
    }

    #[test]
    fn gva_examples() {
        let nls = vec![vec![g(-1), g(1)], vec![g(1), g(-1)]];
        let d = gva_extract(&labels(2), &nls).unwrap();
        assert_eq!(d.classes, vec![vec![0, 1]]);
        assert_eq!(d.delta, vec![vec![g(0)]]);
        assert_eq!(d.sum, vec![vec![Some(0)]]);
        assert_eq!(d.eta, vec![vec![1]]);
        let half = vec![vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]];
        let d = gva_extract(&labels(2), &half).unwrap();
        assert_eq!(d.classes.len(), 1);
        assert_eq!(d.delta, vec![vec![rat(1, 2)]]);
        // I_0 + I_0 would need a row ≡ 0 mod Z; the law is reported partial.
        assert_eq!(d.partial, vec!["I0 + I0".to_string()]);
        let bad = vec![vec![g(0), g(1)], vec![g(0), g(0)]];
        assert_eq!(gva_extract(&labels(2), &bad).unwrap_err(), LogVAError::NonSymmetric(0, 1));
    }

    #[test]
    fn gva_reports_partial_group_law() {
        // Classes of s = diag(1/3, 0): I_0 + I_0 would need a row ≡ 2/3.
        let s = vec![vec![rat(1, 3), g(0)], vec![g(0), g(0)]];
        let d = gva_extract(&labels(2), &s).unwrap();
        assert_eq!(d.classes.len(), 2);
        assert!(!d.partial.is_empty());
    }

    #[test]
    fn record_json_shape() {
        let r = record::<String>("vacuum", vec!["|0>".into()], None);
        assert_eq!(r.json_line(), r#"{"check":"vacuum","indices":["|0>"],"defect":null}"#);
    }

    fn small_rat() -> impl Strategy<Value = Rational> {
        (-6i64..7, 1i64..5).prop_map(|(a, b)| Rational::new(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn binom_op_without_nilpotent_is_scalar(n in -5i64..6, j in 0u32..6, d in small_rat()) {
            let v = p(1);
            let dd = GaussScalar::rational(d);
            let got = binom_op(n, j, &dd, 1, &v, |_| P::zero());
            let c = binomial(&(&DualScalar::integer(n) + &DualScalar::from_gauss(dd)), j);
            prop_assert_eq!(got, v.scaled(&c));
        }

        #[test]
        fn binom_op_pascal(n in -5i64..6, j in 0u32..6, d in -3i64..4) {
            let v = p(1);
            let f = |nn: i64, jj: u32| binom_op(nn, jj, &g(d), 2, &v, shift);
            let lhs = f(n + 1, j + 1);
            let rhs = f(n, j + 1).sum(&f(n, j));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn gva_delta_symmetric_and_additive(entries in prop::collection::vec((-4i64..5, 1i64..4), 6)) {
            let e: Vec<GaussScalar> = entries.iter().map(|(a, b)| rat(*a, *b)).collect();
            let s = vec![
                vec![e[0].clone(), e[1].clone(), e[2].clone()],
                vec![e[1].clone(), e[3].clone(), e[4].clone()],
                vec![e[2].clone(), e[4].clone(), e[5].clone()],
            ];
            let d = gva_extract(&labels(3), &s).unwrap();
            let nc = d.classes.len();
            for i in 0..nc {
                for j in 0..nc {
                    prop_assert_eq!(&d.delta[i][j], &d.delta[j][i]);
                    if let Some(k) = d.sum[i][j] {
                        for l in 0..nc {
                            let lhs = d.delta[k][l].clone();
                            let rhs = (&d.delta[i][l] + &d.delta[j][l]).mod_integers();
                            prop_assert_eq!(lhs, rhs);
                        }
                    }
                }
            }
        }
    }
}
