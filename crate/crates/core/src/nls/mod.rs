//! The non-linear Schrödinger algebra and its `ε`-deformation.
//!
//! States are combinations of normal-ordered monomials
//! `g¹_{n₁} ⋯ gʳ_{n_r} |0⟩` with `n₁ ≤ ⋯ ≤ n_r ≤ −1` and `w` before `w̄`
//! at equal modes. In the undeformed algebra a letter never repeats at the
//! same mode (such squares straighten to other monomials); in the deformed
//! algebra repeats are allowed.
//!
//! Mode operators act by straightening: an out-of-order product `g_n h_k` is
//! rewritten with the defining relation whose leading term it is.

mod instance;
pub mod oracle;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use serde::Serialize;
use thiserror::Error;

use crate::braiding::GradedKey;
use crate::scalar::{binomial, DualScalar, GaussScalar};
use crate::state::Vector;

pub use instance::NlsInstance;
pub use oracle::Oracle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NlsError {
    #[error("straightening budget exceeded at {witness}")]
    RecursionBudgetExceeded { witness: String },
    #[error("relation {0} has a non-unit leading coefficient")]
    NonUnitLead(String),
    #[error("cannot parse {0:?}")]
    Parse(String),
    #[error("degree {0} lies outside the oracle range")]
    OutOfRange(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Letter {
    W,
    Wb,
}

impl Letter {
    pub const ALL: [Letter; 2] = [Letter::W, Letter::Wb];

    pub fn charge(self) -> i64 {
        match self {
            Letter::W => 1,
            Letter::Wb => -1,
        }
    }

    pub fn other(self) -> Letter {
        match self {
            Letter::W => Letter::Wb,
            Letter::Wb => Letter::W,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::W => "w",
            Letter::Wb => "wb",
        })
    }
}

impl FromStr for Letter {
    type Err = NlsError;
    fn from_str(s: &str) -> Result<Self, NlsError> {
        match s {
            "w" => Ok(Letter::W),
            "wb" | "w̄" => Ok(Letter::Wb),
            _ => Err(NlsError::Parse(s.to_string())),
        }
    }
}

/// A word of mode operators applied to the vacuum, leftmost factor first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NLSMonomial {
    factors: Vec<(Letter, i64)>,
}

impl NLSMonomial {
    pub fn vacuum() -> Self {
        NLSMonomial { factors: Vec::new() }
    }

    pub fn new(factors: Vec<(Letter, i64)>) -> Self {
        NLSMonomial { factors }
    }

    pub fn generator(g: Letter) -> Self {
        NLSMonomial { factors: vec![(g, -1)] }
    }

    pub fn factors(&self) -> &[(Letter, i64)] {
        &self.factors
    }

    pub fn is_vacuum(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.factors.iter().map(|(_, n)| -n).sum()
    }

    pub fn charge(&self) -> i64 {
        self.factors.iter().map(|(g, _)| g.charge()).sum()
    }

    pub fn first(&self) -> Option<(Letter, i64)> {
        self.factors.first().copied()
    }

    pub fn tail(&self) -> NLSMonomial {
        NLSMonomial { factors: self.factors.get(1..).unwrap_or_default().to_vec() }
    }

    pub fn prepend(&self, g: Letter, n: i64) -> NLSMonomial {
        let mut factors = Vec::with_capacity(self.factors.len() + 1);
        factors.push((g, n));
        factors.extend_from_slice(&self.factors);
        NLSMonomial { factors }
    }

    pub fn is_normal(&self, deformed: bool) -> bool {
        self.factors.iter().all(|(_, n)| *n <= -1)
            && self
                .factors
                .windows(2)
                .all(|p| in_order(p[0].0, p[0].1, p[1].0, p[1].1, deformed))
    }
}

/// Whether `g_n h_k` (with `n ≤ −1`) is already normal ordered.
fn in_order(g: Letter, n: i64, h: Letter, k: i64, deformed: bool) -> bool {
    match n.cmp(&k) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => (g == Letter::W && h == Letter::Wb) || (deformed && g == h),
    }
}

impl Ord for NLSMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.charge().cmp(&other.charge()))
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

impl PartialOrd for NLSMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NLSMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, n) in &self.factors {
            write!(f, "{g}[{n}] ")?;
        }
        f.write_str("|0>")
    }
}

impl fmt::Debug for NLSMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for NLSMonomial {
    type Err = NlsError;

    /// Parses `w[-2] wb[-1] |0>`; the trailing `|0>` is optional.
    fn from_str(s: &str) -> Result<Self, NlsError> {
        let mut factors = Vec::new();
        for tok in s.split_whitespace() {
            if tok == "|0>" {
                continue;
            }
            let err = || NlsError::Parse(tok.to_string());
            let (name, rest) = tok.split_once('[').ok_or_else(err)?;
            let mode = rest.strip_suffix(']').ok_or_else(err)?;
            factors.push((name.parse()?, mode.parse().map_err(|_| err())?));
        }
        Ok(NLSMonomial { factors })
    }
}

impl GradedKey for NLSMonomial {
    fn degree(&self) -> i64 {
        NLSMonomial::degree(self)
    }
    fn charge(&self) -> i64 {
        NLSMonomial::charge(self)
    }
}

pub type NLSState = Vector<NLSMonomial>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RelationKind {
    WW,
    WbWb,
    WWb,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelTerm {
    pub coeff: DualScalar,
    pub left: (Letter, i64),
    pub right: (Letter, i64),
}

/// Form of the deformed mixed `w w̄` relation.
///
/// `Printed` is the four-term relation `w_m w̄_k − ε w_{m−1}w̄_{k+1} − w̄_k w_m + ε w̄_{k−1}w_{m+1}`.
/// `Series` is `Σ_j (−1)^j binom(ε, j)(w_{m−j}w̄_{k+j} − w̄_{k−j}w_{m+j})`, the
/// relation forced by the Borcherds identity for `S = εΦ⊗Φ`; the two agree
/// through `j = 1`. Only `Series` yields a braided logVA.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum MixedRelation {
    #[default]
    Series,
    Printed,
}

/// One instance `(m, k)` of a defining relation, as a list of quadratic words.
#[derive(Clone, Debug, Serialize)]
pub struct RelationInstance {
    pub kind: RelationKind,
    pub m: i64,
    pub k: i64,
    pub deformed: bool,
    pub terms: Vec<RelTerm>,
}

impl RelationInstance {
    /// Instantiate with the `j`-sums cut at `jmax`.
    pub fn new(kind: RelationKind, m: i64, k: i64, deformed: bool, jmax: i64) -> Self {
        Self::with_mixed(kind, m, k, deformed, MixedRelation::Series, jmax)
    }

    pub fn with_mixed(kind: RelationKind, m: i64, k: i64, deformed: bool, mixed: MixedRelation, jmax: i64) -> Self {
        let mut acc: BTreeMap<((Letter, i64), (Letter, i64)), DualScalar> = BTreeMap::new();
        let mut add = |c: DualScalar, l: (Letter, i64), r: (Letter, i64)| {
            let e = acc.entry((l, r)).or_default();
            *e += &c;
        };
        match kind {
            RelationKind::WW | RelationKind::WbWb => {
                let g = if kind == RelationKind::WW { Letter::W } else { Letter::Wb };
                for j in 0..=jmax.max(0) {
                    let c = if deformed {
                        let sign = if j % 2 == 0 { DualScalar::one() } else { DualScalar::integer(-1) };
                        &sign * &binomial(&-DualScalar::epsilon(), j as u32)
                    } else {
                        DualScalar::one()
                    };
                    let second = if deformed { -&c } else { c.clone() };
                    add(c, (g, m - j), (g, k + j));
                    add(second, (g, k - j), (g, m + j));
                }
            }
            RelationKind::WWb if deformed && mixed == MixedRelation::Series => {
                for j in 0..=jmax.max(0) {
                    let sign = if j % 2 == 0 { DualScalar::one() } else { DualScalar::integer(-1) };
                    let c = &sign * &binomial(&DualScalar::epsilon(), j as u32);
                    add(c.clone(), (Letter::W, m - j), (Letter::Wb, k + j));
                    add(-&c, (Letter::Wb, k - j), (Letter::W, m + j));
                }
            }
            RelationKind::WWb => {
                let (e, s) = if deformed {
                    (DualScalar::epsilon(), DualScalar::integer(-1))
                } else {
                    (DualScalar::one(), DualScalar::one())
                };
                add(DualScalar::one(), (Letter::W, m), (Letter::Wb, k));
                add(-&e, (Letter::W, m - 1), (Letter::Wb, k + 1));
                add(s.clone(), (Letter::Wb, k), (Letter::W, m));
                add(-&(&s * &e), (Letter::Wb, k - 1), (Letter::W, m + 1));
            }
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((left, right), coeff)| RelTerm { coeff, left, right })
            .collect();
        RelationInstance { kind, m, k, deformed, terms }
    }

    /// The relation whose leading word is `g_n h_a`, summed far enough to be
    /// exact on targets of degree `target_degree`.
    pub fn for_leading(
        g: Letter,
        n: i64,
        h: Letter,
        a: i64,
        deformed: bool,
        mixed: MixedRelation,
        target_degree: i64,
    ) -> Self {
        let (kind, m, k) = match (g, h) {
            (Letter::W, Letter::W) => (RelationKind::WW, n, a),
            (Letter::Wb, Letter::Wb) => (RelationKind::WbWb, n, a),
            (Letter::W, Letter::Wb) => (RelationKind::WWb, n, a),
            (Letter::Wb, Letter::W) => (RelationKind::WWb, a, n),
        };
        Self::with_mixed(kind, m, k, deformed, mixed, target_degree - m.min(k))
    }

    pub fn coefficient_of(&self, left: (Letter, i64), right: (Letter, i64)) -> DualScalar {
        self.terms
            .iter()
            .find(|t| t.left == left && t.right == right)
            .map(|t| t.coeff.clone())
            .unwrap_or_default()
    }

    /// Solve for `left·right`: returns the terms `c·x_p y_q` of its expansion.
    pub fn solve_for(&self, left: (Letter, i64), right: (Letter, i64)) -> Result<Vec<RelTerm>, NlsError> {
        let lead = self.coefficient_of(left, right);
        let inv = lead
            .inv()
            .map_err(|_| NlsError::NonUnitLead(format!("{:?}({}, {})", self.kind, self.m, self.k)))?;
        let factor = -&inv;
        Ok(self
            .terms
            .iter()
            .filter(|t| !(t.left == left && t.right == right))
            .map(|t| RelTerm { coeff: &t.coeff * &factor, left: t.left, right: t.right })
            .collect())
    }
}

/// All normal monomials of a given degree, optionally of a fixed charge.
pub fn enumerate_basis(degree: i64, charge: Option<i64>, deformed: bool) -> Vec<NLSMonomial> {
    fn go(
        remaining: i64,
        min_atom: (i64, Letter),
        strict: bool,
        prefix: &mut Vec<(Letter, i64)>,
        out: &mut Vec<NLSMonomial>,
    ) {
        if remaining == 0 {
            out.push(NLSMonomial::new(prefix.clone()));
            return;
        }
        for n in (-remaining)..=-1 {
            for g in Letter::ALL {
                let atom = (n, g);
                let ok = if strict { atom > min_atom } else { atom >= min_atom };
                if !ok {
                    continue;
                }
                prefix.push((g, n));
                go(remaining + n, atom, strict, prefix, out);
                prefix.pop();
            }
        }
    }
    if degree < 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let start = (i64::MIN, Letter::W);
    go(degree, start, !deformed, &mut Vec::new(), &mut out);
    if let Some(c) = charge {
        out.retain(|m| m.charge() == c);
    }
    out.sort();
    out
}

type MemoKey = (Letter, i64, NLSMonomial);

const DEFAULT_BUDGET: u64 = 50_000_000;

/// The mode algebra acting on its vacuum module.
pub struct Nls {
    deformed: bool,
    mixed: MixedRelation,
    budget: u64,
    memo: RwLock<HashMap<MemoKey, NLSState>>,
}

impl fmt::Debug for Nls {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nls(deformed={}, {:?})", self.deformed, self.mixed)
    }
}

impl Nls {
    pub fn new(deformed: bool) -> Self {
        Nls { deformed, mixed: MixedRelation::Series, budget: DEFAULT_BUDGET, memo: RwLock::new(HashMap::new()) }
    }

    /// Select the deformed mixed relation; irrelevant when undeformed.
    pub fn with_mixed(mut self, mixed: MixedRelation) -> Self {
        self.mixed = mixed;
        self
    }

    pub fn mixed(&self) -> MixedRelation {
        self.mixed
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn deformed(&self) -> bool {
        self.deformed
    }

    pub fn basis(&self, degree: i64, charge: Option<i64>) -> Vec<NLSMonomial> {
        enumerate_basis(degree, charge, self.deformed)
    }

    /// `g_n v`.
    pub fn act(&self, g: Letter, n: i64, v: &NLSState) -> Result<NLSState, NlsError> {
        let mut budget = self.budget;
        self.act_state(g, n, v, &mut budget)
    }

    pub fn act_monomial(&self, g: Letter, n: i64, m: &NLSMonomial) -> Result<NLSState, NlsError> {
        let mut budget = self.budget;
        self.act_inner(g, n, m, &mut budget)
    }

    /// Apply a word of mode operators (leftmost acts last) to the vacuum.
    pub fn word(&self, factors: &[(Letter, i64)]) -> Result<NLSState, NlsError> {
        let mut v = NLSState::basis(NLSMonomial::vacuum());
        for (g, n) in factors.iter().rev() {
            v = self.act(*g, *n, &v)?;
        }
        Ok(v)
    }

    fn act_state(&self, g: Letter, n: i64, v: &NLSState, budget: &mut u64) -> Result<NLSState, NlsError> {
        let mut out = NLSState::zero();
        for (m, c) in v.iter() {
            out.add_scaled(&self.act_inner(g, n, m, budget)?, c);
        }
        Ok(out)
    }

    fn act_inner(&self, g: Letter, n: i64, m: &NLSMonomial, budget: &mut u64) -> Result<NLSState, NlsError> {
        if n > m.degree() {
            return Ok(NLSState::zero());
        }
        let Some((h, k)) = m.first() else {
            return Ok(if n <= -1 {
                NLSState::basis(NLSMonomial::generator(g).with_mode(n))
            } else {
                NLSState::zero()
            });
        };
        if n <= -1 && in_order(g, n, h, k, self.deformed) {
            return Ok(NLSState::basis(m.prepend(g, n)));
        }
        let key = (g, n, m.clone());
        if let Some(v) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(v.clone());
        }
        if *budget == 0 {
            return Err(NlsError::RecursionBudgetExceeded { witness: format!("{g}[{n}] {m}") });
        }
        *budget -= 1;
        let rest = m.tail();
        let rel = RelationInstance::for_leading(g, n, h, k, self.deformed, self.mixed, rest.degree());
        let mut out = NLSState::zero();
        for t in rel.solve_for((g, n), (h, k))? {
            let inner = self.act_inner(t.right.0, t.right.1, &rest, budget)?;
            if inner.is_zero() {
                continue;
            }
            let outer = self.act_state(t.left.0, t.left.1, &inner, budget)?;
            out.add_scaled(&outer, &t.coeff);
        }
        self.memo.write().expect("memo lock").insert(key, out.clone());
        Ok(out)
    }

    /// `Φ v`: multiplication by `i·charge`.
    pub fn phi_act(&self, v: &NLSState) -> NLSState {
        v.map_linear(|m| NLSState::term(m.clone(), DualScalar::from_gauss(&GaussScalar::i() * &GaussScalar::integer(m.charge()))))
    }

    /// `T v` from `T|0⟩ = 0` and `[T, g_n] = −n g_{n−1} ∓ i c g_{n−1}Φ`,
    /// with `c = 1` undeformed and `c = ε` deformed.
    pub fn t_act(&self, v: &NLSState) -> Result<NLSState, NlsError> {
        v.try_map_linear(|m| self.t_monomial(m))
    }

    fn t_monomial(&self, m: &NLSMonomial) -> Result<NLSState, NlsError> {
        let Some((g, n)) = m.first() else {
            return Ok(NLSState::zero());
        };
        let rest = m.tail();
        let t_rest = self.t_monomial(&rest)?;
        let mut out = self.act(g, n, &t_rest)?;
        let c = if self.deformed { DualScalar::epsilon() } else { DualScalar::one() };
        // −i c g_{n−1} Φ on charge q gives c q for w and −c q for w̄.
        let coeff = &DualScalar::integer(-n) + &(&c * &DualScalar::integer(g.charge() * rest.charge()));
        out.add_scaled(&self.act(g, n - 1, &NLSState::basis(rest))?, &coeff);
        Ok(out)
    }

    /// Evaluate a relation instance on `v`; zero when the relation holds there.
    pub fn evaluate_relation(&self, rel: &RelationInstance, v: &NLSState) -> Result<NLSState, NlsError> {
        let mut out = NLSState::zero();
        for t in &rel.terms {
            let inner = self.act(t.right.0, t.right.1, v)?;
            out.add_scaled(&self.act(t.left.0, t.left.1, &inner)?, &t.coeff);
        }
        Ok(out)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().expect("memo lock").len()
    }
}

impl NLSMonomial {
    fn with_mode(mut self, n: i64) -> Self {
        if let Some(f) = self.factors.first_mut() {
            f.1 = n;
        }
        self
    }
}
