//! The NLS algebra as a [`LogVAInstance`].
//!
//! Products `μ_K(a⊗c)` are computed from mode actions alone: for `a = g_p a′`
//! the Borcherds identity for `(g, a′, c)` at `m = deg c + 1` has no second
//! term and expresses `μ_K(a⊗c)` through products with shorter first factors.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::braiding::{BraidingMap, EndoMap, GradingShift};
use crate::logva::{LogVAError, LogVAInstance};
use crate::scalar::{binomial, DualScalar, GaussScalar};

use super::{Letter, MixedRelation, NLSMonomial, NLSState, Nls};

type ProductKey = (NLSMonomial, i64, NLSMonomial);

pub struct NlsInstance {
    nls: Arc<Nls>,
    name: String,
    translation: EndoMap<NLSMonomial>,
    braiding: BraidingMap<NLSMonomial>,
    memo: RwLock<HashMap<ProductKey, NLSState>>,
}

impl std::fmt::Debug for NlsInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NlsInstance({})", self.name)
    }
}

fn phi() -> EndoMap<NLSMonomial> {
    EndoMap::diagonal("Phi", |m: &NLSMonomial| {
        DualScalar::from_gauss(&GaussScalar::i() * &GaussScalar::integer(m.charge()))
    })
}

impl NlsInstance {
    pub fn new(deformed: bool) -> Self {
        Self::from_nls(Nls::new(deformed))
    }

    /// The deformed instance with the printed four-term mixed relation.
    pub fn deformed_printed() -> Self {
        Self::from_nls(Nls::new(true).with_mixed(MixedRelation::Printed))
    }

    pub fn from_nls(nls: Nls) -> Self {
        let deformed = nls.deformed();
        let mixed = nls.mixed();
        let nls = Arc::new(nls);
        let t_nls = nls.clone();
        let translation = EndoMap::new("T", GradingShift { degree: 1, charge: 0 }, move |m: &NLSMonomial| {
            t_nls.t_act(&NLSState::basis(m.clone())).expect("translation within budget")
        });
        let braiding = if deformed {
            BraidingMap::new(vec![(phi().scaled(DualScalar::epsilon()), phi())], true)
        } else {
            BraidingMap::new(vec![(phi(), phi())], false)
        };
        NlsInstance {
            nls,
            name: match (deformed, mixed) {
                (false, _) => "nls".into(),
                (true, MixedRelation::Series) => "nls-eps".into(),
                (true, MixedRelation::Printed) => "nls-eps-printed".into(),
            },
            translation,
            braiding,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn nls(&self) -> &Nls {
        &self.nls
    }

    /// `S` on `a⊗b` for Φ-eigenvectors: `−q_a q_b`, times `ε` when deformed.
    fn s_value(&self, a_charge: i64, b_charge: i64) -> DualScalar {
        let v = DualScalar::integer(-a_charge * b_charge);
        if self.nls.deformed() {
            v.times_epsilon()
        } else {
            v
        }
    }

    fn product(&self, a: &NLSMonomial, big_k: i64, c: &NLSMonomial) -> Result<NLSState, LogVAError> {
        if big_k >= a.degree() + c.degree() {
            return Ok(NLSState::zero());
        }
        let Some((g, p)) = a.first() else {
            return Ok(if big_k == -1 { NLSState::basis(c.clone()) } else { NLSState::zero() });
        };
        let rest = a.tail();
        if rest.is_vacuum() && p == -1 {
            return Ok(self.nls.act_monomial(g, big_k, c)?);
        }
        let key = (a.clone(), big_k, c.clone());
        if let Some(v) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(v.clone());
        }
        let m = c.degree() + 1;
        let k = big_k - m;
        let s12 = self.s_value(g.charge(), rest.charge());
        let s13 = self.s_value(g.charge(), c.charge());
        let mut out = NLSState::zero();
        for j in 0..(rest.degree() + c.degree() - k).max(0) {
            let inner = self.product(&rest, k + j, c)?;
            if inner.is_zero() {
                continue;
            }
            let mut coef = binomial(&(&DualScalar::integer(p) + &s12), j as u32);
            if j % 2 == 1 {
                coef = -coef;
            }
            out.add_scaled(&self.nls.act(g, m + p - j, &inner)?, &coef);
        }
        for j in 1..=(rest.degree() - p) {
            let shorter = self.nls.act_monomial(g, p + j, &rest)?;
            if shorter.is_zero() {
                continue;
            }
            let coef = binomial(&(&DualScalar::integer(m) + &s13), j as u32);
            for (x, cx) in shorter.iter() {
                out.add_scaled(&self.product(x, big_k - j, c)?, &-(&coef * cx));
            }
        }
        self.memo.write().expect("memo lock").insert(key, out.clone());
        Ok(out)
    }
}

impl LogVAInstance for NlsInstance {
    type Key = NLSMonomial;

    fn name(&self) -> &str {
        &self.name
    }

    fn is_dual(&self) -> bool {
        self.nls.deformed()
    }

    fn vacuum(&self) -> NLSMonomial {
        NLSMonomial::vacuum()
    }

    fn basis(&self, degree: i64) -> Vec<NLSMonomial> {
        self.nls.basis(degree, None)
    }

    fn generators(&self) -> Vec<NLSMonomial> {
        Letter::ALL.iter().map(|g| NLSMonomial::generator(*g)).collect()
    }

    fn mode(&self, a: &NLSMonomial, n: i64, b: &NLSMonomial) -> Result<NLSState, LogVAError> {
        self.product(a, n, b)
    }

    fn translation(&self) -> &EndoMap<NLSMonomial> {
        &self.translation
    }

    fn braiding(&self) -> &BraidingMap<NLSMonomial> {
        &self.braiding
    }

    fn eigenvalue_bound(&self, da: i64, db: i64) -> i64 {
        if self.nls.deformed() {
            0
        } else {
            da * db
        }
    }
}
