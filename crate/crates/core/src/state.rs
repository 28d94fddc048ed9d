//! Sparse vectors over the dual scalar ring.
//!
//! A [`Vector`] is a finite linear combination of basis keys. States of an
//! algebra are `Vector<K>`; tensors of states are vectors over key tuples.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::scalar::DualScalar;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vector<K: Ord> {
    terms: BTreeMap<K, DualScalar>,
}

impl<K: Ord> Default for Vector<K> {
    fn default() -> Self {
        Vector { terms: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> Vector<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(key: K) -> Self {
        Self::term(key, DualScalar::one())
    }

    pub fn term(key: K, c: DualScalar) -> Self {
        let mut v = Self::zero();
        v.add_term(key, c);
        v
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

    pub fn coeff(&self, key: &K) -> DualScalar {
        self.terms.get(key).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&K, &DualScalar)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, key: K, c: DualScalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Vector<K>, c: &DualScalar) {
        if c.is_zero() {
            return;
        }
        for (k, v) in other.iter() {
            self.add_term(k.clone(), v * c);
        }
    }

    pub fn add_assign(&mut self, other: &Vector<K>) {
        for (k, v) in other.iter() {
            self.add_term(k.clone(), v.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &Vector<K>) {
        for (k, v) in other.iter() {
            self.add_term(k.clone(), -v);
        }
    }

    pub fn scaled(&self, c: &DualScalar) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn sum(&self, other: &Vector<K>) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn difference(&self, other: &Vector<K>) -> Self {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    /// Apply a map defined on basis keys, extended linearly.
    pub fn map_linear<K2: Ord + Clone>(&self, mut f: impl FnMut(&K) -> Vector<K2>) -> Vector<K2> {
        let mut out = Vector::zero();
        for (k, c) in self.iter() {
            out.add_scaled(&f(k), c);
        }
        out
    }

    /// Fallible version of [`Vector::map_linear`].
    pub fn try_map_linear<K2: Ord + Clone, E>(
        &self,
        mut f: impl FnMut(&K) -> Result<Vector<K2>, E>,
    ) -> Result<Vector<K2>, E> {
        let mut out = Vector::zero();
        for (k, c) in self.iter() {
            out.add_scaled(&f(k)?, c);
        }
        Ok(out)
    }

    /// Keep only the part of every coefficient selected by `f`.
    pub fn map_coeffs(&self, f: impl Fn(&DualScalar) -> DualScalar) -> Self {
        let mut out = Self::zero();
        for (k, c) in self.iter() {
            out.add_term(k.clone(), f(c));
        }
        out
    }

    pub fn into_iter_terms(self) -> impl Iterator<Item = (K, DualScalar)> {
        self.terms.into_iter()
    }
}

impl<K: Ord + Clone> FromIterator<(K, DualScalar)> for Vector<K> {
    fn from_iter<I: IntoIterator<Item = (K, DualScalar)>>(iter: I) -> Self {
        let mut v = Vector::zero();
        for (k, c) in iter {
            v.add_term(k, c);
        }
        v
    }
}

/// `x ⊗ y` for basis vectors, extended bilinearly.
pub fn tensor<K: Ord + Clone>(x: &Vector<K>, y: &Vector<K>) -> Vector<(K, K)> {
    let mut out = Vector::zero();
    for (a, ca) in x.iter() {
        for (b, cb) in y.iter() {
            out.add_term((a.clone(), b.clone()), ca * cb);
        }
    }
    out
}

/// Text form of a basis key; tensors render as `a (x) b`.
pub trait KeyFmt {
    fn key_string(&self) -> String;
}

macro_rules! key_fmt_display {
    ($($t:ty),*) => {$(
        impl KeyFmt for $t {
            fn key_string(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

key_fmt_display!(u8, u32, u64, usize, i64, String);

impl<A: KeyFmt, B: KeyFmt> KeyFmt for (A, B) {
    fn key_string(&self) -> String {
        format!("{} (x) {}", self.0.key_string(), self.1.key_string())
    }
}

impl<A: KeyFmt, B: KeyFmt, C: KeyFmt> KeyFmt for (A, B, C) {
    fn key_string(&self) -> String {
        format!("{} (x) {} (x) {}", self.0.key_string(), self.1.key_string(), self.2.key_string())
    }
}

impl<K: Ord + KeyFmt> fmt::Display for Vector<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.is_one() {
                write!(f, "{}", k.key_string())?;
            } else {
                write!(f, "{c}*{}", k.key_string())?;
            }
        }
        Ok(())
    }
}

impl<K: Ord + KeyFmt> fmt::Debug for Vector<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `{"terms":[[key_string, scalar_json], ...]}`.
impl<K: Ord + KeyFmt> Serialize for Vector<K> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Json<'a> {
            terms: Vec<(String, &'a DualScalar)>,
        }
        Json {
            terms: self.terms.iter().map(|(k, c)| (k.key_string(), c)).collect(),
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_removes_terms() {
        let mut v = Vector::basis(1u32);
        v.add_term(2, DualScalar::integer(3));
        v.add_term(1, DualScalar::integer(-1));
        assert_eq!(v.len(), 1);
        assert_eq!(v.coeff(&2), DualScalar::integer(3));
        assert!(v.coeff(&1).is_zero());
    }

    #[test]
    fn tensor_is_bilinear() {
        let x: Vector<u8> = [(1, DualScalar::integer(2)), (2, DualScalar::epsilon())].into_iter().collect();
        let y: Vector<u8> = [(3, DualScalar::integer(5))].into_iter().collect();
        let t = tensor(&x, &y);
        assert_eq!(t.coeff(&(1, 3)), DualScalar::integer(10));
        assert_eq!(t.coeff(&(2, 3)), DualScalar::epsilon().scale(&5.into()));
    }
}
