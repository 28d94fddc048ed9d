//! Commutative vertex algebra of differential polynomials `C[x_i^{(k)}]`.
//!
//! `Y(a,z)b = (e^{zT}a)·b`, so `μ_{−1−k}(a⊗b) = (T^k a / k!)·b` for `k ≥ 0`
//! and `μ_n = 0` for `n ≥ 0`. The braiding is zero. `x^{(k)}` has degree `k+1`.

use std::fmt;

use crate::braiding::{BraidingMap, EndoMap, GradedKey, GradingShift};
use crate::logva::{LogVAError, LogVAInstance};
use crate::scalar::{factorial, DualScalar, Rational};
use crate::state::Vector;

/// Monomial `Π x_{v}^{(k)}`, stored as sorted `(variable, order)` factors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiffMonomial(Vec<(usize, u32)>);

impl DiffMonomial {
    pub fn one() -> Self {
        DiffMonomial(Vec::new())
    }

    pub fn new(mut factors: Vec<(usize, u32)>) -> Self {
        factors.sort();
        DiffMonomial(factors)
    }

    pub fn variable(v: usize) -> Self {
        DiffMonomial(vec![(v, 0)])
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn times(&self, other: &DiffMonomial) -> DiffMonomial {
        let mut f = self.0.clone();
        f.extend_from_slice(&other.0);
        DiffMonomial::new(f)
    }
}

impl fmt::Display for DiffMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|(v, k)| format!("x{v}^({k})")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl GradedKey for DiffMonomial {
    fn degree(&self) -> i64 {
        self.0.iter().map(|(_, k)| *k as i64 + 1).sum()
    }
}

/// `∂` extended as a derivation.
pub fn derivative(m: &DiffMonomial) -> Vector<DiffMonomial> {
    let mut out = Vector::zero();
    for i in 0..m.0.len() {
        let mut f = m.0.clone();
        f[i].1 += 1;
        out.add_term(DiffMonomial::new(f), DualScalar::one());
    }
    out
}

pub struct Commutative {
    vars: usize,
    translation: EndoMap<DiffMonomial>,
    braiding: BraidingMap<DiffMonomial>,
}

impl Commutative {
    pub fn new(vars: usize) -> Self {
        Commutative {
            vars,
            translation: EndoMap::new("T", GradingShift { degree: 1, charge: 0 }, derivative),
            braiding: BraidingMap::zero(),
        }
    }
}

fn partitions(n: i64, max_part: i64, vars: usize, prefix: &mut Vec<(usize, u32)>, out: &mut Vec<DiffMonomial>) {
    if n == 0 {
        out.push(DiffMonomial::new(prefix.clone()));
        return;
    }
    // Factors are emitted in non-increasing (order, variable) to avoid repeats.
    let last = prefix.last().map(|(v, k)| (*k as i64 + 1, *v));
    for part in (1..=max_part.min(n)).rev() {
        for v in 0..vars {
            if let Some(l) = last {
                if (part, v) > l {
                    continue;
                }
            }
            prefix.push((v, (part - 1) as u32));
            partitions(n - part, part, vars, prefix, out);
            prefix.pop();
        }
    }
}

impl LogVAInstance for Commutative {
    type Key = DiffMonomial;

    fn name(&self) -> &str {
        "commutative"
    }

    fn is_dual(&self) -> bool {
        false
    }

    fn vacuum(&self) -> DiffMonomial {
        DiffMonomial::one()
    }

    fn basis(&self, degree: i64) -> Vec<DiffMonomial> {
        let mut out = Vec::new();
        if degree >= 0 {
            partitions(degree, degree, self.vars, &mut Vec::new(), &mut out);
        }
        out.sort();
        out
    }

    fn generators(&self) -> Vec<DiffMonomial> {
        (0..self.vars).map(DiffMonomial::variable).collect()
    }

    fn mode(&self, a: &DiffMonomial, n: i64, b: &DiffMonomial) -> Result<Vector<DiffMonomial>, LogVAError> {
        if n >= 0 {
            return Ok(Vector::zero());
        }
        let k = (-1 - n) as u32;
        let mut t = Vector::basis(a.clone());
        for _ in 0..k {
            t = t.map_linear(derivative);
        }
        let inv: DualScalar = Rational::from_bigints(1.into(), factorial(k))?.into();
        Ok(t.map_linear(|x| Vector::basis(x.times(b))).scaled(&inv))
    }

    fn translation(&self) -> &EndoMap<DiffMonomial> {
        &self.translation
    }

    fn braiding(&self) -> &BraidingMap<DiffMonomial> {
        &self.braiding
    }

    fn eigenvalue_bound(&self, _: i64, _: i64) -> i64 {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logva;

    #[test]
    fn basis_counts_partitions() {
        let c = Commutative::new(1);
        let counts: Vec<usize> = (0..7).map(|d| c.basis(d).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11]);
        // two colours: coefficients of Π (1 − q^n)^{−2}
        let c2 = Commutative::new(2);
        let counts: Vec<usize> = (0..5).map(|d| c2.basis(d).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 10, 20]);
    }

    #[test]
    fn products_are_taylor_coefficients() {
        let c = Commutative::new(1);
        let x = DiffMonomial::variable(0);
        let xx = x.times(&x);
        // μ_{−3}(x² ⊗ 1) = T²(x²)/2 = x x'' + x'^2
        let v = c.mode(&xx, -3, &DiffMonomial::one()).unwrap();
        let mut expected = Vector::zero();
        expected.add_term(DiffMonomial::new(vec![(0, 0), (0, 2)]), DualScalar::one());
        expected.add_term(DiffMonomial::new(vec![(0, 1), (0, 1)]), DualScalar::one());
        assert_eq!(v, expected);
    }

    #[test]
    fn axioms_hold() {
        let c = Commutative::new(2);
        for r in [
            logva::sweep_borcherds(&c, 3, 2),
            logva::sweep_hexagon(&c, 3, 2),
            logva::sweep_vacuum(&c, 3, 3),
            logva::sweep_translation(&c, 3, 2),
            logva::sweep_locality(&c, 2, 2, 0),
            logva::sweep_nth_product(&c, 2, 2),
        ] {
            assert!(r.iter().all(|x| x.passed()), "{:?}", r.iter().find(|x| !x.passed()));
        }
    }

    #[test]
    fn theta_of_products() {
        let c = Commutative::new(1);
        let x = logva::FieldExpr::Field(DiffMonomial::variable(0));
        let e = logva::FieldExpr::Product(Box::new(x.clone()), -2, Box::new(x));
        let v = logva::theta_reconstruct(&c, &e).unwrap();
        assert_eq!(v, Vector::basis(DiffMonomial::new(vec![(0, 0), (0, 1)])));
    }
}
