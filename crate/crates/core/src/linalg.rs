//! Sparse row reduction over `Q(i)[ε]/(ε²)`.
//!
//! The dual ring is local, so elimination only ever pivots on units. Rows
//! left with nothing but `ε`-multiples after reduction are torsion and are
//! kept aside for reporting.

use std::collections::BTreeMap;

use crate::scalar::DualScalar;
use crate::state::Vector;

pub type Row = Vector<usize>;

/// Triangular echelon form.
///
/// Each stored row has coefficient 1 at its pivot, which is its largest
/// column with a unit coefficient; larger columns may carry `ε`-multiples.
/// Reduction always eliminates the largest pivot column present, so the
/// remainder of a vector is canonical when there is no torsion.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: BTreeMap<usize, Row>,
    torsion: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Insert {
    Pivot(usize),
    Dependent,
    Torsion,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.rows.contains_key(&col)
    }

    pub fn pivots(&self) -> impl Iterator<Item = &usize> {
        self.rows.keys()
    }

    pub fn pivot_row(&self, col: usize) -> Option<&Row> {
        self.rows.get(&col)
    }

    /// Remove every pivot column from `v`.
    pub fn reduce(&self, v: &Row) -> Row {
        let mut out = v.clone();
        loop {
            let next = out
                .iter()
                .rev()
                .find(|(k, _)| self.rows.contains_key(k))
                .map(|(k, c)| (*k, c.clone()));
            let Some((col, c)) = next else {
                return out;
            };
            out.add_scaled(&self.rows[&col], &-c);
        }
    }

    /// Add a row; the pivot is the largest column carrying a unit.
    pub fn insert(&mut self, row: &Row) -> Insert {
        let r = self.reduce(row);
        if r.is_zero() {
            return Insert::Dependent;
        }
        let pivot = r.iter().rev().find(|(_, c)| c.is_unit()).map(|(k, c)| (*k, c.clone()));
        let Some((col, c)) = pivot else {
            self.torsion.push(r);
            return Insert::Torsion;
        };
        let r = r.scaled(&c.inv().expect("unit pivot"));
        self.rows.insert(col, r);
        Insert::Pivot(col)
    }

    /// Torsion rows that remain nonzero against the final echelon form.
    pub fn torsion(&self) -> Vec<Row> {
        self.torsion
            .iter()
            .map(|t| self.reduce(t))
            .filter(|t| !t.is_zero())
            .collect()
    }
}

/// Rank of a list of rows over the dual ring (unit pivots only), plus torsion count.
pub fn rank(rows: &[Row]) -> (usize, usize) {
    let mut e = Echelon::new();
    for r in rows {
        e.insert(r);
    }
    (e.rank(), e.torsion().len())
}

/// `true` iff the rows are free: full unit rank and no torsion.
pub fn independent(rows: &[Row]) -> bool {
    rank(rows) == (rows.len(), 0)
}

/// Express `target` in the span of `rows`, returning the coefficients.
pub fn solve(rows: &[Row], target: &Row) -> Option<Vec<DualScalar>> {
    // Marker columns sit below every data column so data is pivoted first.
    let mut e = Echelon::new();
    let shift = rows.len();
    for (i, r) in rows.iter().enumerate() {
        let mut aug: Row = r.iter().map(|(k, c)| (k + shift, c.clone())).collect();
        aug.add_term(i, DualScalar::one());
        e.insert(&aug);
    }
    let t: Row = target.iter().map(|(k, c)| (k + shift, c.clone())).collect();
    let red = e.reduce(&t);
    if red.keys().any(|k| *k >= shift) {
        return None;
    }
    // red = t − Σ x_i r_i restricted to markers: red = −Σ x_i e_i
    Some((0..rows.len()).map(|i| -red.coeff(&i)).collect())
}
