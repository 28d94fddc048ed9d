//! Brute-force reference model of the vacuum module.
//!
//! Each graded cell `(degree, charge)` is built as a quotient: the free span
//! of words `g_a·u` (`a ≤ −1`, `u` a basis vector of a lower cell) modulo
//! every creation relation `(m, k ≤ −1)` applied to every lower basis vector.
//! Exact row reduction fixes the quotient basis, independently of any normal
//! form. Annihilation modes act on words by moving past the first creation
//! operator; that this is well defined on the quotient is checked, not assumed.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::Serialize;

use super::{enumerate_basis, Letter, MixedRelation, NLSMonomial, NLSState, Nls, NlsError, RelationInstance, RelationKind};
use crate::linalg::{self, Echelon, Row};
use crate::state::Vector;

/// Oracle coordinates: `(degree, charge, basis position)`.
pub type OState = Vector<(i64, i64, usize)>;

type CellKey = (i64, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Word {
    mode: i64,
    letter: Letter,
    rest: usize,
}

#[derive(Debug)]
struct Cell {
    words: Vec<Word>,
    index: HashMap<Word, usize>,
    echelon: Echelon,
    basis: Vec<usize>,
    position: HashMap<usize, usize>,
}

impl Cell {
    fn vacuum() -> Self {
        let word = Word { mode: 0, letter: Letter::W, rest: 0 };
        Cell {
            words: vec![word],
            index: HashMap::from([(word, 0)]),
            echelon: Echelon::new(),
            basis: vec![0],
            position: HashMap::from([(0, 0)]),
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn coords(&self, row: &Row) -> Vector<usize> {
        self.echelon
            .reduce(row)
            .into_iter_terms()
            .map(|(col, c)| (self.position[&col], c))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellReport {
    pub degree: i64,
    pub charge: i64,
    pub words: usize,
    pub dim: usize,
    pub torsion: usize,
    pub normal_monomials: usize,
    pub normal_independent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleDefect {
    pub check: String,
    pub indices: Vec<String>,
    pub defect: String,
}

type OpKey = (Letter, i64, CellKey, usize);

pub struct Oracle {
    deformed: bool,
    mixed: MixedRelation,
    levels: Vec<BTreeMap<i64, Cell>>,
    torsion: BTreeMap<CellKey, usize>,
    word_memo: RwLock<HashMap<OpKey, Vector<usize>>>,
}

fn charges(d: i64) -> impl Iterator<Item = i64> {
    -d..=d
}

fn kind_charge(kind: RelationKind) -> i64 {
    match kind {
        RelationKind::WW => 2,
        RelationKind::WbWb => -2,
        RelationKind::WWb => 0,
    }
}

impl Oracle {
    /// Build every cell of degree at most `max_degree`.
    pub fn build(deformed: bool, max_degree: i64) -> Result<Oracle, NlsError> {
        Self::build_with(deformed, MixedRelation::Series, max_degree)
    }

    pub fn build_with(deformed: bool, mixed: MixedRelation, max_degree: i64) -> Result<Oracle, NlsError> {
        let mut oracle = Oracle {
            deformed,
            mixed,
            levels: vec![BTreeMap::from([(0, Cell::vacuum())])],
            torsion: BTreeMap::new(),
            word_memo: RwLock::new(HashMap::new()),
        };
        for d in 1..=max_degree {
            let cells: Vec<(i64, Cell, usize)> = charges(d)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|c| oracle.build_cell(d, c).map(|(cell, t)| (c, cell, t)))
                .collect::<Result<_, _>>()?;
            let mut level = BTreeMap::new();
            for (c, cell, t) in cells {
                if t > 0 {
                    oracle.torsion.insert((d, c), t);
                }
                level.insert(c, cell);
            }
            oracle.levels.push(level);
        }
        Ok(oracle)
    }

    pub fn deformed(&self) -> bool {
        self.deformed
    }

    pub fn max_degree(&self) -> i64 {
        self.levels.len() as i64 - 1
    }

    fn cell(&self, key: CellKey) -> Option<&Cell> {
        usize::try_from(key.0).ok().and_then(|d| self.levels.get(d)).and_then(|l| l.get(&key.1))
    }

    pub fn dim(&self, degree: i64, charge: i64) -> usize {
        self.cell((degree, charge)).map_or(0, Cell::dim)
    }

    /// Cells whose relations left `ε`-torsion behind.
    pub fn torsion(&self) -> &BTreeMap<(i64, i64), usize> {
        &self.torsion
    }

    fn build_cell(&self, d: i64, c: i64) -> Result<(Cell, usize), NlsError> {
        let mut words = Vec::new();
        for a in -d..=-1 {
            for g in Letter::ALL {
                let n = self.dim(d + a, c - g.charge());
                words.extend((0..n).map(|rest| Word { mode: a, letter: g, rest }));
            }
        }
        let index: HashMap<Word, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();
        let mut echelon = Echelon::new();
        for e in 0..=d - 2 {
            for kind in [RelationKind::WW, RelationKind::WbWb, RelationKind::WWb] {
                let ukey = (e, c - kind_charge(kind));
                let udim = self.dim(ukey.0, ukey.1);
                if udim == 0 {
                    continue;
                }
                for m in (e - d + 1)..=-1 {
                    let k = e - d - m;
                    if k > -1 || (kind != RelationKind::WWb && m < k) {
                        continue;
                    }
                    let rel = RelationInstance::with_mixed(kind, m, k, self.deformed, self.mixed, e - m.min(k));
                    for u in 0..udim {
                        let mut row = Row::zero();
                        for t in &rel.terms {
                            let inner = self.op_basis(t.right.0, t.right.1, ukey, u)?;
                            for (r, x) in inner.iter() {
                                let w = Word { mode: t.left.1, letter: t.left.0, rest: *r };
                                row.add_term(index[&w], &t.coeff * x);
                            }
                        }
                        echelon.insert(&row);
                    }
                }
            }
        }
        let basis: Vec<usize> = (0..words.len()).filter(|i| !echelon.is_pivot(*i)).collect();
        let position = basis.iter().enumerate().map(|(p, w)| (*w, p)).collect();
        let torsion = echelon.torsion().len();
        Ok((Cell { words, index, echelon, basis, position }, torsion))
    }

    /// `g_p` applied to basis vector `b` of a cell, in coordinates of the target cell.
    fn op_basis(&self, g: Letter, p: i64, key: CellKey, b: usize) -> Result<Vector<usize>, NlsError> {
        let cell = self.cell(key).ok_or(NlsError::OutOfRange(key.0))?;
        self.op_word(g, p, key, cell.basis[b])
    }

    /// `g_p` applied to a word of a cell (pivot words included).
    fn op_word(&self, g: Letter, p: i64, key: CellKey, w: usize) -> Result<Vector<usize>, NlsError> {
        let (d, c) = key;
        if p > d {
            return Ok(Vector::zero());
        }
        let target = (d - p, c + g.charge());
        if p <= -1 {
            let cell = self.cell(key).ok_or(NlsError::OutOfRange(d))?;
            let tcell = self.cell(target).ok_or(NlsError::OutOfRange(target.0))?;
            let b = cell.position[&w];
            let word = Word { mode: p, letter: g, rest: b };
            return Ok(tcell.coords(&Row::basis(tcell.index[&word])));
        }
        if d == 0 {
            return Ok(Vector::zero());
        }
        let memo_key = (g, p, key, w);
        if let Some(v) = self.word_memo.read().expect("oracle memo").get(&memo_key) {
            return Ok(v.clone());
        }
        let cell = self.cell(key).ok_or(NlsError::OutOfRange(d))?;
        let Word { mode: a, letter: h, rest } = cell.words[w];
        let rkey = (d + a, c - h.charge());
        let rel = RelationInstance::for_leading(g, p, h, a, self.deformed, self.mixed, rkey.0);
        let mut out = Vector::zero();
        for t in rel.solve_for((g, p), (h, a))? {
            let inner = self.op_basis(t.right.0, t.right.1, rkey, rest)?;
            let ikey = (rkey.0 - t.right.1, rkey.1 + t.right.0.charge());
            let outer = self.op_coords(t.left.0, t.left.1, ikey, &inner)?;
            out.add_scaled(&outer, &t.coeff);
        }
        self.word_memo.write().expect("oracle memo").insert(memo_key, out.clone());
        Ok(out)
    }

    fn op_coords(&self, g: Letter, p: i64, key: CellKey, v: &Vector<usize>) -> Result<Vector<usize>, NlsError> {
        let mut out = Vector::zero();
        for (b, x) in v.iter() {
            out.add_scaled(&self.op_basis(g, p, key, *b)?, x);
        }
        Ok(out)
    }

    pub fn vacuum(&self) -> OState {
        OState::basis((0, 0, 0))
    }

    /// `g_n v` in oracle coordinates.
    pub fn op(&self, g: Letter, n: i64, v: &OState) -> Result<OState, NlsError> {
        let mut out = OState::zero();
        for ((d, c, b), x) in v.iter() {
            let r = self.op_basis(g, n, (*d, *c), *b)?;
            let (td, tc) = (d - n, c + g.charge());
            for (tb, y) in r.iter() {
                out.add_term((td, tc, *tb), x * y);
            }
        }
        Ok(out)
    }

    /// A word of modes (leftmost acts last) applied to the vacuum.
    pub fn apply_word(&self, factors: &[(Letter, i64)]) -> Result<OState, NlsError> {
        let mut v = self.vacuum();
        for (g, n) in factors.iter().rev() {
            v = self.op(*g, *n, &v)?;
        }
        Ok(v)
    }

    pub fn embed(&self, v: &NLSState) -> Result<OState, NlsError> {
        let mut out = OState::zero();
        for (m, x) in v.iter() {
            out.add_scaled(&self.apply_word(m.factors())?, x);
        }
        Ok(out)
    }

    /// Express an oracle state in the normal monomial basis.
    pub fn rewrite(&self, v: &OState) -> Result<NLSState, NlsError> {
        let mut by_cell: BTreeMap<CellKey, Vector<usize>> = BTreeMap::new();
        for ((d, c, b), x) in v.iter() {
            by_cell.entry((*d, *c)).or_default().add_term(*b, x.clone());
        }
        let mut out = NLSState::zero();
        for ((d, c), target) in by_cell {
            let normals = enumerate_basis(d, Some(c), self.deformed);
            let rows = normals
                .iter()
                .map(|m| self.embed(&NLSState::basis(m.clone())).map(|e| e.into_iter_terms().map(|((_, _, b), x)| (b, x)).collect()))
                .collect::<Result<Vec<Row>, _>>()?;
            let coeffs = linalg::solve(&rows, &target)
                .ok_or_else(|| NlsError::Parse(format!("no normal form in cell ({d}, {c})")))?;
            for (m, x) in normals.into_iter().zip(coeffs) {
                out.add_term(m, x);
            }
        }
        Ok(out)
    }

    /// Dimensions and normal-monomial certification for every cell.
    pub fn certify(&self) -> Result<Vec<CellReport>, NlsError> {
        let mut out = Vec::new();
        for (d, level) in self.levels.iter().enumerate() {
            let d = d as i64;
            for (c, cell) in level {
                let normals = enumerate_basis(d, Some(*c), self.deformed);
                let rows = normals
                    .iter()
                    .map(|m| self.embed(&NLSState::basis(m.clone())).map(|e| e.into_iter_terms().map(|((_, _, b), x)| (b, x)).collect()))
                    .collect::<Result<Vec<Row>, _>>()?;
                out.push(CellReport {
                    degree: d,
                    charge: *c,
                    words: cell.words.len(),
                    dim: cell.dim(),
                    torsion: self.torsion.get(&(d, *c)).copied().unwrap_or(0),
                    normal_monomials: normals.len(),
                    normal_independent: linalg::independent(&rows),
                });
            }
        }
        Ok(out)
    }

    /// Annihilation modes must kill every relation row.
    pub fn check_annihilators(&self) -> Result<Vec<OracleDefect>, NlsError> {
        let mut out = Vec::new();
        for (d, level) in self.levels.iter().enumerate().skip(1) {
            let d = d as i64;
            for (c, cell) in level {
                for col in cell.echelon.pivots() {
                    let row = cell.echelon.pivot_row(*col).expect("pivot row");
                    for g in Letter::ALL {
                        for p in 0..=d {
                            let mut acc = Vector::zero();
                            for (w, x) in row.iter() {
                                acc.add_scaled(&self.op_word(g, p, (d, *c), *w)?, x);
                            }
                            if !acc.is_zero() {
                                out.push(OracleDefect {
                                    check: "annihilator".into(),
                                    indices: vec![format!("{g}[{p}]"), format!("cell ({d}, {c})"), format!("pivot {col}")],
                                    defect: acc.to_string(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Relations with an annihilation index hold on all basis vectors whose
    /// image stays inside the oracle.
    pub fn check_relations(&self, window: i64) -> Result<Vec<OracleDefect>, NlsError> {
        let mut out = Vec::new();
        let top = self.max_degree();
        for e in 0..=top {
            for c in charges(e) {
                for b in 0..self.dim(e, c) {
                    let v = OState::basis((e, c, b));
                    for kind in [RelationKind::WW, RelationKind::WbWb, RelationKind::WWb] {
                        for m in -window..=window {
                            for k in -window..=window {
                                if m.max(k) < 0 || e - m - k > top || e - m.min(k) > top {
                                    continue;
                                }
                                let rel = RelationInstance::with_mixed(kind, m, k, self.deformed, self.mixed, e - m.min(k));
                                let mut acc = OState::zero();
                                for t in &rel.terms {
                                    let inner = self.op(t.right.0, t.right.1, &v)?;
                                    acc.add_scaled(&self.op(t.left.0, t.left.1, &inner)?, &t.coeff);
                                }
                                if !acc.is_zero() {
                                    out.push(OracleDefect {
                                        check: "relation".into(),
                                        indices: vec![format!("{kind:?}"), m.to_string(), k.to_string(), format!("({e}, {c}, {b})")],
                                        defect: acc.to_string(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Compare the straightening action with the oracle on every generator,
    /// mode `|n| ≤ max_mode` and normal monomial of degree `≤ max_state_degree`.
    pub fn equivalence_sweep(&self, nls: &Nls, max_mode: i64, max_state_degree: i64) -> Result<Vec<OracleDefect>, NlsError> {
        let cases: Vec<(Letter, i64, NLSMonomial)> = (0..=max_state_degree)
            .flat_map(|d| enumerate_basis(d, None, self.deformed))
            .flat_map(|m| Letter::ALL.into_iter().flat_map(move |g| (-max_mode..=max_mode).map({
                let m = m.clone();
                move |n| (g, n, m.clone())
            })))
            .filter(|(_, n, m)| m.degree() - n <= self.max_degree())
            .collect();
        let results: Vec<Option<OracleDefect>> = cases
            .par_iter()
            .map(|(g, n, m)| {
                let fast = nls.act_monomial(*g, *n, m)?;
                let lhs = self.embed(&fast)?;
                let rhs = self.op(*g, *n, &self.embed(&NLSState::basis(m.clone()))?)?;
                Ok((lhs != rhs).then(|| OracleDefect {
                    check: "oracle-equivalence".into(),
                    indices: vec![format!("{g}[{n}]"), m.to_string()],
                    defect: lhs.difference(&rhs).to_string(),
                }))
            })
            .collect::<Result<_, NlsError>>()?;
        Ok(results.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::DualScalar;

    #[test]
    fn small_dimensions() {
        let o = Oracle::build(false, 3).unwrap();
        assert_eq!(o.dim(0, 0), 1);
        assert_eq!(o.dim(1, 1) + o.dim(1, -1), 2);
        let total = |o: &Oracle, d: i64| (-d..=d).map(|c| o.dim(d, c)).sum::<usize>();
        assert_eq!(total(&o, 2), 3);
        let e = Oracle::build(true, 2).unwrap();
        assert_eq!(total(&e, 2), 5);
    }

    #[test]
    fn square_word_vanishes() {
        let o = Oracle::build(false, 2).unwrap();
        assert!(o.apply_word(&[(Letter::W, -1), (Letter::W, -1)]).unwrap().is_zero());
    }

    #[test]
    fn rewrite_matches_anchor() {
        let o = Oracle::build(false, 3).unwrap();
        let v = o.apply_word(&[(Letter::W, -1), (Letter::W, -2)]).unwrap();
        let n = o.rewrite(&v).unwrap();
        let expected = NLSState::term("w[-2] w[-1]".parse().unwrap(), DualScalar::integer(-2));
        assert_eq!(n, expected);
    }

    #[test]
    fn certified_low_degree() {
        for deformed in [false, true] {
            let o = Oracle::build(deformed, 4).unwrap();
            for r in o.certify().unwrap() {
                assert_eq!(r.torsion, 0);
                assert_eq!(r.dim, r.normal_monomials, "{r:?}");
                assert!(r.normal_independent, "{r:?}");
            }
            assert!(o.check_annihilators().unwrap().is_empty());
            assert!(o.check_relations(3).unwrap().is_empty());
        }
    }

    #[test]
    fn agrees_with_straightening_low_degree() {
        for deformed in [false, true] {
            let o = Oracle::build(deformed, 5).unwrap();
            let nls = Nls::new(deformed);
            let bad = o.equivalence_sweep(&nls, 3, 3).unwrap();
            assert!(bad.is_empty(), "{bad:?}");
        }
    }
}
