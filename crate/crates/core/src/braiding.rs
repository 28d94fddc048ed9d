//! Braiding maps `S = Σ φᵢ ⊗ ψᵢ` on graded truncations.
//!
//! Operators are given by their action on basis keys. Spectra are declared
//! by whoever builds the operator and verified on demand; nothing here
//! factors characteristic polynomials.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::logseries::{Exponent, LogSeries};
use crate::scalar::{DualScalar, GaussScalar};
use crate::state::{tensor, KeyFmt, Vector};

/// Basis keys carrying a degree and a charge.
pub trait GradedKey: Ord + Clone + fmt::Display + fmt::Debug + Send + Sync + 'static {
    fn degree(&self) -> i64;
    fn charge(&self) -> i64 {
        0
    }
}

impl<T: GradedKey> KeyFmt for T {
    fn key_string(&self) -> String {
        self.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BraidingError {
    #[error("operator {0} has no declared spectrum")]
    MissingSpectrum(String),
    #[error("declared spectrum of {op} does not annihilate {witness}")]
    SpectrumMismatch { op: String, witness: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GradingShift {
    pub degree: i64,
    pub charge: i64,
}

type Action<K> = Arc<dyn Fn(&K) -> Vector<K> + Send + Sync>;
type Hint<K> = Arc<dyn Fn(&K) -> Option<GaussScalar> + Send + Sync>;

/// Linear endomorphism given on basis keys.
#[derive(Clone)]
pub struct EndoMap<K: GradedKey> {
    pub name: String,
    action: Action<K>,
    pub shift: GradingShift,
    /// Eigenvalues with the size of their largest Jordan block.
    pub spectrum: Option<Vec<(GaussScalar, u32)>>,
    /// Optional generalized eigenvalue of a basis key, when the key is known
    /// to lie in a single generalized eigenspace.
    eigen_hint: Option<Hint<K>>,
}

impl<K: GradedKey> fmt::Debug for EndoMap<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EndoMap({})", self.name)
    }
}

impl<K: GradedKey> EndoMap<K> {
    pub fn new(
        name: impl Into<String>,
        shift: GradingShift,
        action: impl Fn(&K) -> Vector<K> + Send + Sync + 'static,
    ) -> Self {
        EndoMap {
            name: name.into(),
            action: Arc::new(action),
            shift,
            spectrum: None,
            eigen_hint: None,
        }
    }

    pub fn zero() -> Self {
        Self::new("0", GradingShift::default(), |_| Vector::zero())
    }

    pub fn identity() -> Self {
        Self::new("I", GradingShift::default(), |k: &K| Vector::basis(k.clone()))
            .with_spectrum(vec![(GaussScalar::one(), 1)])
    }

    /// Diagonal operator `k ↦ f(k)·k`.
    pub fn diagonal(
        name: impl Into<String>,
        f: impl Fn(&K) -> DualScalar + Send + Sync + 'static,
    ) -> Self {
        let f = Arc::new(f);
        let g = f.clone();
        let mut e = Self::new(name, GradingShift::default(), move |k: &K| Vector::term(k.clone(), f(k)));
        e.eigen_hint = Some(Arc::new(move |k: &K| Some(g(k).value)));
        e
    }

    pub fn with_spectrum(mut self, spectrum: Vec<(GaussScalar, u32)>) -> Self {
        self.spectrum = Some(spectrum);
        self
    }

    pub fn with_eigen_hint(
        mut self,
        hint: impl Fn(&K) -> Option<GaussScalar> + Send + Sync + 'static,
    ) -> Self {
        self.eigen_hint = Some(Arc::new(hint));
        self
    }

    pub fn apply_key(&self, k: &K) -> Vector<K> {
        (self.action)(k)
    }

    pub fn apply(&self, v: &Vector<K>) -> Vector<K> {
        v.map_linear(|k| self.apply_key(k))
    }

    pub fn apply_pow(&self, v: &Vector<K>, t: u32) -> Vector<K> {
        (0..t).fold(v.clone(), |acc, _| self.apply(&acc))
    }

    pub fn hint(&self, k: &K) -> Option<GaussScalar> {
        self.eigen_hint.as_ref().and_then(|h| h(k))
    }

    /// `c·self`; spectrum scales accordingly when `c` is a plain number.
    pub fn scaled(&self, c: DualScalar) -> Self {
        let inner = self.clone();
        let cc = c.clone();
        let mut out = Self::new(format!("{}*{}", c, self.name), self.shift, move |k: &K| {
            inner.apply_key(k).scaled(&cc)
        });
        if c.eps.is_zero() {
            out.spectrum = self
                .spectrum
                .as_ref()
                .map(|s| s.iter().map(|(d, m)| (d * &c.value, *m)).collect());
            if let Some(h) = self.eigen_hint.clone() {
                let cv = c.value.clone();
                out.eigen_hint = Some(Arc::new(move |k: &K| h(k).map(|d| &d * &cv)));
            }
        } else if c.value.is_zero() {
            // ε·φ squares to zero.
            out.spectrum = Some(vec![(GaussScalar::zero(), 2)]);
            out.eigen_hint = Some(Arc::new(|_| Some(GaussScalar::zero())));
        }
        out
    }

    /// `self − other`.
    pub fn minus(&self, other: &EndoMap<K>, name: impl Into<String>) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(name, self.shift, move |k: &K| a.apply_key(k).difference(&b.apply_key(k)))
    }

    /// Check `deg(φk) = deg k + shift` and the same for charge.
    pub fn grading_defects(&self, test_space: &[K]) -> Vec<(K, K)> {
        let mut out = Vec::new();
        for k in test_space {
            for (img, _) in self.apply_key(k).iter() {
                if img.degree() != k.degree() + self.shift.degree
                    || img.charge() != k.charge() + self.shift.charge
                {
                    out.push((k.clone(), img.clone()));
                }
            }
        }
        out
    }

    fn spectrum_or_err(&self) -> Result<&Vec<(GaussScalar, u32)>, BraidingError> {
        self.spectrum
            .as_ref()
            .ok_or_else(|| BraidingError::MissingSpectrum(self.name.clone()))
    }

    /// `Π_d (φ − d)^{k_d}` applied to `v`.
    fn annihilator(&self, v: &Vector<K>) -> Result<Vector<K>, BraidingError> {
        let mut acc = v.clone();
        for (d, m) in self.spectrum_or_err()? {
            let dd = DualScalar::from_gauss(d.clone());
            for _ in 0..*m {
                acc = self.apply(&acc).difference(&acc.scaled(&dd));
            }
        }
        Ok(acc)
    }

    pub fn check_spectrum(&self, test_space: &[K]) -> Result<(), BraidingError> {
        for k in test_space {
            if !self.annihilator(&Vector::basis(k.clone()))?.is_zero() {
                return Err(BraidingError::SpectrumMismatch {
                    op: self.name.clone(),
                    witness: k.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Projection onto the generalized `d`-eigenspace, applied to `v`.
    ///
    /// Uses the Hermite interpolation polynomial `P_d` with
    /// `P_d ≡ 1 mod (x−d)^{k_d}` and `P_d ≡ 0 mod (x−d')^{k_{d'}}`.
    pub fn project(&self, d: &GaussScalar, v: &Vector<K>) -> Result<Vector<K>, BraidingError> {
        let spec = self.spectrum_or_err()?;
        let k_d = spec
            .iter()
            .find(|(e, _)| e == d)
            .map(|(_, m)| *m)
            .ok_or_else(|| BraidingError::SpectrumMismatch {
                op: self.name.clone(),
                witness: format!("eigenvalue {d} not declared"),
            })?;
        let poly = hermite_projector(spec, d, k_d);
        Ok(apply_poly(self, &poly, v))
    }

    /// Split `v` into generalized eigencomponents `(d, v_d)`.
    pub fn eigencomponents(&self, v: &Vector<K>) -> Result<Vec<(GaussScalar, Vector<K>)>, BraidingError> {
        if self.eigen_hint.is_some() {
            let mut groups: BTreeMap<GaussScalar, Vector<K>> = BTreeMap::new();
            let mut all = true;
            for (k, c) in v.iter() {
                match self.hint(k) {
                    Some(d) => groups.entry(d).or_default().add_term(k.clone(), c.clone()),
                    None => {
                        all = false;
                        break;
                    }
                }
            }
            if all {
                return Ok(groups.into_iter().filter(|(_, x)| !x.is_zero()).collect());
            }
        }
        let spec = self.spectrum_or_err()?.clone();
        let mut out = Vec::new();
        let mut total = Vector::zero();
        for (d, _) in &spec {
            let p = self.project(d, v)?;
            if !p.is_zero() {
                total.add_assign(&p);
                out.push((d.clone(), p));
            }
        }
        if total != *v {
            return Err(BraidingError::SpectrumMismatch {
                op: self.name.clone(),
                witness: v.to_string(),
            });
        }
        Ok(out)
    }

    /// JSON operator format over a finite test space.
    pub fn to_json(&self, test_space: &[K]) -> Value {
        let entries: Vec<Value> = test_space
            .iter()
            .map(|k| json!([k.to_string(), serde_json::to_value(self.apply_key(k)).unwrap_or(Value::Null)]))
            .collect();
        let spectrum: Vec<Value> = self
            .spectrum
            .as_ref()
            .map(|s| {
                s.iter()
                    .map(|(d, m)| json!([DualScalar::from_gauss(d.clone()), m]))
                    .collect()
            })
            .unwrap_or_default();
        json!({"shift": self.shift, "entries": entries, "spectrum": spectrum})
    }
}

/// Polynomial coefficients (in increasing powers) of the Hermite projector.
fn hermite_projector(spec: &[(GaussScalar, u32)], d: &GaussScalar, k_d: u32) -> Vec<GaussScalar> {
    // q(x) = Π_{d'≠d} (x − d')^{k_{d'}}
    let mut q = vec![GaussScalar::one()];
    for (e, m) in spec {
        if e == d {
            continue;
        }
        for _ in 0..*m {
            q = poly_mul(&q, &[-e, GaussScalar::one()]);
        }
    }
    // Taylor coefficients of q at d, in y = x − d, truncated at y^{k_d}.
    let qt = taylor_shift(&q, d, k_d as usize);
    // r = 1/q as a truncated series in y.
    let mut r = vec![GaussScalar::zero(); k_d as usize];
    let inv0 = qt[0].inv().expect("distinct eigenvalues");
    for n in 0..k_d as usize {
        let mut s = if n == 0 { GaussScalar::one() } else { GaussScalar::zero() };
        for t in 1..=n {
            if t < qt.len() {
                s = &s - &(&qt[t] * &r[n - t]);
            }
        }
        r[n] = &s * &inv0;
    }
    // r(y) back to x: y = x − d.
    let mut r_x = vec![GaussScalar::zero()];
    let mut y_pow = vec![GaussScalar::one()];
    for c in &r {
        r_x = poly_add(&r_x, &poly_scale(&y_pow, c));
        y_pow = poly_mul(&y_pow, &[-d, GaussScalar::one()]);
    }
    poly_mul(&r_x, &q)
}

fn taylor_shift(p: &[GaussScalar], d: &GaussScalar, terms: usize) -> Vec<GaussScalar> {
    let mut out = Vec::with_capacity(terms);
    let mut cur = p.to_vec();
    let mut fact = GaussScalar::one();
    for t in 0..terms {
        if t > 0 {
            fact = &fact * &GaussScalar::integer(t as i64);
        }
        let mut val = GaussScalar::zero();
        for c in cur.iter().rev() {
            val = &(&val * d) + c;
        }
        out.push(&val * &fact.inv().expect("nonzero factorial"));
        cur = cur
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * &GaussScalar::integer(k as i64))
            .collect();
    }
    out
}

fn poly_mul(a: &[GaussScalar], b: &[GaussScalar]) -> Vec<GaussScalar> {
    let mut out = vec![GaussScalar::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + &(x * y);
        }
    }
    out
}

fn poly_add(a: &[GaussScalar], b: &[GaussScalar]) -> Vec<GaussScalar> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).cloned().unwrap_or_else(GaussScalar::zero);
            let y = b.get(i).cloned().unwrap_or_else(GaussScalar::zero);
            &x + &y
        })
        .collect()
}

fn poly_scale(a: &[GaussScalar], c: &GaussScalar) -> Vec<GaussScalar> {
    a.iter().map(|x| x * c).collect()
}

fn apply_poly<K: GradedKey>(e: &EndoMap<K>, poly: &[GaussScalar], v: &Vector<K>) -> Vector<K> {
    let mut out = Vector::zero();
    let mut pow = v.clone();
    for (t, c) in poly.iter().enumerate() {
        if t > 0 {
            pow = e.apply(&pow);
        }
        out.add_scaled(&pow, &DualScalar::from_gauss(c.clone()));
    }
    out
}

/// Jordan–Chevalley splitting `e = s + n` from the declared spectrum.
pub fn jordan_chevalley<K: GradedKey>(
    e: &EndoMap<K>,
    test_space: &[K],
) -> Result<(EndoMap<K>, EndoMap<K>), BraidingError> {
    e.spectrum_or_err()?;
    e.check_spectrum(test_space)?;
    let inner = e.clone();
    let mut semi = EndoMap::new(format!("{}^s", e.name), e.shift, move |k: &K| {
        let v = Vector::basis(k.clone());
        let mut out = Vector::zero();
        for (d, p) in inner.eigencomponents(&v).expect("spectrum verified") {
            out.add_scaled(&p, &DualScalar::from_gauss(d));
        }
        out
    });
    semi.spectrum = e
        .spectrum
        .as_ref()
        .map(|s| s.iter().map(|(d, _)| (d.clone(), 1)).collect());
    semi.eigen_hint = e.eigen_hint.clone();
    let mut nil = e.minus(&semi, format!("{}^n", e.name));
    let order = e.spectrum.as_ref().map(|s| s.iter().map(|x| x.1).max().unwrap_or(1)).unwrap_or(1);
    nil.spectrum = Some(vec![(GaussScalar::zero(), order)]);
    nil.eigen_hint = Some(Arc::new(|_| Some(GaussScalar::zero())));
    Ok((semi, nil))
}

/// One generalized eigencomponent of `S` on a tensor.
#[derive(Clone, Debug)]
pub struct SpectralComponent<K: GradedKey> {
    pub eigenvalue: GaussScalar,
    pub vector: Vector<(K, K)>,
    /// Smallest `m` with `(S^(n))^m v = 0`.
    pub nilpotent_order: u32,
}

/// A finite-dimensional braiding map.
#[derive(Clone, Debug)]
pub struct BraidingMap<K: GradedKey> {
    pub components: Vec<(EndoMap<K>, EndoMap<K>)>,
    pub nilpotent: bool,
}

/// One failed braiding condition.
#[derive(Clone, Debug, Serialize)]
pub struct BraidingDefect {
    pub kind: String,
    pub input: String,
    pub defect: Value,
}

impl<K: GradedKey> BraidingMap<K> {
    pub fn new(components: Vec<(EndoMap<K>, EndoMap<K>)>, nilpotent: bool) -> Self {
        BraidingMap { components, nilpotent }
    }

    pub fn zero() -> Self {
        BraidingMap { components: Vec::new(), nilpotent: false }
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn apply_pair(&self, a: &K, b: &K) -> Vector<(K, K)> {
        let mut out = Vector::zero();
        for (phi, psi) in &self.components {
            out.add_assign(&tensor(&phi.apply_key(a), &psi.apply_key(b)));
        }
        out
    }

    pub fn apply(&self, v: &Vector<(K, K)>) -> Vector<(K, K)> {
        v.map_linear(|(a, b)| self.apply_pair(a, b))
    }

    fn apply_swapped_pair(&self, a: &K, b: &K) -> Vector<(K, K)> {
        let mut out = Vector::zero();
        for (phi, psi) in &self.components {
            out.add_assign(&tensor(&psi.apply_key(a), &phi.apply_key(b)));
        }
        out
    }

    /// Symmetry, pairwise commutativity and vacuum annihilation on `test_space`.
    pub fn validate(&self, test_space: &[K], vacuum: &K) -> Vec<BraidingDefect> {
        let mut out = Vec::new();
        for a in test_space {
            for b in test_space {
                let d = self.apply_pair(a, b).difference(&self.apply_swapped_pair(a, b));
                if !d.is_zero() {
                    out.push(BraidingDefect {
                        kind: "symmetry".into(),
                        input: format!("{a} (x) {b}"),
                        defect: serde_json::to_value(&d).unwrap_or(Value::Null),
                    });
                }
            }
        }
        let ops: Vec<&EndoMap<K>> = self.components.iter().flat_map(|(p, q)| [p, q]).collect();
        for (i, x) in ops.iter().enumerate() {
            for y in ops.iter().skip(i + 1) {
                for k in test_space {
                    let v = Vector::basis(k.clone());
                    let d = x.apply(&y.apply(&v)).difference(&y.apply(&x.apply(&v)));
                    if !d.is_zero() {
                        out.push(BraidingDefect {
                            kind: "commutativity".into(),
                            input: format!("[{}, {}] {k}", x.name, y.name),
                            defect: serde_json::to_value(&d).unwrap_or(Value::Null),
                        });
                    }
                }
            }
        }
        for op in &ops {
            let d = op.apply_key(vacuum);
            if !d.is_zero() {
                out.push(BraidingDefect {
                    kind: "vacuum".into(),
                    input: format!("{} {vacuum}", op.name),
                    defect: serde_json::to_value(&d).unwrap_or(Value::Null),
                });
            }
        }
        out
    }

    /// Joint generalized eigencomponents of `S` on `a ⊗ b`.
    ///
    /// Each factor is split into joint generalized eigenspaces of the
    /// commuting components; the semisimple eigenvalue on a product of such
    /// pieces is `Σᵢ αᵢβᵢ`.
    pub fn decompose_pair(&self, a: &K, b: &K) -> Result<Vec<SpectralComponent<K>>, BraidingError> {
        let pair = tensor(&Vector::basis(a.clone()), &Vector::basis(b.clone()));
        if self.components.is_empty() {
            return Ok(vec![SpectralComponent {
                eigenvalue: GaussScalar::zero(),
                vector: pair,
                nilpotent_order: 1,
            }]);
        }
        let lefts = joint_split(self.components.iter().map(|c| &c.0), &Vector::basis(a.clone()))?;
        let rights = joint_split(self.components.iter().map(|c| &c.1), &Vector::basis(b.clone()))?;
        let mut groups: BTreeMap<GaussScalar, Vector<(K, K)>> = BTreeMap::new();
        for (alphas, va) in &lefts {
            for (betas, vb) in &rights {
                let mut d = GaussScalar::zero();
                for (x, y) in alphas.iter().zip(betas) {
                    d = &d + &(x * y);
                }
                groups.entry(d).or_default().add_assign(&tensor(va, vb));
            }
        }
        let bound = self.nilpotent_bound();
        let mut out = Vec::new();
        for (d, v) in groups {
            if v.is_zero() {
                continue;
            }
            let mut m = 0;
            let mut cur = v.clone();
            while !cur.is_zero() {
                m += 1;
                if m > bound {
                    return Err(BraidingError::SpectrumMismatch {
                        op: "S".into(),
                        witness: format!("{a} (x) {b}"),
                    });
                }
                cur = self.nilpotent_apply(&d, &cur);
            }
            out.push(SpectralComponent { eigenvalue: d, vector: v, nilpotent_order: m.max(1) });
        }
        Ok(out)
    }

    fn nilpotent_bound(&self) -> u32 {
        self.components
            .iter()
            .map(|(p, q)| order_of(p) + order_of(q))
            .sum::<u32>()
            + 1
    }

    /// `S^(n) v = (S − d) v` on a generalized `d`-eigenvector.
    pub fn nilpotent_apply(&self, d: &GaussScalar, v: &Vector<(K, K)>) -> Vector<(K, K)> {
        self.apply(v).difference(&v.scaled(&DualScalar::from_gauss(d.clone())))
    }

    pub fn nilpotent_pow(&self, d: &GaussScalar, v: &Vector<(K, K)>, t: u32) -> Vector<(K, K)> {
        (0..t).fold(v.clone(), |acc, _| self.nilpotent_apply(d, &acc))
    }

    /// `z^S (a ⊗ b) = Σ_i z^{d_i} Σ_t ζ^t/t! (S^(n))^t v_i`.
    pub fn z_pow_s(&self, a: &K, b: &K) -> Result<LogSeries<Vector<(K, K)>, 1>, BraidingError> {
        let mut out = LogSeries::zero();
        for comp in self.decompose_pair(a, b)? {
            let mut cur = comp.vector.clone();
            let mut fact = 1i64;
            for t in 0..comp.nilpotent_order {
                if t > 0 {
                    cur = self.nilpotent_apply(&comp.eigenvalue, &cur);
                    fact *= t as i64;
                }
                out.add_term(
                    crate::logseries::LogMonomial::new([Exponent(comp.eigenvalue.clone())], [t]),
                    cur.scaled(&DualScalar::rational(1, fact)),
                );
            }
        }
        Ok(out)
    }
}

fn order_of<K: GradedKey>(e: &EndoMap<K>) -> u32 {
    e.spectrum
        .as_ref()
        .map(|s| s.iter().map(|x| x.1).max().unwrap_or(1))
        .unwrap_or(1)
}

type JointPieces<K> = Vec<(Vec<GaussScalar>, Vector<K>)>;

fn joint_split<'a, K: GradedKey>(
    ops: impl Iterator<Item = &'a EndoMap<K>>,
    v: &Vector<K>,
) -> Result<JointPieces<K>, BraidingError> {
    let mut pieces: JointPieces<K> = vec![(Vec::new(), v.clone())];
    for op in ops {
        let mut next = Vec::new();
        for (labels, piece) in pieces {
            for (d, part) in op.eigencomponents(&piece)? {
                let mut l = labels.clone();
                l.push(d);
                next.push((l, part));
            }
        }
        pieces = next;
    }
    Ok(pieces)
}
