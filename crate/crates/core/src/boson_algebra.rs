//! Exact symbolic algebra of multi-mode bosonic ladder operators.
//!
//! Every [`BosonPolynomial`] is stored in canonical normal-ordered form: within
//! each mode all creation operators sit to the left of all annihilation
//! operators, and factors on different modes commute. Products apply
//! `[a_i, a_j†] = δ_ij` exactly; the commutator-generated constants are small
//! integers computed in integer arithmetic before being lifted to `Complex64`.
//!
//! Modes are 0-based. Replica (copy) `k` of a multicopy observable lives on
//! mode `k - 1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitarity_defect, CMatrix, I};

/// Highest mode index + 1 that fits in a packed monomial key.
pub const MAX_MODES: usize = 8;
/// Highest exponent of `a†` or `a` per mode in a packed monomial key.
pub const MAX_POWER: u8 = 15;
/// Coefficients below this magnitude are dropped after arithmetic.
pub const PRUNE_EPS: f64 = 1e-14;

/// A normal-ordered product `Π_i a_i†^{k_i} a_i^{l_i}` without coefficient.
///
/// Packed into a `u64`: mode `i` owns bits `8i..8i+8`, the low nibble holding
/// the creation power and the high nibble the annihilation power.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BosonMonomial(u64);

impl BosonMonomial {
    pub const ONE: BosonMonomial = BosonMonomial(0);

    /// Builds a monomial from `(mode, dagger_power, plain_power)` triples.
    /// Repeated modes accumulate their exponents (factors are assumed already
    /// normal ordered, no commutators are generated).
    ///
    /// Panics when a mode index or exponent exceeds the packed-key limits.
    pub fn from_powers(powers: &[(usize, u8, u8)]) -> Self {
        let mut m = BosonMonomial::ONE;
        for &(mode, dag, pow) in powers {
            let (d0, p0) = m.powers(mode);
            m = m.with_powers(mode, d0 + dag, p0 + pow);
        }
        m
    }

    /// `(dagger_power, plain_power)` on `mode`.
    pub fn powers(self, mode: usize) -> (u8, u8) {
        if mode >= MAX_MODES {
            return (0, 0);
        }
        let byte = (self.0 >> (8 * mode)) & 0xff;
        ((byte & 0xf) as u8, (byte >> 4) as u8)
    }

    fn with_powers(self, mode: usize, dag: u8, pow: u8) -> Self {
        assert!(
            mode < MAX_MODES,
            "mode {mode} exceeds the packed monomial limit of {MAX_MODES} modes"
        );
        assert!(
            dag <= MAX_POWER && pow <= MAX_POWER,
            "exponent ({dag}, {pow}) on mode {mode} exceeds {MAX_POWER}"
        );
        let shift = 8 * mode;
        let cleared = self.0 & !(0xffu64 << shift);
        BosonMonomial(cleared | (((pow as u64) << 4 | dag as u64) << shift))
    }

    /// Non-trivial `(mode, dagger_power, plain_power)` factors in mode order.
    pub fn factors(self) -> impl Iterator<Item = (usize, u8, u8)> {
        (0..MAX_MODES).filter_map(move |m| {
            let (d, p) = self.powers(m);
            (d != 0 || p != 0).then_some((m, d, p))
        })
    }

    pub fn is_one(self) -> bool {
        self.0 == 0
    }

    /// Total number of ladder factors.
    pub fn degree(self) -> u32 {
        self.factors().map(|(_, d, p)| (d + p) as u32).sum()
    }

    /// Hermitian conjugate: `a†^k a^l -> a†^l a^k` on every mode.
    pub fn dagger(self) -> Self {
        let mut out = BosonMonomial::ONE;
        for (m, d, p) in self.factors() {
            out = out.with_powers(m, p, d);
        }
        out
    }

    pub fn max_mode(self) -> Option<usize> {
        self.factors().map(|(m, _, _)| m).last()
    }

    /// Moves each factor to `map(mode)`. `map` must be injective on the
    /// modes present.
    pub fn relabel(self, map: impl Fn(usize) -> usize) -> Self {
        let mut out = BosonMonomial::ONE;
        for (m, d, p) in self.factors() {
            let target = map(m);
            debug_assert_eq!(out.powers(target), (0, 0), "relabel map is not injective");
            out = out.with_powers(target, d, p);
        }
        out
    }

    /// Exponent difference `dagger - plain` summed over modes; rotations act on
    /// a monomial through `e^{i θ (k - l)}`.
    pub fn phase_weight(self) -> i32 {
        self.factors().map(|(_, d, p)| d as i32 - p as i32).sum()
    }
}

impl fmt::Debug for BosonMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for BosonMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (m, d, p) in self.factors() {
            for (pow, dag) in [(d, true), (p, false)] {
                if pow == 0 {
                    continue;
                }
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                write!(f, "a{m}{}", if dag { "†" } else { "" })?;
                if pow > 1 {
                    write!(f, "^{pow}")?;
                }
            }
        }
        Ok(())
    }
}

/// A single creation or annihilation operator, used to spell out
/// non-normal-ordered words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn a(mode: usize) -> Self {
        Ladder { mode, dagger: false }
    }

    pub fn ad(mode: usize) -> Self {
        Ladder { mode, dagger: true }
    }
}

/// Finite sum of normal-ordered monomials with complex coefficients.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<TermJson>", try_from = "Vec<TermJson>")]
pub struct BosonPolynomial {
    terms: BTreeMap<BosonMonomial, Complex64>,
}

impl BosonPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::term(BosonMonomial::ONE, c)
    }

    pub fn term(monomial: BosonMonomial, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(monomial, c);
        p
    }

    pub fn annihilation(mode: usize) -> Self {
        Self::term(BosonMonomial::from_powers(&[(mode, 0, 1)]), Complex64::new(1.0, 0.0))
    }

    pub fn creation(mode: usize) -> Self {
        Self::term(BosonMonomial::from_powers(&[(mode, 1, 0)]), Complex64::new(1.0, 0.0))
    }

    /// `a_mode† a_mode`.
    pub fn number(mode: usize) -> Self {
        Self::term(BosonMonomial::from_powers(&[(mode, 1, 1)]), Complex64::new(1.0, 0.0))
    }

    /// `a_k† a_l`.
    pub fn hop(k: usize, l: usize) -> Self {
        Self::term(
            BosonMonomial::from_powers(&[(k, 1, 0), (l, 0, 1)]),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (BosonMonomial, Complex64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, monomial: BosonMonomial, c: Complex64) {
        let slot = self.terms.entry(monomial).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if slot.norm() < PRUNE_EPS {
            self.terms.remove(&monomial);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (BosonMonomial, Complex64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, monomial: BosonMonomial) -> Complex64 {
        self.terms.get(&monomial).copied().unwrap_or_default()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(self.terms().map(|(m, v)| (m, v * c)))
    }

    /// Hermitian conjugate.
    pub fn dagger(&self) -> Self {
        Self::from_terms(self.terms().map(|(m, c)| (m.dagger(), c.conj())))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.approx_eq(&self.dagger(), tol)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.difference(other, tol).is_empty()
    }

    /// Monomials whose coefficients differ by more than `tol`, as
    /// `(monomial, self_coefficient, other_coefficient)`.
    pub fn difference(&self, other: &Self, tol: f64) -> Vec<(BosonMonomial, Complex64, Complex64)> {
        let mut keys: Vec<BosonMonomial> = self.terms.keys().chain(other.terms.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter_map(|m| {
                let a = self.coefficient(m);
                let b = other.coefficient(m);
                ((a - b).norm() > tol).then_some((m, a, b))
            })
            .collect()
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.terms.keys().filter_map(|m| m.max_mode()).max()
    }

    /// Number of modes spanned, i.e. `max_mode + 1` (0 for constants).
    pub fn mode_count(&self) -> usize {
        self.max_mode().map_or(0, |m| m + 1)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Highest `a†` or `a` power on a single mode; the truncation margin an
    /// evaluation of this polynomial needs.
    pub fn max_mode_power(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.factors().map(|(_, d, p)| d.max(p) as u32))
            .max()
            .unwrap_or(0)
    }

    /// Operator product `self · other`, normal ordered with the canonical
    /// commutation relations.
    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                for (m, w) in monomial_product(m1, m2) {
                    out.add_term(m, c1 * c2 * w);
                }
            }
        }
        out
    }

    /// Term-by-term normal-ordered product `:self · other:`. Factors are
    /// rearranged as if they commuted, so no commutator terms appear.
    pub fn normal_product(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                let mut m = m1;
                for (mode, d, p) in m2.factors() {
                    let (d0, p0) = m.powers(mode);
                    m = m.with_powers(mode, d0 + d, p0 + p);
                }
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.multiply(self))
    }

    /// Moves mode `i` to `map(i)`; `map` must be injective on the modes used.
    pub fn relabel_modes(&self, map: impl Fn(usize) -> usize) -> Self {
        Self::from_terms(self.terms().map(|(m, c)| (m.relabel(&map), c)))
    }

    /// Substitutes `a_i -> Σ_j u_ij a_j` and `a_i† -> Σ_j u*_ij a_j†`.
    ///
    /// If `self` is written in the output modes of a passive interferometer
    /// with mode matrix `u` (so `a' = u a`), the result is the same operator
    /// written in the input modes.
    pub fn transform_modes(&self, u: &ModeUnitary) -> Result<Self> {
        let dim = u.dim();
        if let Some(m) = self.max_mode() {
            if m >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m + 1 });
            }
        }
        let mut cache: HashMap<(usize, bool, u8), BosonPolynomial> = HashMap::new();
        let mut power_of = |mode: usize, dagger: bool, n: u8| -> BosonPolynomial {
            cache
                .entry((mode, dagger, n))
                .or_insert_with(|| {
                    let lin = Self::from_terms((0..dim).map(|j| {
                        let coeff = u.matrix[(mode, j)];
                        if dagger {
                            (BosonMonomial::from_powers(&[(j, 1, 0)]), coeff.conj())
                        } else {
                            (BosonMonomial::from_powers(&[(j, 0, 1)]), coeff)
                        }
                    }));
                    lin.pow(n as u32)
                })
                .clone()
        };
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            let mut creation = Self::one();
            let mut annihilation = Self::one();
            for (mode, d, p) in m.factors() {
                if d > 0 {
                    creation = creation.multiply(&power_of(mode, true, d));
                }
                if p > 0 {
                    annihilation = annihilation.multiply(&power_of(mode, false, p));
                }
            }
            // all creation operators already left of all annihilation ones
            out += &creation.multiply(&annihilation).scale(c);
        }
        Ok(out)
    }
}

/// Exact normal ordering of `a^l a†^k` on one mode:
/// `Σ_j C(l,j) C(k,j) j! a†^{k-j} a^{l-j}`, weights as exact integers.
fn reorder_weights(l: u8, k: u8) -> Vec<(u8, u64)> {
    let binom = |n: u64, r: u64| -> u64 {
        let mut acc = 1u64;
        for i in 0..r {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    };
    (0..=l.min(k))
        .map(|j| {
            let fact: u64 = (1..=j as u64).product();
            (j, binom(l as u64, j as u64) * binom(k as u64, j as u64) * fact)
        })
        .collect()
}

fn monomial_product(m1: BosonMonomial, m2: BosonMonomial) -> Vec<(BosonMonomial, Complex64)> {
    let mut acc: Vec<(BosonMonomial, u64)> = vec![(BosonMonomial::ONE, 1)];
    for mode in 0..MAX_MODES {
        let (k1, l1) = m1.powers(mode);
        let (k2, l2) = m2.powers(mode);
        if k1 + l1 + k2 + l2 == 0 {
            continue;
        }
        let weights = reorder_weights(l1, k2);
        let mut next = Vec::with_capacity(acc.len() * weights.len());
        for &(m, w) in &acc {
            for &(j, wj) in &weights {
                next.push((m.with_powers(mode, k1 + k2 - j, l1 + l2 - j), w * wj));
            }
        }
        acc = next;
    }
    acc.into_iter()
        .map(|(m, w)| (m, Complex64::new(w as f64, 0.0)))
        .collect()
}

impl fmt::Debug for BosonPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for BosonPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "({}) {m}", c.re)?;
            } else {
                write!(f, "({}{:+}i) {m}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

impl Add<&BosonPolynomial> for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn add(self, rhs: &BosonPolynomial) -> BosonPolynomial {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for BosonPolynomial {
    type Output = BosonPolynomial;
    fn add(mut self, rhs: BosonPolynomial) -> BosonPolynomial {
        self += &rhs;
        self
    }
}

impl AddAssign<&BosonPolynomial> for BosonPolynomial {
    fn add_assign(&mut self, rhs: &BosonPolynomial) {
        for (m, c) in rhs.terms() {
            self.add_term(m, c);
        }
    }
}

impl Sub<&BosonPolynomial> for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn sub(self, rhs: &BosonPolynomial) -> BosonPolynomial {
        let mut out = self.clone();
        for (m, c) in rhs.terms() {
            out.add_term(m, -c);
        }
        out
    }
}

impl Sub for BosonPolynomial {
    type Output = BosonPolynomial;
    fn sub(self, rhs: BosonPolynomial) -> BosonPolynomial {
        &self - &rhs
    }
}

impl Neg for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn neg(self) -> BosonPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<&BosonPolynomial> for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn mul(self, rhs: &BosonPolynomial) -> BosonPolynomial {
        self.multiply(rhs)
    }
}

impl Mul for BosonPolynomial {
    type Output = BosonPolynomial;
    fn mul(self, rhs: BosonPolynomial) -> BosonPolynomial {
        self.multiply(&rhs)
    }
}

impl Mul<Complex64> for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn mul(self, rhs: Complex64) -> BosonPolynomial {
        self.scale(rhs)
    }
}

impl Mul<f64> for &BosonPolynomial {
    type Output = BosonPolynomial;
    fn mul(self, rhs: f64) -> BosonPolynomial {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Mul<f64> for BosonPolynomial {
    type Output = BosonPolynomial;
    fn mul(self, rhs: f64) -> BosonPolynomial {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// JSON form of one polynomial term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub modes: Vec<ModePowerJson>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModePowerJson {
    pub mode: usize,
    pub dag_pow: u8,
    pub pow: u8,
}

impl From<BosonPolynomial> for Vec<TermJson> {
    fn from(p: BosonPolynomial) -> Self {
        p.terms()
            .map(|(m, c)| TermJson {
                modes: m
                    .factors()
                    .map(|(mode, dag_pow, pow)| ModePowerJson { mode, dag_pow, pow })
                    .collect(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }
}

impl TryFrom<Vec<TermJson>> for BosonPolynomial {
    type Error = Error;

    fn try_from(terms: Vec<TermJson>) -> Result<Self> {
        let mut p = BosonPolynomial::zero();
        for t in terms {
            let mut m = BosonMonomial::ONE;
            for f in &t.modes {
                if f.mode >= MAX_MODES {
                    return Err(Error::ModeOutOfRange { mode: f.mode, modes: MAX_MODES });
                }
                let (d0, p0) = m.powers(f.mode);
                if d0 + f.dag_pow > MAX_POWER || p0 + f.pow > MAX_POWER {
                    return Err(Error::InvalidArgument(format!(
                        "exponent on mode {} exceeds {MAX_POWER}",
                        f.mode
                    )));
                }
                m = m.with_powers(f.mode, d0 + f.dag_pow, p0 + f.pow);
            }
            p.add_term(m, Complex64::new(t.re, t.im));
        }
        Ok(p)
    }
}

/// Exact normal ordering of a sum of operator words, commutators included.
pub fn normal_order(words: &[(Complex64, Vec<Ladder>)]) -> BosonPolynomial {
    let mut out = BosonPolynomial::zero();
    for (c, word) in words {
        let prod = word.iter().fold(BosonPolynomial::one(), |acc, f| {
            let factor = if f.dagger {
                BosonPolynomial::creation(f.mode)
            } else {
                BosonPolynomial::annihilation(f.mode)
            };
            acc.multiply(&factor)
        });
        out += &prod.scale(*c);
    }
    out
}

/// Term-by-term normal ordering `:·:` of a sum of operator words: each word
/// is rearranged with creation operators first, coefficient unchanged and
/// no commutator terms generated.
pub fn term_normal_order(words: &[(Complex64, Vec<Ladder>)]) -> BosonPolynomial {
    let mut out = BosonPolynomial::zero();
    for (c, word) in words {
        let mut m = BosonMonomial::ONE;
        for f in word {
            let (d, p) = m.powers(f.mode);
            m = if f.dagger {
                m.with_powers(f.mode, d + 1, p)
            } else {
                m.with_powers(f.mode, d, p + 1)
            };
        }
        out.add_term(m, *c);
    }
    out
}

/// Components of the two-mode Schwinger angular momentum; `Zero` is the
/// Casimir-related operator `L0 = (n_k + n_l) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchwingerComponent {
    X,
    Y,
    Z,
    #[serde(rename = "0")]
    Zero,
}

/// Schwinger operator on the ordered mode pair `(k, l)`:
/// `Lx = ½(a_l†a_k + a_k†a_l)`, `Ly = (i/2)(a_l†a_k − a_k†a_l)`,
/// `Lz = ½(a_k†a_k − a_l†a_l)`, `L0 = ½(a_k†a_k + a_l†a_l)`.
pub fn schwinger(component: SchwingerComponent, k: usize, l: usize) -> Result<BosonPolynomial> {
    if k == l {
        return Err(Error::InvalidArgument(format!(
            "Schwinger operators need two distinct modes, got ({k}, {l})"
        )));
    }
    if k.max(l) >= MAX_MODES {
        return Err(Error::ModeOutOfRange { mode: k.max(l), modes: MAX_MODES });
    }
    let half = Complex64::new(0.5, 0.0);
    let p = match component {
        SchwingerComponent::X => (&BosonPolynomial::hop(l, k) + &BosonPolynomial::hop(k, l)).scale(half),
        SchwingerComponent::Y => (&BosonPolynomial::hop(l, k) - &BosonPolynomial::hop(k, l)).scale(I * 0.5),
        SchwingerComponent::Z => (&BosonPolynomial::number(k) - &BosonPolynomial::number(l)).scale(half),
        SchwingerComponent::Zero => (&BosonPolynomial::number(k) + &BosonPolynomial::number(l)).scale(half),
    };
    Ok(p)
}

/// Passive linear-optics transformation of mode operators, `a' = u a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: CMatrix,
}

impl ModeUnitary {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let defect = unitarity_defect(&matrix);
        if defect > Self::TOLERANCE {
            return Err(Error::NotUnitary { defect });
        }
        Ok(ModeUnitary { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        ModeUnitary { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        ModeUnitary { matrix: self.matrix.adjoint() }
    }

    /// The transformation obtained by applying `self` first and `later` second.
    pub fn then(&self, later: &ModeUnitary) -> Result<Self> {
        if later.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: later.dim() });
        }
        Ok(ModeUnitary { matrix: &later.matrix * &self.matrix })
    }

    /// Embeds a `k × k` block acting on `modes` into a `dim`-mode identity.
    pub fn embed(&self, dim: usize, modes: &[usize]) -> Result<Self> {
        if modes.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: modes.len() });
        }
        if let Some(&bad) = modes.iter().find(|&&m| m >= dim) {
            return Err(Error::ModeOutOfRange { mode: bad, modes: dim });
        }
        let mut full = CMatrix::identity(dim, dim);
        for (i, &mi) in modes.iter().enumerate() {
            for (j, &mj) in modes.iter().enumerate() {
                full[(mi, mj)] = self.matrix[(i, j)];
            }
        }
        ModeUnitary::new(full)
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

/// Free function form of [`BosonPolynomial::transform_modes`].
pub fn transform_modes(p: &BosonPolynomial, u: &ModeUnitary) -> Result<BosonPolynomial> {
    p.transform_modes(u)
}

/// Group averaged over in [`operator_determinant`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationGroup {
    AllPermutations,
    EvenPermutations,
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    use itertools::Itertools;
    (0..n)
        .permutations(n)
        .map(|p| {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            let sign = if inversions % 2 == 0 { 1 } else { -1 };
            (p, sign)
        })
        .collect()
}

/// Elements of the requested permutation group on `0..n`.
pub fn group_elements(n: usize, group: PermutationGroup) -> Vec<Vec<usize>> {
    permutations(n)
        .into_iter()
        .filter(|(_, s)| group == PermutationGroup::AllPermutations || *s == 1)
        .map(|(p, _)| p)
        .collect()
}

/// Symmetrized determinant of an operator matrix.
///
/// `entries[i][j]` are single-mode templates written on mode 0. For every
/// group element `σ`, row `i` is placed on mode `row_to_mode[σ(i)]` and the
/// Leibniz determinant is expanded; the result is averaged over the group.
/// Rows sit on distinct modes, so the factors of each Leibniz product commute.
pub fn operator_determinant(
    entries: &[Vec<BosonPolynomial>],
    row_to_mode: &[usize],
    group: PermutationGroup,
) -> Result<BosonPolynomial> {
    let n = entries.len();
    if let Some(row) = entries.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    if row_to_mode.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: row_to_mode.len() });
    }
    let mut seen = row_to_mode.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n {
        return Err(Error::InvalidArgument("duplicate mode assignment in row_to_mode".into()));
    }
    if let Some(&bad) = row_to_mode.iter().find(|&&m| m >= MAX_MODES) {
        return Err(Error::ModeOutOfRange { mode: bad, modes: MAX_MODES });
    }
    if entries.iter().flatten().any(|e| e.max_mode().unwrap_or(0) > 0) {
        return Err(Error::InvalidArgument(
            "operator-matrix entries must be single-mode templates on mode 0".into(),
        ));
    }

    let leibniz = permutations(n);
    let elements = group_elements(n, group);
    let mut total = BosonPolynomial::zero();
    for sigma in &elements {
        let placed: Vec<Vec<BosonPolynomial>> = entries
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let target = row_to_mode[sigma[i]];
                row.iter().map(|e| e.relabel_modes(|_| target)).collect()
            })
            .collect();
        for (perm, sign) in &leibniz {
            let prod = (0..n).fold(BosonPolynomial::one(), |acc, i| acc.multiply(&placed[i][perm[i]]));
            total += &prod.scale(Complex64::new(*sign as f64, 0.0));
        }
    }
    Ok(total.scale(Complex64::new(1.0 / elements.len() as f64, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};

    fn mono(p: &[(usize, u8, u8)]) -> BosonMonomial {
        BosonMonomial::from_powers(p)
    }

    #[test]
    fn annihilation_times_creation_picks_up_identity() {
        let a = BosonPolynomial::annihilation(0);
        let ad = BosonPolynomial::creation(0);
        let expected = &BosonPolynomial::number(0) + &BosonPolynomial::one();
        assert_eq!(a.multiply(&ad), expected);
        assert_eq!(ad.multiply(&a), BosonPolynomial::number(0));
    }

    #[test]
    fn number_squared() {
        // (a†a)(a†a) = a†(a a†)a = a†(a†a + 1)a = a†²a² + a†a
        let n = BosonPolynomial::number(0);
        let expected = BosonPolynomial::from_terms([
            (mono(&[(0, 2, 2)]), real(1.0)),
            (mono(&[(0, 1, 1)]), real(1.0)),
        ]);
        assert_eq!(n.multiply(&n), expected);
    }

    #[test]
    fn reorder_weights_match_hand_expansion() {
        // a² a†² = a†²a² + 4 a†a + 2
        let w = reorder_weights(2, 2);
        assert_eq!(w, vec![(0, 1), (1, 4), (2, 2)]);
    }

    #[test]
    fn term_normal_order_drops_commutators() {
        let words = vec![(real(1.0), vec![Ladder::a(0), Ladder::ad(0)])];
        assert_eq!(term_normal_order(&words), BosonPolynomial::number(0));
        let exact = normal_order(&words);
        assert_eq!(exact, &BosonPolynomial::number(0) + &BosonPolynomial::one());
        let fixed = vec![(real(1.0), vec![Ladder::ad(0), Ladder::a(0)])];
        assert_eq!(term_normal_order(&fixed), BosonPolynomial::number(0));
    }

    #[test]
    fn schwinger_z_on_first_pair() {
        let lz = schwinger(SchwingerComponent::Z, 0, 1).unwrap();
        let expected = BosonPolynomial::from_terms([
            (mono(&[(0, 1, 1)]), real(0.5)),
            (mono(&[(1, 1, 1)]), real(-0.5)),
        ]);
        assert_eq!(lz, expected);
        assert!(schwinger(SchwingerComponent::X, 2, 2).is_err());
    }

    #[test]
    fn schwinger_commutators() {
        let l = |c| schwinger(c, 0, 1).unwrap();
        let comm = |p: &BosonPolynomial, q: &BosonPolynomial| &p.multiply(q) - &q.multiply(p);
        use SchwingerComponent::*;
        let lxy = comm(&l(X), &l(Y));
        assert!(lxy.approx_eq(&l(Z).scale(I), 1e-14));
        assert!(comm(&l(Y), &l(Z)).approx_eq(&l(X).scale(I), 1e-14));
        assert!(comm(&l(Z), &l(X)).approx_eq(&l(Y).scale(I), 1e-14));
        for comp in [X, Y, Z] {
            assert!(comm(&l(comp), &l(Zero)).is_empty());
        }
    }

    #[test]
    fn two_mode_products_commute_across_modes() {
        let p = &BosonPolynomial::hop(0, 1) + &BosonPolynomial::number(2);
        let q = BosonPolynomial::creation(3);
        assert_eq!(p.multiply(&q), q.multiply(&p));
    }

    #[test]
    fn dagger_swaps_powers_and_conjugates() {
        let p = BosonPolynomial::term(mono(&[(0, 2, 1), (1, 0, 3)]), c(1.0, 2.0));
        let d = p.dagger();
        assert_eq!(d.coefficient(mono(&[(0, 1, 2), (1, 3, 0)])), c(1.0, -2.0));
    }

    #[test]
    fn json_shape() {
        let p = BosonPolynomial::term(mono(&[(1, 2, 0)]), c(0.5, -1.0));
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"modes": [{"mode": 1, "dag_pow": 2, "pow": 0}], "re": 0.5, "im": -1.0}])
        );
        let back: BosonPolynomial = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn mode_unitary_rejects_non_unitary() {
        let m = CMatrix::from_row_slice(2, 2, &[real(1.0), real(1.0), real(0.0), real(1.0)]);
        assert!(matches!(ModeUnitary::new(m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn transform_dimension_mismatch() {
        let p = BosonPolynomial::number(2);
        assert!(p.transform_modes(&ModeUnitary::identity(2)).is_err());
    }

    #[test]
    fn determinant_rejects_bad_input() {
        let e = vec![vec![BosonPolynomial::one(), BosonPolynomial::one()]];
        assert!(operator_determinant(&e, &[0], PermutationGroup::AllPermutations).is_err());
        let sq = vec![
            vec![BosonPolynomial::one(), BosonPolynomial::annihilation(0)],
            vec![BosonPolynomial::creation(0), BosonPolynomial::number(0)],
        ];
        assert!(operator_determinant(&sq, &[1, 1], PermutationGroup::AllPermutations).is_err());
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(group_elements(2, PermutationGroup::AllPermutations).len(), 2);
        assert_eq!(group_elements(3, PermutationGroup::AllPermutations).len(), 6);
        assert_eq!(group_elements(4, PermutationGroup::AllPermutations).len(), 24);
        assert_eq!(group_elements(4, PermutationGroup::EvenPermutations).len(), 12);
    }
}
