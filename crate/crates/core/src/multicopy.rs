//! Multicopy observables `B_S`: Hermitian operators on `|S|` replicas whose
//! expectation on `ρ^⊗k` equals the principal minor `d_S`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boson_algebra::{
    operator_determinant, schwinger, BosonMonomial, BosonPolynomial, ModeUnitary, PermutationGroup,
    SchwingerComponent as Sc,
};
use crate::error::{Error, Result};
use crate::fock::{real_part_checked, FockDensityOperator};
use crate::linalg::{real, CMatrix, I};
use crate::minors::{normalize_subset, subset_label};
use crate::moments::{entry_powers, moment, MAX_DIM};

/// Coefficient noise tolerated in symbolic comparisons.
pub const SYMBOLIC_TOL: f64 = 1e-12;

/// Which closed angular-momentum form an observable is known to have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompactFormTag {
    L0MinusLx,
    TwoL0sqMinusLxsq,
    TwoLysqNormal,
    B123Form,
    F1235Form,
    B25Form,
    None,
}

impl CompactFormTag {
    fn for_subset(label: &str) -> Self {
        match label {
            "12" => CompactFormTag::L0MinusLx,
            "14" => CompactFormTag::TwoL0sqMinusLxsq,
            "23" => CompactFormTag::TwoLysqNormal,
            "123" => CompactFormTag::B123Form,
            "1235" => CompactFormTag::F1235Form,
            "25" => CompactFormTag::B25Form,
            _ => CompactFormTag::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MulticopyObservable {
    subset: Vec<usize>,
    copies: usize,
    compact_form_tag: CompactFormTag,
    polynomial: BosonPolynomial,
}

impl MulticopyObservable {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn label(&self) -> String {
        subset_label(&self.subset)
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn tag(&self) -> CompactFormTag {
        self.compact_form_tag
    }

    pub fn polynomial(&self) -> &BosonPolynomial {
        &self.polynomial
    }
}

/// Single-mode template `a†^k a^l` on mode 0.
fn template(k: usize, l: usize) -> BosonPolynomial {
    let mut powers = Vec::new();
    if k > 0 || l > 0 {
        powers.push((0, k as u8, l as u8));
    }
    BosonPolynomial::term(BosonMonomial::from_powers(&powers), real(1.0))
}

/// Operator matrix of `S`: entry `(i, j)` is the normally-ordered product of
/// the conjugated row operator and the column operator, on a single mode.
pub fn operator_matrix(subset: &[usize]) -> Result<Vec<Vec<BosonPolynomial>>> {
    subset
        .iter()
        .map(|&i| {
            subset
                .iter()
                .map(|&j| entry_powers(i, j).map(|(k, l)| template(k, l)))
                .collect()
        })
        .collect()
}

/// Symmetrized multicopy observable of the index set `S`, rows on replicas
/// `0..|S|`, averaged over all permutations.
pub fn build_multicopy(subset: &[usize]) -> Result<MulticopyObservable> {
    let s = normalize_subset(subset)?;
    if !(2..=4).contains(&s.len()) {
        return Err(Error::Unsupported(format!("multicopy observables need 2 to 4 indices, got {}", s.len())));
    }
    if let Some(&bad) = s.iter().find(|&&j| j > MAX_DIM) {
        return Err(Error::InvalidArgument(format!("index {bad} outside 1..={MAX_DIM}")));
    }
    let entries = operator_matrix(&s)?;
    let modes: Vec<usize> = (0..s.len()).collect();
    let polynomial = operator_determinant(&entries, &modes, PermutationGroup::AllPermutations)?;
    let label = subset_label(&s);
    Ok(MulticopyObservable {
        copies: s.len(),
        compact_form_tag: CompactFormTag::for_subset(&label),
        subset: s,
        polynomial,
    })
}

/// `⟨⟨B⟩⟩ = Tr(ρ^⊗k B)`, using that each monomial factorizes over replicas.
pub fn multicopy_expectation(rho: &FockDensityOperator, b: &MulticopyObservable) -> Result<f64> {
    product_expectation(rho, b.polynomial())
}

/// Expectation of any polynomial on `ρ ⊗ ρ ⊗ …` (as many copies as modes used).
pub fn product_expectation(rho: &FockDensityOperator, p: &BosonPolynomial) -> Result<f64> {
    if rho.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: rho.modes() });
    }
    let mut cache: HashMap<(u8, u8), Complex64> = HashMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    for (m, c) in p.terms() {
        let mut v = c;
        for (_, d, q) in m.factors() {
            let z = match cache.get(&(d, q)) {
                Some(z) => *z,
                None => {
                    let z = moment(rho, d as usize, q as usize)?;
                    cache.insert((d, q), z);
                    z
                }
            };
            v *= z;
        }
        total += v;
    }
    real_part_checked(total)
}

/// Same expectation through the explicit replica state `ρ^⊗k`.
pub fn multicopy_expectation_tensor(
    rho: &FockDensityOperator,
    b: &MulticopyObservable,
    dim_budget: usize,
) -> Result<f64> {
    let replicas = rho.tensor_power(b.copies(), dim_budget)?;
    real_part_checked(replicas.expect_polynomial(b.polynomial())?)
}

fn sch(c: Sc, k: usize, l: usize) -> BosonPolynomial {
    schwinger(c, k, l).expect("distinct in-range modes")
}

/// `f1235` as the sum over even permutations of `Lz^{σ1σ2} Ly^{σ3σ4}`.
pub fn f1235_even_permutations() -> BosonPolynomial {
    let mut f = BosonPolynomial::zero();
    for sigma in crate::boson_algebra::group_elements(4, PermutationGroup::EvenPermutations) {
        f += &sch(Sc::Z, sigma[0], sigma[1]).multiply(&sch(Sc::Y, sigma[2], sigma[3]));
    }
    f * (1.0 / 6f64.sqrt())
}

/// `f1235` as the six-term `Lz Ly + Ly Lz` pairing sum.
pub fn f1235_pairings() -> BosonPolynomial {
    let pairs = [((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2))];
    let mut f = BosonPolynomial::zero();
    for ((a, b), (c, d)) in pairs {
        f += &sch(Sc::Z, a, b).multiply(&sch(Sc::Y, c, d));
        f += &sch(Sc::Y, a, b).multiply(&sch(Sc::Z, c, d));
    }
    f * (2.0 / 6f64.sqrt())
}

/// `f1235` written out in ladder operators with the `−i/(2√6)` prefactor.
/// Each word uses `n` for `a†a`, `d` for `a†` and `a` for `a`, followed by
/// the 1-based replica.
pub fn f1235_ladder_form() -> BosonPolynomial {
    const WORDS: [&str; 24] = [
        "+n1d2a3", "-d1n2a3", "-n1a2d3", "+a1n2d3", "+d1a2n3", "-a1d2n3",
        "-n1d2a4", "+d1n2a4", "+n1d3a4", "-n2d3a4", "-d1n3a4", "+d2n3a4",
        "+n1a2d4", "-a1n2d4", "-n1a3d4", "+n2a3d4", "+a1n3d4", "-a2n3d4",
        "-d1a2n4", "+a1d2n4", "+d1a3n4", "-d2a3n4", "-a1d3n4", "+a2d3n4",
    ];
    let pref = -I / (2.0 * 6f64.sqrt());
    let mut f = BosonPolynomial::zero();
    for w in WORDS {
        let sign = if w.starts_with('-') { -1.0 } else { 1.0 };
        let body = w[1..].as_bytes();
        let powers: Vec<(usize, u8, u8)> = body
            .chunks(2)
            .map(|ch| {
                let mode = (ch[1] - b'1') as usize;
                match ch[0] {
                    b'n' => (mode, 1, 1),
                    b'd' => (mode, 1, 0),
                    _ => (mode, 0, 1),
                }
            })
            .collect();
        f.add_term(BosonMonomial::from_powers(&powers), pref * sign);
    }
    f
}

/// `:f† f:` for the given `f`.
pub fn b1235_from_f(f: &BosonPolynomial) -> BosonPolynomial {
    f.dagger().normal_product(f)
}

/// Compact angular-momentum expression associated with a tag.
pub fn compact_form(tag: CompactFormTag) -> Option<BosonPolynomial> {
    let p = match tag {
        CompactFormTag::L0MinusLx => &sch(Sc::Zero, 0, 1) - &sch(Sc::X, 0, 1),
        CompactFormTag::TwoL0sqMinusLxsq => {
            let l0 = sch(Sc::Zero, 0, 1);
            let lx = sch(Sc::X, 0, 1);
            (&l0.multiply(&l0) - &lx.multiply(&lx)) * 2.0
        }
        CompactFormTag::TwoLysqNormal => {
            let ly = sch(Sc::Y, 0, 1);
            ly.normal_product(&ly) * 2.0
        }
        CompactFormTag::B123Form => {
            let s = &(&sch(Sc::Y, 0, 1) + &sch(Sc::Y, 1, 2)) + &sch(Sc::Y, 2, 0);
            s.normal_product(&s) * (2.0 / 3.0)
        }
        CompactFormTag::F1235Form => b1235_from_f(&f1235_even_permutations()),
        CompactFormTag::B25Form => {
            let l0 = sch(Sc::Zero, 0, 1);
            let lz = sch(Sc::Z, 0, 1);
            let first = &l0 - &sch(Sc::X, 0, 1);
            let second = &l0.normal_product(&l0) - &lz.normal_product(&lz);
            first.normal_product(&second)
        }
        CompactFormTag::None => return None,
    };
    Some(p)
}

/// Outcome of a symbolic comparison; `mismatches` lists
/// `(monomial, built coefficient, compact coefficient)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactCheck {
    pub subset: String,
    pub tag: CompactFormTag,
    pub matches: bool,
    pub mismatches: Vec<(String, [f64; 2], [f64; 2])>,
}

fn compare(subset: String, tag: CompactFormTag, built: &BosonPolynomial, compact: &BosonPolynomial) -> CompactCheck {
    let mismatches: Vec<_> = built
        .difference(compact, SYMBOLIC_TOL)
        .into_iter()
        .map(|(m, x, y)| (m.to_string(), [x.re, x.im], [y.re, y.im]))
        .collect();
    CompactCheck { subset, tag, matches: mismatches.is_empty(), mismatches }
}

pub fn compact_form_check(b: &MulticopyObservable) -> Result<CompactCheck> {
    let compact = compact_form(b.tag())
        .ok_or_else(|| Error::Unsupported(format!("B{} has no compact form", b.label())))?;
    Ok(compare(b.label(), b.tag(), b.polynomial(), &compact))
}

/// Tensor product of two 2×2 Fourier transforms, `a' = u a`.
pub fn dft2x2_unitary() -> ModeUnitary {
    let h = 0.5;
    let rows = [[h, h, h, h], [h, -h, h, -h], [h, h, -h, -h], [h, -h, -h, h]];
    ModeUnitary::new(CMatrix::from_fn(4, 4, |i, j| real(rows[i][j]))).expect("orthogonal")
}

/// `−√(2/3) Σ Lx^{kl} Ly^{kl}` over the pairs `(2,3)`, `(3,4)`, `(4,2)` of
/// the output modes (0-based `(1,2)`, `(2,3)`, `(3,1)`).
pub fn f1235_output_form() -> BosonPolynomial {
    let mut f = BosonPolynomial::zero();
    for (k, l) in [(1, 2), (2, 3), (3, 1)] {
        f += &sch(Sc::X, k, l).multiply(&sch(Sc::Y, k, l));
    }
    f * -(2.0f64 / 3.0).sqrt()
}

/// Global sign relating two polynomials, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMatch {
    Equal,
    Negated,
    Different,
}

pub fn sign_match(p: &BosonPolynomial, q: &BosonPolynomial) -> SignMatch {
    if p.approx_eq(q, SYMBOLIC_TOL) {
        SignMatch::Equal
    } else if p.approx_eq(&-q, SYMBOLIC_TOL) {
        SignMatch::Negated
    } else {
        SignMatch::Different
    }
}

/// Rewrites `f1235` in the output modes of the 4-mode Fourier circuit and
/// compares with the `Lx Ly` scalar-product form.
pub fn f1235_output_check() -> Result<SignMatch> {
    let u = dft2x2_unitary();
    // a = u† a', so input operators expressed in the outputs use u†
    let in_outputs = f1235_even_permutations().transform_modes(&u.adjoint())?;
    Ok(sign_match(&in_outputs, &f1235_output_form()))
}

/// Three-replica rotation concentrating the mean field in mode 1.
pub fn three_copy_rotation() -> ModeUnitary {
    let (a, b, c) = (1.0 / 3f64.sqrt(), 1.0 / 2f64.sqrt(), 1.0 / 6f64.sqrt());
    let rows = [[a, a, a], [b, -b, 0.0], [c, c, -2.0 * c]];
    ModeUnitary::new(CMatrix::from_fn(3, 3, |i, j| real(rows[i][j]))).expect("orthogonal")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RotationReport {
    /// `(Ly²³, Ly³¹, Ly¹²)` transforms with the mode rotation itself.
    pub ly_follows: bool,
    pub lx_follows: bool,
    pub lz_follows: bool,
}

fn vector_follows(component: Sc, u: &ModeUnitary) -> Result<bool> {
    let pairs = [(1, 2), (2, 0), (0, 1)];
    let before: Vec<BosonPolynomial> = pairs.iter().map(|&(k, l)| sch(component, k, l)).collect();
    for (i, &(k, l)) in pairs.iter().enumerate() {
        // primed operator, rewritten in the input modes via a' = u a
        let primed = sch(component, k, l).transform_modes(u)?;
        let mut rotated = BosonPolynomial::zero();
        for (j, p) in before.iter().enumerate() {
            rotated += &(p * u.matrix()[(i, j)]);
        }
        if !primed.approx_eq(&rotated, SYMBOLIC_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks which Schwinger component vectors rotate like the mode vector.
pub fn ly_vector_rotation_check() -> Result<RotationReport> {
    let u = three_copy_rotation();
    Ok(RotationReport {
        ly_follows: vector_follows(Sc::Y, &u)?,
        lx_follows: vector_follows(Sc::X, &u)?,
        lz_follows: vector_follows(Sc::Z, &u)?,
    })
}
