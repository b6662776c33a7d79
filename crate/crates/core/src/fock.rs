//! Truncated Fock-space backend: ladder matrices, density operators, tensor
//! products, expectations and truncation-tail bookkeeping.
//!
//! Multi-mode bases are ordered with mode 0 most significant, so the basis
//! index of `|n_0, n_1, ..., n_{m-1}⟩` is `Σ_i n_i d^{m-1-i}`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boson_algebra::{BosonMonomial, BosonPolynomial};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, min_eigenvalue_hermitian, real, trace, CMatrix};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const NEGATIVITY_TOL: f64 = 1e-10;
/// Largest dense Hilbert-space dimension `tensor_power` will materialize.
pub const DEFAULT_DIM_BUDGET: usize = 4096;
/// Eigenvalue positivity is asserted only up to this dimension; larger
/// operators are built from checked factors by positivity-preserving maps.
const EIGEN_CHECK_MAX_DIM: usize = 1600;

/// Annihilation and creation matrices on levels `0..d`.
pub fn ladder(cutoff: usize) -> Result<(CMatrix, CMatrix)> {
    if cutoff < 2 {
        return Err(Error::CutoffTooSmall { cutoff, reason: "ladder operators need d >= 2".into() });
    }
    let mut a = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = real((n as f64).sqrt());
    }
    let adag = a.adjoint();
    Ok((a, adag))
}

/// Matrix element `⟨n - l + k| a†^k a^l |n⟩`, or `None` when `a^l` kills `|n⟩`.
pub(crate) fn normal_element(n: usize, k: usize, l: usize) -> Option<(usize, f64)> {
    if l > n {
        return None;
    }
    let mid = n - l;
    let mut w = 1.0f64;
    for j in (mid + 1)..=n {
        w *= j as f64;
    }
    for j in (mid + 1)..=(mid + k) {
        w *= j as f64;
    }
    Some((mid + k, w.sqrt()))
}

/// Dense matrix of `a†^k a^l` on a single mode truncated at `cutoff`.
pub fn normal_monomial_matrix(cutoff: usize, k: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        if let Some((row, w)) = normal_element(n, k, l) {
            if row < cutoff {
                m[(row, n)] = real(w);
            }
        }
    }
    m
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Dense matrix of a polynomial on `modes` modes of dimension `cutoff` each.
///
/// Normal-ordered monomials have exact matrix elements on the truncated
/// space: `a^l` only lowers, and `a†^k` never needs levels above the row index.
pub fn eval_polynomial(p: &BosonPolynomial, cutoff: usize, modes: usize) -> Result<CMatrix> {
    if let Some(m) = p.max_mode() {
        if m >= modes {
            return Err(Error::ModeOutOfRange { mode: m, modes });
        }
    }
    let dim = checked_dim(cutoff, modes, usize::MAX)?;
    let mut out = CMatrix::zeros(dim, dim);
    for (mono, c) in p.terms() {
        let mut mat = CMatrix::identity(1, 1);
        for mode in 0..modes {
            let (k, l) = mono.powers(mode);
            let factor = if k == 0 && l == 0 {
                CMatrix::identity(cutoff, cutoff)
            } else {
                normal_monomial_matrix(cutoff, k as usize, l as usize)
            };
            mat = kron(&mat, &factor);
        }
        out += mat * c;
    }
    Ok(out)
}

fn checked_dim(cutoff: usize, modes: usize, budget: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..modes {
        dim = dim.checked_mul(cutoff).ok_or(Error::ResourceLimit { required: usize::MAX, budget })?;
    }
    if dim > budget {
        return Err(Error::ResourceLimit { required: dim, budget });
    }
    Ok(dim)
}

/// Truncated density operator on `modes` modes with `cutoff` levels each.
#[derive(Clone, Debug)]
pub struct FockDensityOperator {
    modes: usize,
    cutoff: usize,
    matrix: CMatrix,
    tail_mass: f64,
    renormalized: bool,
}

impl FockDensityOperator {
    /// Validates Hermiticity, unit trace and positivity. `tail_mass` is the
    /// probability the constructor declares lost to truncation.
    pub fn new(modes: usize, cutoff: usize, matrix: CMatrix, tail_mass: f64) -> Result<Self> {
        let rho = Self::unchecked(modes, cutoff, matrix, tail_mass, false)?;
        rho.validate(true)?;
        Ok(rho)
    }

    pub(crate) fn unchecked(
        modes: usize,
        cutoff: usize,
        matrix: CMatrix,
        tail_mass: f64,
        renormalized: bool,
    ) -> Result<Self> {
        let dim = checked_dim(cutoff, modes, usize::MAX)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows() });
        }
        if modes == 0 || cutoff == 0 {
            return Err(Error::InvalidState("empty Fock space".into()));
        }
        Ok(FockDensityOperator { modes, cutoff, matrix, tail_mass, renormalized })
    }

    fn validate(&self, check_eigen: bool) -> Result<()> {
        let scale = self.matrix.norm().max(1.0);
        let defect = hermitian_defect(&self.matrix);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (defect {defect:.3e})")));
        }
        let tr = trace(&self.matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        if check_eigen && self.dim() <= EIGEN_CHECK_MAX_DIM {
            let min = min_eigenvalue_hermitian(&self.matrix);
            if min < -NEGATIVITY_TOL {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(())
    }

    /// Pure state from a truncated amplitude vector. The missing norm is
    /// recorded as tail mass and the vector is renormalized explicitly.
    pub fn from_truncated_pure(modes: usize, cutoff: usize, psi: &[Complex64], declared_tail: f64) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let lost = (1.0 - norm2).max(0.0);
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm2.sqrt()));
        let matrix = &v * v.adjoint();
        let mut rho = Self::unchecked(modes, cutoff, matrix, lost.max(declared_tail), lost > 0.0)?;
        rho.validate(false)?;
        rho.renormalized = lost > 0.0;
        Ok(rho)
    }

    /// Mixed state from a matrix whose trace falls short of one because of
    /// truncation; the deficit becomes tail mass.
    pub fn from_truncated_mixed(modes: usize, cutoff: usize, matrix: CMatrix, declared_tail: f64) -> Result<Self> {
        let tr = trace(&matrix).re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!("non-positive trace {tr}")));
        }
        let lost = (1.0 - tr).max(0.0);
        let herm = (&matrix + matrix.adjoint()) * real(0.5 / tr);
        let rho = Self::unchecked(modes, cutoff, herm, lost.max(declared_tail), lost > 0.0)?;
        rho.validate(true)?;
        Ok(rho)
    }

    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self> {
        let dim = checked_dim(cutoff, modes, usize::MAX)?;
        let mut m = CMatrix::zeros(dim, dim);
        m[(0, 0)] = real(1.0);
        Self::new(modes, cutoff, m, 0.0)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// True when construction rescaled the trace back to one.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn trace(&self) -> Complex64 {
        trace(&self.matrix)
    }

    /// `Tr ρ²`, computed as the squared Frobenius norm of the Hermitian matrix.
    pub fn purity(&self) -> f64 {
        self.matrix.norm_squared()
    }

    /// Diagonal of a single-mode state, `P(n)` for `n < cutoff`.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// `Tr(ρ · op)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<Complex64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.nrows() });
        }
        // Tr(ρ A) = Σ_ij ρ_ij A_ji
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.matrix[(i, j)] * op[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Real expectation of an operator that should be Hermitian; fails when
    /// the imaginary residue exceeds `1e-9 (1 + |Re|)`.
    pub fn expectation_real(&self, op: &CMatrix) -> Result<f64> {
        real_part_checked(self.expectation(op)?)
    }

    /// Expectation of a polynomial without materializing its matrix. Every
    /// normal-ordered monomial maps each basis state to a single basis
    /// state, so the trace is a weighted sum over the `d^m` basis states.
    pub fn expect_polynomial(&self, p: &BosonPolynomial) -> Result<Complex64> {
        if let Some(m) = p.max_mode() {
            if m >= self.modes {
                return Err(Error::ModeOutOfRange { mode: m, modes: self.modes });
            }
        }
        let terms: Vec<(BosonMonomial, Complex64)> = p.terms().collect();
        let total = terms
            .par_iter()
            .map(|(mono, c)| self.expect_monomial(*mono) * c)
            .reduce(|| Complex64::new(0.0, 0.0), |a, b| a + b);
        Ok(total)
    }

    fn expect_monomial(&self, mono: BosonMonomial) -> Complex64 {
        let d = self.cutoff;
        let m = self.modes;
        let powers: Vec<(usize, usize)> = (0..m)
            .map(|i| {
                let (k, l) = mono.powers(i);
                (k as usize, l as usize)
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut digits = vec![0usize; m];
        'basis: for col in 0..self.dim() {
            let mut rem = col;
            for i in (0..m).rev() {
                digits[i] = rem % d;
                rem /= d;
            }
            let mut row = 0usize;
            let mut w = 1.0f64;
            for i in 0..m {
                let (k, l) = powers[i];
                match normal_element(digits[i], k, l) {
                    Some((r, wi)) if r < d => {
                        row = row * d + r;
                        w *= wi;
                    }
                    _ => continue 'basis,
                }
            }
            // Tr(ρ M) = Σ_col ρ[col, row] M[row, col]
            acc += self.matrix[(col, row)] * w;
        }
        acc
    }

    /// `ρ ⊗ σ` with tail masses added.
    pub fn tensor(&self, other: &FockDensityOperator) -> Result<Self> {
        if other.cutoff != self.cutoff {
            return Err(Error::DimensionMismatch { expected: self.cutoff, got: other.cutoff });
        }
        Ok(FockDensityOperator {
            modes: self.modes + other.modes,
            cutoff: self.cutoff,
            matrix: kron(&self.matrix, &other.matrix),
            tail_mass: self.tail_mass + other.tail_mass,
            renormalized: self.renormalized || other.renormalized,
        })
    }

    /// `ρ^⊗k` for `k` in `2..=4`, refusing to exceed `dim_budget` basis states.
    pub fn tensor_power(&self, k: usize, dim_budget: usize) -> Result<Self> {
        if !(2..=4).contains(&k) {
            return Err(Error::InvalidArgument(format!("tensor power {k} outside 2..=4")));
        }
        checked_dim(self.cutoff, self.modes * k, dim_budget)?;
        let mut out = self.clone();
        for _ in 1..k {
            out = out.tensor(self)?;
        }
        out.tail_mass = self.tail_mass * k as f64;
        Ok(out)
    }

    /// Restriction to the first `cutoff` levels of every mode, renormalized
    /// with the discarded weight added to the tail.
    pub fn project(&self, cutoff: usize) -> Result<Self> {
        if cutoff > self.cutoff {
            return Err(Error::CutoffTooSmall { cutoff: self.cutoff, reason: format!("cannot project up to {cutoff}") });
        }
        if cutoff == self.cutoff {
            return Ok(self.clone());
        }
        let keep = kept_indices(self.cutoff, cutoff, self.modes);
        let n = keep.len();
        let mut m = CMatrix::zeros(n, n);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m[(a, b)] = self.matrix[(i, j)];
            }
        }
        let lost_before = self.tail_mass;
        let mut rho = Self::from_truncated_mixed(self.modes, cutoff, m, 0.0)?;
        rho.tail_mass += lost_before;
        Ok(rho)
    }

    /// Applies `U ρ U†` for a unitary given on the same space.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.nrows() });
        }
        let m = u * &self.matrix * u.adjoint();
        let m = (&m + m.adjoint()) * real(0.5);
        Ok(FockDensityOperator { matrix: m, ..self.clone() })
    }

    /// Joint photon-number distribution: probability of each basis state.
    pub fn number_distribution(&self) -> Vec<(Vec<usize>, f64)> {
        let d = self.cutoff;
        (0..self.dim())
            .map(|idx| {
                let mut digits = vec![0usize; self.modes];
                let mut rem = idx;
                for i in (0..self.modes).rev() {
                    digits[i] = rem % d;
                    rem /= d;
                }
                (digits, self.matrix[(idx, idx)].re)
            })
            .collect()
    }
}

fn kept_indices(big: usize, small: usize, modes: usize) -> Vec<usize> {
    let total = small.pow(modes as u32);
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut digits = vec![0usize; modes];
            for i in (0..modes).rev() {
                digits[i] = rem % small;
                rem /= small;
            }
            digits.iter().fold(0usize, |acc, &n| acc * big + n)
        })
        .collect()
}

pub(crate) fn real_part_checked(z: Complex64) -> Result<f64> {
    if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
        return Err(Error::NonReal { re: z.re, im: z.im });
    }
    Ok(z.re)
}

/// Families that can bound the probability weight above a cutoff.
pub trait TailBound {
    /// Smallest cutoff the family can be represented at.
    fn min_cutoff(&self) -> usize;
    /// `Σ_{n ≥ cutoff} P(n) (n + 1)^order`; with `order = 0` the plain tail mass.
    fn weighted_tail(&self, cutoff: usize, order: u32) -> Result<f64>;
}

/// Hard ceiling on automatically chosen cutoffs.
pub const MAX_AUTO_CUTOFF: usize = 600;

/// Smallest cutoff whose `order`-weighted tail is at most `tail_tol`, plus a
/// safety margin of `order` levels.
pub fn auto_cutoff(spec: &impl TailBound, tail_tol: f64, order: u32) -> Result<usize> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!("tail tolerance {tail_tol} outside (0, 1e-3]")));
    }
    let mut d = spec.min_cutoff().max(2);
    while spec.weighted_tail(d, order)? > tail_tol {
        d += 1;
        if d > MAX_AUTO_CUTOFF {
            return Err(Error::ResourceLimit { required: d, budget: MAX_AUTO_CUTOFF });
        }
    }
    Ok(d + order as usize)
}

/// Sums `f(n) (n+1)^order` from `start` until terms become negligible.
/// `f` must be eventually decreasing fast enough that the weighted terms
/// fall below `1e-40` relative to the running sum.
pub(crate) fn tail_sum(start: usize, order: u32, f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0f64;
    let mut small_run = 0;
    let mut n = start;
    loop {
        let t = f(n) * ((n + 1) as f64).powi(order as i32);
        acc += t;
        if t <= 1e-40 || t <= acc * 1e-18 {
            small_run += 1;
            if small_run > 8 {
                break;
            }
        } else {
            small_run = 0;
        }
        n += 1;
        if n > start + 200_000 {
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boson_algebra::{BosonMonomial, BosonPolynomial};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fock(n: usize, d: usize) -> FockDensityOperator {
        let mut psi = vec![Complex64::new(0.0, 0.0); d];
        psi[n] = real(1.0);
        FockDensityOperator::from_truncated_pure(1, d, &psi, 0.0).unwrap()
    }

    fn thermal(nbar: f64, d: usize) -> FockDensityOperator {
        let q = nbar / (nbar + 1.0);
        let diag: Vec<Complex64> = (0..d).map(|n| real(q.powi(n as i32) / (nbar + 1.0))).collect();
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        FockDensityOperator::from_truncated_mixed(1, d, m, 0.0).unwrap()
    }

    #[test]
    fn ladder_small_cutoffs() {
        let (a, _) = ladder(2).unwrap();
        assert_eq!(a[(0, 1)], real(1.0));
        assert_eq!(a[(1, 0)], real(0.0));
        let (a, ad) = ladder(3).unwrap();
        let n = &ad * &a;
        for k in 0..3 {
            assert_abs_diff_eq!(n[(k, k)].re, k as f64, epsilon = 1e-15);
        }
        assert!(ladder(1).is_err());
    }

    #[test]
    fn truncated_commutator_defect_sits_in_corner() {
        let d = 5;
        let (a, ad) = ladder(d).unwrap();
        let comm = &a * &ad - &ad * &a;
        for i in 0..d {
            let expected = if i == d - 1 { 1.0 - d as f64 } else { 1.0 };
            assert_abs_diff_eq!(comm[(i, i)].re, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn number_expectation_on_fock_and_thermal() {
        let n_op = eval_polynomial(&BosonPolynomial::number(0), 8, 1).unwrap();
        assert_abs_diff_eq!(fock(1, 8).expectation_real(&n_op).unwrap(), 1.0, epsilon = 1e-14);
        let th = thermal(0.5, 80);
        let n_op = eval_polynomial(&BosonPolynomial::number(0), 80, 1).unwrap();
        assert_abs_diff_eq!(th.expectation_real(&n_op).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tensor_power_trace_and_purity() {
        let th = thermal(1.0, 40);
        let t2 = th.tensor_power(2, DEFAULT_DIM_BUDGET).unwrap();
        assert_abs_diff_eq!(t2.purity(), th.purity().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(th.purity(), 1.0 / 3.0, epsilon = 1e-9);
        let small = thermal(0.2, 8);
        let t3 = small.tensor_power(3, DEFAULT_DIM_BUDGET).unwrap();
        assert_abs_diff_eq!(t3.trace().re, 1.0, epsilon = 1e-12);
        assert!(t3.tail_mass() <= 3.0 * small.tail_mass() + 1e-18);
        let vac = fock(0, 3).tensor_power(2, 100).unwrap();
        assert_eq!(vac.matrix()[(0, 0)], real(1.0));
        assert_abs_diff_eq!(vac.matrix().norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_power_respects_budget() {
        let err = fock(0, 20).tensor_power(4, DEFAULT_DIM_BUDGET).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { required: 160000, .. }));
    }

    #[test]
    fn negative_state_rejected() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![real(1.5), real(-0.5)]));
        assert!(FockDensityOperator::new(1, 2, m, 0.0).is_err());
    }

    #[test]
    fn monomial_expectation_matches_dense() {
        let th = thermal(0.3, 6).tensor(&fock(2, 6)).unwrap();
        let p = BosonPolynomial::from_terms([
            (BosonMonomial::from_powers(&[(0, 1, 1), (1, 2, 2)]), real(0.7)),
            (BosonMonomial::from_powers(&[(0, 1, 0), (1, 0, 1)]), Complex64::new(0.0, 1.0)),
        ]);
        let dense = eval_polynomial(&p, 6, 2).unwrap();
        let a = th.expectation(&dense).unwrap();
        let b = th.expect_polynomial(&p).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn projection_moves_weight_to_tail() {
        let th = thermal(1.0, 30);
        let p = th.project(10).unwrap();
        assert_abs_diff_eq!(p.trace().re, 1.0, epsilon = 1e-12);
        assert!(p.tail_mass() > 0.5f64.powi(10) * 0.99);
        assert!(p.renormalized());
    }

    fn small_poly() -> impl Strategy<Value = BosonPolynomial> {
        prop::collection::vec((0u8..3, 0u8..3, -1.0f64..1.0, -1.0f64..1.0), 1..4).prop_map(|v| {
            BosonPolynomial::from_terms(
                v.into_iter()
                    .map(|(k, l, re, im)| (BosonMonomial::from_powers(&[(0, k, l)]), Complex64::new(re, im))),
            )
        })
    }

    proptest! {
        #[test]
        fn evaluation_is_multiplicative_below_the_buffer(p in small_poly(), q in small_poly()) {
            // degree ≤ 2 per factor: a margin of 4 levels keeps the low block exact
            let d = 12;
            let margin = 4;
            let lhs = eval_polynomial(&p.multiply(&q), d, 1).unwrap();
            let rhs = eval_polynomial(&p, d, 1).unwrap() * eval_polynomial(&q, d, 1).unwrap();
            for i in 0..d - margin {
                for j in 0..d - margin {
                    prop_assert!((lhs[(i, j)] - rhs[(i, j)]).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn hermitian_polynomials_give_hermitian_matrices(p in small_poly()) {
            let h = &p + &p.dagger();
            let m = eval_polynomial(&h, 7, 1).unwrap();
            prop_assert!(hermitian_defect(&m) < 1e-10);
        }
    }
}
