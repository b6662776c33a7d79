//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise deviation of `u†u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

/// `exp(i * t * h)` for Hermitian `h`, through its eigendecomposition.
pub fn expm_i_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let sym = (h + h.adjoint()) * real(0.5);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * lambda);
        for r in 0..n {
            scaled[(r, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Principal-branch logarithm of a unitary matrix, returned as the Hermitian
/// generator `h` with `u = exp(i h)`. The flag is set when an eigenvalue sits
/// on the branch cut (phase within 1e-9 of ±π).
pub fn logm_unitary(u: &CMatrix) -> (CMatrix, bool) {
    let n = u.nrows();
    let (q, t) = u.clone().schur().unpack();
    let mut on_cut = false;
    let mut diag = CMatrix::zeros(n, n);
    for k in 0..n {
        let ev = t[(k, k)];
        let mut phase = ev.arg();
        if (phase.abs() - std::f64::consts::PI).abs() < 1e-9 {
            on_cut = true;
            phase = std::f64::consts::PI;
        }
        diag[(k, k)] = real(phase);
    }
    let h = &q * diag * q.adjoint();
    let h = (&h + h.adjoint()) * real(0.5);
    (h, on_cut)
}

/// Determinant via pivoted LU.
pub fn det(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return real(1.0);
    }
    m.clone().lu().determinant()
}

pub fn min_eigenvalue_hermitian(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()) * real(0.5);
    sym.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}
