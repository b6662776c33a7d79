//! Normally-ordered moments `⟨a†^k a^l⟩` and the moment matrix `D_N`.
//!
//! Column `j` (1-based) of `D_N` is labelled by a block `n` and an offset
//! `l ≤ n` with `j = n(n+1)/2 + l + 1`; its first-row operator is
//! `a†^l a^{n-l}`. Entry `(i, j)` is the normal-ordered product of the
//! conjugated row operator and the column operator, which gives
//! `⟨a†^{n_i − l_i + l_j} a^{l_i + n_j − l_j}⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{normal_element, FockDensityOperator};
use crate::linalg::{hermitian_defect, real, CMatrix};
use crate::states::{cat_norm, CatParity};

/// Largest moment-matrix dimension supported.
pub const MAX_DIM: usize = 6;

/// `(n, l)` for the 1-based column index `j`.
pub fn index_map(j: usize) -> Result<(usize, usize)> {
    if j == 0 {
        return Err(Error::InvalidArgument("moment-matrix indices are 1-based".into()));
    }
    let mut n = 0usize;
    while (n + 1) * (n + 2) / 2 < j {
        n += 1;
    }
    Ok((n, j - 1 - n * (n + 1) / 2))
}

/// Block (total order) of the 1-based index `j`.
pub fn block_of(j: usize) -> Result<usize> {
    index_map(j).map(|(n, _)| n)
}

/// `(dagger_power, plain_power)` of the first-row operator of column `j`.
pub fn first_row_operator(j: usize) -> Result<(usize, usize)> {
    let (n, l) = index_map(j)?;
    Ok((l, n - l))
}

/// `(k, l)` of the moment `⟨a†^k a^l⟩` sitting at 1-based `(i, j)`.
pub fn entry_powers(i: usize, j: usize) -> Result<(usize, usize)> {
    let (ni, li) = index_map(i)?;
    let (nj, lj) = index_map(j)?;
    Ok((ni - li + lj, li + nj - lj))
}

/// `Tr(ρ a†^k a^l)` on a single-mode state.
///
/// Normal-ordered matrix elements are exact on the truncated space, so the
/// value is the exact moment of the truncated state. The cutoff must still
/// exceed `k + l`, otherwise the moment would vanish for lack of levels.
pub fn moment(rho: &FockDensityOperator, k: usize, l: usize) -> Result<Complex64> {
    if rho.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: rho.modes() });
    }
    let d = rho.cutoff();
    if d <= k + l {
        return Err(Error::CutoffTooSmall { cutoff: d, reason: format!("moment of order {} needs more levels", k + l) });
    }
    let m = rho.matrix();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in l..d {
        if let Some((row, w)) = normal_element(n, k, l) {
            if row < d {
                acc += m[(n, row)] * w;
            }
        }
    }
    Ok(acc)
}

/// Where the entries of a moment matrix came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Numeric { cutoff: usize, tail_mass: f64 },
    Analytic { family: String, params: String },
    Supplied,
}

/// `N × N` Hermitian matrix of normally-ordered moments.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    entries: CMatrix,
    provenance: Provenance,
}

impl MomentMatrix {
    /// Fills `D_N` from a moment oracle `f(k, l) = ⟨a†^k a^l⟩`.
    pub fn from_moments(
        n: usize,
        provenance: Provenance,
        mut f: impl FnMut(usize, usize) -> Result<Complex64>,
    ) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidArgument(format!("moment-matrix dimension {n} outside 1..={MAX_DIM}")));
        }
        let mut entries = CMatrix::zeros(n, n);
        for i in 1..=n {
            for j in i..=n {
                let (k, l) = entry_powers(i, j)?;
                let v = f(k, l)?;
                entries[(i - 1, j - 1)] = v;
                if i != j {
                    entries[(j - 1, i - 1)] = v.conj();
                }
            }
        }
        for i in 0..n {
            entries[(i, i)] = real(entries[(i, i)].re);
        }
        Ok(MomentMatrix { entries, provenance })
    }

    /// Numeric `D_N` of a single-mode state.
    pub fn build(rho: &FockDensityOperator, n: usize) -> Result<Self> {
        let prov = Provenance::Numeric { cutoff: rho.cutoff(), tail_mass: rho.tail_mass() };
        let mat = Self::from_moments(n, prov, |k, l| moment(rho, k, l))?;
        // diagonal moments ⟨a†^k a^k⟩ are real for a Hermitian ρ
        for i in 1..=n {
            let (k, l) = entry_powers(i, i)?;
            let raw = moment(rho, k, l)?;
            if raw.im.abs() > 1e-10 * (1.0 + raw.re.abs()) {
                return Err(Error::NonReal { re: raw.re, im: raw.im });
            }
        }
        Ok(mat)
    }

    /// `D_N` from the closed-form moment table.
    pub fn analytic(family: &AnalyticFamily, n: usize) -> Result<Self> {
        let prov = Provenance::Analytic { family: family.name().into(), params: family.params() };
        Self::from_moments(n, prov, |k, l| table_moment(family, k, l))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Entry at 1-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> Result<Complex64> {
        let n = self.dim();
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::InvalidArgument(format!("index ({i}, {j}) outside 1..={n}")));
        }
        Ok(self.entries[(i - 1, j - 1)])
    }

    /// Submatrix on the 1-based index set `subset`.
    pub fn submatrix(&self, subset: &[usize]) -> Result<CMatrix> {
        let n = self.dim();
        if let Some(&bad) = subset.iter().find(|&&s| s == 0 || s > n) {
            return Err(Error::InvalidArgument(format!("index {bad} outside 1..={n}")));
        }
        let k = subset.len();
        Ok(CMatrix::from_fn(k, k, |a, b| self.entries[(subset[a] - 1, subset[b] - 1)]))
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.entries)
    }
}

#[derive(Serialize)]
struct MomentMatrixJson<'a> {
    n: usize,
    entries: Vec<[f64; 2]>,
    provenance: &'a Provenance,
}

impl Serialize for MomentMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        MomentMatrixJson { n, entries, provenance: &self.provenance }.serialize(s)
    }
}

/// Families with closed-form low-order moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnalyticFamily {
    Fock { n: usize },
    /// Squeezed vacuum with squeezing angle 0.
    Squeezed { r: f64 },
    Cat { parity: CatParity, beta: Complex64 },
    /// Centered Gaussian state: thermal occupation `nbar` squeezed by `r`.
    Gaussian { nbar: f64, r: f64 },
}

impl AnalyticFamily {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFamily::Fock { .. } => "fock",
            AnalyticFamily::Squeezed { .. } => "squeezed",
            AnalyticFamily::Cat { parity: CatParity::Even, .. } => "cat_even",
            AnalyticFamily::Cat { parity: CatParity::Odd, .. } => "cat_odd",
            AnalyticFamily::Gaussian { .. } => "squeezed_thermal",
        }
    }

    pub fn params(&self) -> String {
        match self {
            AnalyticFamily::Fock { n } => format!("n={n}"),
            AnalyticFamily::Squeezed { r } => format!("r={r}"),
            AnalyticFamily::Cat { beta, .. } => format!("beta={}{:+}i", beta.re, beta.im),
            AnalyticFamily::Gaussian { nbar, r } => format!("nbar={nbar};r={r}"),
        }
    }
}

/// Closed-form `⟨a†^k a^l⟩` for `k + l ≤ 4`; odd total orders vanish.
pub fn table_moment(family: &AnalyticFamily, k: usize, l: usize) -> Result<Complex64> {
    if k + l > 4 {
        return Err(Error::Unsupported(format!("closed-form moment of order {} not tabulated", k + l)));
    }
    if (k + l) % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if k > l {
        return table_moment(family, l, k).map(|z| z.conj());
    }
    if k == 0 && l == 0 {
        return Ok(real(1.0));
    }
    let z = match family {
        AnalyticFamily::Fock { n } => {
            if k != l || k > *n {
                0.0.into()
            } else {
                real(((n - k + 1)..=*n).map(|x| x as f64).product())
            }
        }
        AnalyticFamily::Squeezed { r } => {
            let (s, c) = (r.sinh(), r.cosh());
            match (k, l) {
                (1, 1) => real(s * s),
                (0, 2) => real(-s * c),
                (2, 2) => real(s * s * (c * c + 2.0 * s * s)),
                (1, 3) => real(-3.0 * s.powi(3) * c),
                (0, 4) => real(3.0 * s * s * c * c),
                _ => unreachable!(),
            }
        }
        AnalyticFamily::Cat { parity, beta } => {
            let ratio = cat_norm(parity.flipped(), *beta) / cat_norm(*parity, *beta);
            let b2 = beta.norm_sqr();
            match (k, l) {
                (1, 1) => real(b2 * ratio),
                (0, 2) => beta * beta,
                (2, 2) => real(b2 * b2),
                (1, 3) => beta * beta * b2 * ratio,
                (0, 4) => beta.powi(4),
                _ => unreachable!(),
            }
        }
        AnalyticFamily::Gaussian { nbar, r } => gaussian_moment_closed_form(*nbar, *r, k, l)?,
    };
    Ok(z)
}

/// Closed-form moments of the squeezed thermal state (thermal occupation
/// `nbar`, squeezing `r` along the x quadrature).
pub fn gaussian_moment_closed_form(nbar: f64, r: f64, k: usize, l: usize) -> Result<Complex64> {
    if k + l > 4 {
        return Err(Error::Unsupported(format!("Gaussian moment of order {} not tabulated", k + l)));
    }
    if (k + l) % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if k > l {
        return gaussian_moment_closed_form(nbar, r, l, k).map(|z| z.conj());
    }
    let h = nbar + 0.5;
    let v = match (k, l) {
        (0, 0) => 1.0,
        (1, 1) => h * (2.0 * r).cosh() - 0.5,
        (0, 2) => -h * (2.0 * r).sinh(),
        (2, 2) => 0.5 * h * h * (3.0 * (4.0 * r).cosh() + 1.0) - 2.0 * h * (2.0 * r).cosh() + 0.5,
        (1, 3) => -1.5 * h * h * (4.0 * r).sinh() + 1.5 * h * (2.0 * r).sinh(),
        (0, 4) => 1.5 * h * h * ((4.0 * r).cosh() - 1.0),
        _ => unreachable!(),
    };
    Ok(real(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::states::StateSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn index_map_examples() {
        assert_eq!(index_map(1).unwrap(), (0, 0));
        assert_eq!(index_map(2).unwrap(), (1, 0));
        assert_eq!(index_map(3).unwrap(), (1, 1));
        assert_eq!(index_map(4).unwrap(), (2, 0));
        assert_eq!(index_map(5).unwrap(), (2, 1));
        assert_eq!(index_map(6).unwrap(), (2, 2));
        assert_eq!(index_map(7).unwrap(), (3, 0));
        assert_eq!(first_row_operator(4).unwrap(), (0, 2));
        assert_eq!(first_row_operator(5).unwrap(), (1, 1));
        assert!(index_map(0).is_err());
    }

    #[test]
    fn index_map_round_trips() {
        for j in 1..200 {
            let (n, l) = index_map(j).unwrap();
            assert!(l <= n);
            assert_eq!(n * (n + 1) / 2 + l + 1, j);
        }
    }

    #[test]
    fn block_structure_orders() {
        for i in 1..=MAX_DIM {
            for j in 1..=MAX_DIM {
                let (k, l) = entry_powers(i, j).unwrap();
                assert_eq!(k + l, block_of(i).unwrap() + block_of(j).unwrap());
            }
        }
    }

    #[test]
    fn squeezed_fourth_moment() {
        let r: f64 = 0.5;
        let rho = StateSpec::squeezed(r).make_state(80).unwrap();
        let v = moment(&rho, 2, 2).unwrap().re;
        let (s, ch) = (r.sinh(), r.cosh());
        assert_abs_diff_eq!(v, s * s * (ch * ch + 2.0 * s * s), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.492743, epsilon = 1e-6);
    }

    #[test]
    fn even_cat_a4() {
        let rho = StateSpec::cat_even(real(1.0)).make_state(50).unwrap();
        assert!((moment(&rho, 0, 4).unwrap() - real(1.0)).norm() < 1e-12);
    }

    #[test]
    fn coherent_is_rank_one() {
        let alpha = c(0.7, 0.3);
        let rho = StateSpec::coherent(alpha).make_state(50).unwrap();
        let m = MomentMatrix::build(&rho, 6).unwrap();
        let v: Vec<Complex64> = (1..=6)
            .map(|j| {
                let (kd, kp) = first_row_operator(j).unwrap();
                alpha.conj().powi(kd as i32) * alpha.powi(kp as i32)
            })
            .collect();
        for i in 0..6 {
            for j in 0..6 {
                // entry (i, j) = conj(v_i) v_j
                assert!((m.entries()[(i, j)] - v[i].conj() * v[j]).norm() < 1e-12);
            }
        }
        assert!(moment(&rho, 2, 3).map(|z| (z - alpha.conj().powi(2) * alpha.powi(3)).norm() < 1e-12).unwrap());
    }

    #[test]
    fn vacuum_and_single_photon_matrices() {
        let vac = MomentMatrix::build(&StateSpec::fock(0).make_state(8).unwrap(), 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(vac.entries()[(i, j)].norm(), expected, epsilon = 1e-15);
            }
        }
        let one = MomentMatrix::build(&StateSpec::fock(1).make_state(8).unwrap(), 5).unwrap();
        assert_eq!(one.get(1, 5).unwrap(), real(1.0));
        assert_eq!(one.get(5, 1).unwrap(), real(1.0));
        assert_eq!(one.get(2, 2).unwrap(), real(1.0));
        assert_eq!(one.get(3, 3).unwrap(), real(1.0));
        assert_eq!(one.get(5, 5).unwrap(), real(0.0));
    }

    #[test]
    fn moment_requires_levels() {
        let rho = StateSpec::fock(1).make_state(3).unwrap();
        assert!(matches!(moment(&rho, 2, 2), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn gaussian_closed_forms() {
        assert_abs_diff_eq!(gaussian_moment_closed_form(0.0, 0.0, 1, 1).unwrap().re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_moment_closed_form(1.0, 0.0, 1, 1).unwrap().re, 1.0, epsilon = 1e-15);
        assert!(gaussian_moment_closed_form(1.0, 0.0, 3, 2).is_err());
        assert_eq!(gaussian_moment_closed_form(1.0, 0.3, 2, 1).unwrap(), real(0.0));
        for i in 0..40 {
            let r = 0.05 * i as f64;
            let (s, ch) = (r.sinh(), r.cosh());
            let g = gaussian_moment_closed_form(0.0, r, 0, 4).unwrap().re;
            assert_abs_diff_eq!(g, 3.0 * s * s * ch * ch, epsilon = 1e-10 * (1.0 + g));
            for (k, l) in [(1, 1), (0, 2), (2, 2), (1, 3), (0, 4)] {
                let gz = gaussian_moment_closed_form(0.0, r, k, l).unwrap();
                let sq = table_moment(&AnalyticFamily::Squeezed { r }, k, l).unwrap();
                assert!((gz - sq).norm() < 1e-10 * (1.0 + sq.norm()), "({k},{l}) r={r}");
            }
        }
    }

    #[test]
    fn matrix_json_shape() {
        let m = MomentMatrix::analytic(&AnalyticFamily::Fock { n: 1 }, 2).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["entries"].as_array().unwrap().len(), 4);
        assert_eq!(v["provenance"]["kind"], "analytic");
    }
}
