//! Principal minors `d_S` of the moment matrix, their closed forms for the
//! benchmark families, and the detection verdicts built on them.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockDensityOperator;
use crate::linalg::{det, CMatrix};
use crate::moments::{block_of, MomentMatrix, Provenance};
use crate::states::{cat_norm, CatParity, Family};

/// A minor is a nonclassicality witness once it drops below `-DETECTION_EPSILON`.
pub const DETECTION_EPSILON: f64 = 1e-9;

/// Largest imaginary residue tolerated on a Hermitian minor.
const IMAG_RESIDUE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonclassicalDetected,
    NotDetected,
}

impl Verdict {
    pub fn from_value(value: f64, epsilon: f64) -> Self {
        if value < -epsilon {
            Verdict::NonclassicalDetected
        } else {
            Verdict::NotDetected
        }
    }

    pub fn detected(self) -> bool {
        self == Verdict::NonclassicalDetected
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NonclassicalDetected => "nonclassical_detected",
            Verdict::NotDetected => "not_detected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorSource {
    Numeric,
    Analytic,
}

impl MinorSource {
    pub fn as_str(self) -> &'static str {
        match self {
            MinorSource::Numeric => "numeric",
            MinorSource::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorResult {
    pub subset: Vec<usize>,
    pub value: f64,
    pub verdict: Verdict,
    pub provenance: MinorSource,
    pub dominant: bool,
}

impl MinorResult {
    fn new(subset: Vec<usize>, value: f64, provenance: MinorSource) -> Self {
        let dominant = is_dominant(&subset);
        MinorResult { subset, value, verdict: Verdict::from_value(value, DETECTION_EPSILON), provenance, dominant }
    }

    pub fn label(&self) -> String {
        subset_label(&self.subset)
    }
}

/// Parses a compact label such as `"1235"` (or `"d1235"`) into sorted indices.
pub fn parse_subset(label: &str) -> Result<Vec<usize>> {
    let body = label.trim().trim_start_matches('d');
    if body.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    let mut out = Vec::with_capacity(body.len());
    for ch in body.chars() {
        match ch.to_digit(10) {
            Some(d) if d >= 1 => out.push(d as usize),
            _ => return Err(Error::InvalidArgument(format!("bad index set label {label:?}"))),
        }
    }
    normalize_subset(&out)
}

/// Sorted copy of `subset`; rejects repeats and index 0.
pub fn normalize_subset(subset: &[usize]) -> Result<Vec<usize>> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    if s.is_empty() || s[0] == 0 {
        return Err(Error::InvalidArgument(format!("index set {subset:?} must be nonempty and 1-based")));
    }
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("repeated index in {subset:?}")));
    }
    Ok(s)
}

pub fn subset_label(subset: &[usize]) -> String {
    subset.iter().map(|i| i.to_string()).collect()
}

/// Relaxed dominance: `S` holds every index of the blocks below its top block
/// and any nonempty part of that top block.
pub fn is_dominant(subset: &[usize]) -> bool {
    let Ok(s) = normalize_subset(subset) else { return false };
    let Some(top) = s.iter().map(|&j| block_of(j).unwrap_or(usize::MAX)).max() else { return false };
    let below = top * (top + 1) / 2;
    (1..=below).all(|j| s.contains(&j)) && s.iter().all(|&j| j <= below + top + 1)
}

/// Determinant of the principal submatrix on `subset`, checked to be real.
pub fn minor_value(m: &MomentMatrix, subset: &[usize]) -> Result<f64> {
    let s = normalize_subset(subset)?;
    let sub = m.submatrix(&s)?;
    real_det(&sub)
}

pub(crate) fn real_det(sub: &CMatrix) -> Result<f64> {
    let d = det(sub);
    let scale = 1.0 + d.re.abs() + sub.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(sub.nrows() as i32);
    if d.im.abs() > IMAG_RESIDUE * scale {
        return Err(Error::NonReal { re: d.re, im: d.im });
    }
    Ok(d.re)
}

pub fn principal_minor(m: &MomentMatrix, subset: &[usize]) -> Result<MinorResult> {
    let s = normalize_subset(subset)?;
    let value = minor_value(m, &s)?;
    let source = match m.provenance() {
        Provenance::Analytic { .. } => MinorSource::Analytic,
        _ => MinorSource::Numeric,
    };
    Ok(MinorResult::new(s, value, source))
}

/// Groups of index sets sharing one closed form, in table order.
pub const TABLE_I_ROWS: &[&[&str]] = &[
    &["12", "13"],
    &["14", "16"],
    &["15"],
    &["23"],
    &["24", "26", "34", "36"],
    &["25", "35"],
    &["45", "56"],
    &["46"],
    &["123"],
    &["124", "126", "134", "136"],
    &["125", "135"],
    &["145", "156"],
    &["146"],
    &["234", "236"],
    &["235"],
    &["245", "256", "345", "356"],
    &["246", "346"],
    &["456"],
    &["1234"],
    &["1235"],
    &["1456"],
    &["12345"],
];

/// Index sets with a Gaussian closed form.
pub const TABLE_III_ROWS: &[&str] = &["15", "23", "123", "1235"];

fn canonical_row(subset: &[usize]) -> Option<&'static str> {
    let label = subset_label(subset);
    TABLE_I_ROWS.iter().find(|row| row.contains(&label.as_str())).map(|row| row[0])
}

fn fock_row(row: &str, n: f64) -> f64 {
    let m = n - 1.0;
    match row {
        "12" => n,
        "14" => n * m,
        "15" => -n,
        "23" | "123" => n * n,
        "24" | "25" | "124" => n * n * m,
        "45" | "46" | "146" => n * n * m * m,
        "125" => -n * n,
        "145" => -n * n * m,
        "234" | "235" | "1234" => n.powi(3) * m,
        "245" | "246" => n.powi(3) * m * m,
        "456" => n.powi(3) * m.powi(3),
        "1235" => -n.powi(3),
        "1456" => -n.powi(3) * m * m,
        "12345" => -n.powi(4) * m,
        _ => unreachable!("row {row}"),
    }
}

fn squeezed_row(row: &str, r: f64) -> f64 {
    let (s, c) = (r.sinh(), r.cosh());
    let ch2 = (2.0 * r).cosh();
    let s2 = s * s;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    match row {
        "12" => s2,
        "14" => 2.0 * s4,
        "15" => ch2 * s2,
        "23" | "123" => -s2,
        "24" | "25" => s4 * (c * c + 2.0 * s2),
        "45" => 0.5 * (5.0 - 3.0 * ch2) * s4,
        "46" => -2.0 * (1.0 + 3.0 * ch2) * s4,
        "124" => 2.0 * s6,
        "125" => s4 * ch2,
        "145" => -2.0 * s6,
        "146" => -4.0 * ch2 * s4,
        "234" => 0.5 * (1.0 - 3.0 * ch2) * s4,
        "235" => -s4 * (c * c + 2.0 * s2),
        "245" => 0.5 * (5.0 - 3.0 * ch2) * s6,
        "246" => -2.0 * (1.0 + 3.0 * ch2) * s6,
        "456" => -8.0 * s6,
        "1234" => -2.0 * s6,
        "1235" => -ch2 * s4,
        "1456" => -4.0 * s6,
        "12345" => 2.0 * s4 * s4,
        _ => unreachable!("row {row}"),
    }
}

/// Cat rows written with `b = |β|²` and `q = ⟨a†a⟩/|β|²`, which is `N₋/N₊`
/// for even cats and `N₊/N₋` for odd ones.
fn cat_row(row: &str, b: f64, q: f64) -> f64 {
    let g = q * q - 1.0;
    match row {
        "12" => b * q,
        "15" => -b * b * g,
        "23" | "123" => b * b * g,
        "24" | "25" => b.powi(3) * q,
        "45" => -b.powi(4) * g,
        "125" => -b.powi(3) * q * g,
        "234" | "235" => b.powi(4) * g,
        "245" => -b.powi(5) * q * g,
        "1235" => -b.powi(4) * g * g,
        "14" | "46" | "124" | "145" | "146" | "246" | "456" | "1234" | "1456" | "12345" => 0.0,
        _ => unreachable!("row {row}"),
    }
}

/// `⟨a†a⟩/|β|²` for a cat of the given parity.
pub fn cat_number_ratio(parity: CatParity, beta: Complex64) -> f64 {
    cat_norm(parity.flipped(), beta) / cat_norm(parity, beta)
}

/// Gaussian closed forms for the squeezed thermal state.
pub fn squeezed_thermal_minor(nbar: f64, r: f64, subset: &[usize]) -> Result<f64> {
    let s = normalize_subset(subset)?;
    let t = 1.0 + 2.0 * nbar;
    // ¼(1 − 2t ch2r + t² ch4r) regrouped as a sum of squares
    let d15 = 0.25 * ((t * (2.0 * r).cosh() - 1.0).powi(2) + (t * (2.0 * r).sinh()).powi(2));
    let d23 = 0.5 + nbar + nbar * nbar - 0.5 * t * (2.0 * r).cosh();
    match subset_label(&s).as_str() {
        "15" => Ok(d15),
        "23" | "123" => Ok(d23),
        "1235" => Ok(d15 * d23),
        other => Err(Error::Unsupported(format!("no Gaussian closed form for d{other}"))),
    }
}

/// Closed-form minor for a tabulated family and index set.
pub fn analytic_minor(family: &Family, subset: &[usize]) -> Result<f64> {
    let s = normalize_subset(subset)?;
    if let Family::SqueezedThermal { nbar, r, .. } = family {
        return squeezed_thermal_minor(*nbar, *r, &s);
    }
    let row = canonical_row(&s).ok_or_else(|| Error::Unsupported(format!("d{} is not tabulated", subset_label(&s))))?;
    match family {
        Family::Fock { n } => Ok(fock_row(row, *n as f64)),
        Family::Squeezed { r, .. } => Ok(squeezed_row(row, *r)),
        Family::CatEven { beta } => Ok(cat_row(row, beta.norm_sqr(), cat_number_ratio(CatParity::Even, *beta))),
        Family::CatOdd { beta } => Ok(cat_row(row, beta.norm_sqr(), cat_number_ratio(CatParity::Odd, *beta))),
        other => Err(Error::Unsupported(format!("no closed-form minors for {}", other.name()))),
    }
}

pub fn analytic_minor_result(family: &Family, subset: &[usize]) -> Result<MinorResult> {
    let s = normalize_subset(subset)?;
    let v = analytic_minor(family, &s)?;
    Ok(MinorResult::new(s, v, MinorSource::Analytic))
}

/// Necessary and sufficient Gaussian test: `(n̄ + ½) e^{−2r} < ½`, strictly.
pub fn gaussian_nonclassical(nbar: f64, r: f64) -> bool {
    (nbar + 0.5) * (-2.0 * r).exp() < 0.5
}

/// Change of `d15` under the displacement `D(α)` of a centered state,
/// `2|α|²⟨a†a⟩ + 2 Re(α*² ⟨a²⟩)`, for the benchmark families.
pub fn displacement_delta_d15(family: &Family, alpha: Complex64) -> Result<f64> {
    let a2 = alpha.norm_sqr();
    let (n, m2) = match family {
        Family::Fock { n } => (*n as f64, Complex64::new(0.0, 0.0)),
        Family::Squeezed { r, phi } => (r.sinh().powi(2), -Complex64::from_polar(r.sinh() * r.cosh(), *phi)),
        Family::CatEven { beta } => (beta.norm_sqr() * cat_number_ratio(CatParity::Even, *beta), beta * beta),
        Family::CatOdd { beta } => (beta.norm_sqr() * cat_number_ratio(CatParity::Odd, *beta), beta * beta),
        other => return Err(Error::Unsupported(format!("no displacement delta for {}", other.name()))),
    };
    Ok(2.0 * a2 * n + 2.0 * (alpha.conj().powi(2) * m2).re)
}

/// The displacement deltas exactly as tabulated, with the squeezing angle
/// `ψ = φ + π` for `S(r e^{iφ})`. The even-cat row carries the opposite sign
/// of the cosine term compared with `displacement_delta_d15`.
pub fn table_iv_delta_d15(family: &Family, alpha: Complex64) -> Result<f64> {
    let a2 = alpha.norm_sqr();
    let ta = alpha.arg();
    match family {
        Family::Fock { n } => Ok(2.0 * *n as f64 * a2),
        Family::Squeezed { r, phi } => {
            let psi = phi + std::f64::consts::PI;
            Ok(2.0 * r.sinh() * a2 * (r.cosh() * (2.0 * ta - psi).cos() + r.sinh()))
        }
        Family::CatOdd { beta } => {
            let q = cat_number_ratio(CatParity::Odd, *beta);
            Ok(2.0 * a2 * beta.norm_sqr() * ((2.0 * ta - 2.0 * beta.arg()).cos() + q))
        }
        Family::CatEven { beta } => {
            let q = cat_number_ratio(CatParity::Even, *beta);
            Ok(2.0 * a2 * beta.norm_sqr() * (q - (2.0 * ta - 2.0 * beta.arg()).cos()))
        }
        other => Err(Error::Unsupported(format!("no displacement delta for {}", other.name()))),
    }
}

/// Three evaluations of `d1235` on a centered state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct D1235Forms {
    pub direct: f64,
    /// `d235 − ⟨a†a⟩² d23`.
    pub cofactor: f64,
    /// `d23 · det(D₁₅ − V D₂₃⁻¹ W)`; `None` when `D₂₃` is singular.
    pub block: Option<f64>,
    /// `d23 d15 − x`.
    pub product: f64,
    pub x: f64,
}

impl D1235Forms {
    /// Largest disagreement between the direct determinant and the other forms.
    pub fn max_discrepancy(&self) -> f64 {
        let mut worst = (self.cofactor - self.direct).abs().max((self.product - self.direct).abs());
        if let Some(b) = self.block {
            worst = worst.max((b - self.direct).abs());
        }
        worst
    }
}

pub fn d1235_decompositions(m: &MomentMatrix) -> Result<D1235Forms> {
    if m.dim() < 5 {
        return Err(Error::DimensionMismatch { expected: 5, got: m.dim() });
    }
    let mean = m.get(1, 2)?;
    if mean.norm() > 1e-10 {
        return Err(Error::NotCentered(mean.norm()));
    }
    let n = m.get(1, 5)?.re;
    let a2 = m.get(1, 4)?;
    let ad2 = a2.conj();
    let ad2a = m.get(2, 5)?;
    let ada2 = m.get(3, 5)?;

    let direct = minor_value(m, &[1, 2, 3, 5])?;
    let d23 = minor_value(m, &[2, 3])?;
    let d15 = minor_value(m, &[1, 5])?;
    let d235 = minor_value(m, &[2, 3, 5])?;
    let cofactor = d235 - n * n * d23;

    let block = if d23.abs() > 1e-12 {
        let a = m.submatrix(&[2, 3])?;
        let inv = a.clone().try_inverse();
        match inv {
            Some(inv) => {
                let e = m.entries();
                let w = CMatrix::from_fn(2, 2, |i, j| e[([1, 2][i], [0, 4][j])]);
                let v = CMatrix::from_fn(2, 2, |i, j| e[([0, 4][i], [1, 2][j])]);
                let d = m.submatrix(&[1, 5])?;
                let schur = d - v * inv * w;
                Some(d23 * real_det(&schur)?)
            }
            None => None,
        }
    } else {
        None
    };

    let x = 2.0 * n * ad2a * ada2 - ad2 * ada2 * ada2 - a2 * ad2a * ad2a;
    if x.im.abs() > IMAG_RESIDUE * (1.0 + x.re.abs()) {
        return Err(Error::NonReal { re: x.re, im: x.im });
    }
    Ok(D1235Forms { direct, cofactor, block, product: d23 * d15 - x.re, x: x.re })
}

/// Mandel parameter `((Δn)² − ⟨n⟩)/⟨n⟩` from the photon-number distribution.
pub fn mandel_q(rho: &FockDensityOperator) -> Result<f64> {
    if rho.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: rho.modes() });
    }
    let p = rho.populations();
    let mean: f64 = p.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    if mean <= 0.0 {
        return Err(Error::InvalidState("Mandel parameter undefined at zero mean photon number".into()));
    }
    let second: f64 = p.iter().enumerate().map(|(n, w)| (n * n) as f64 * w).sum();
    Ok((second - mean * mean - mean) / mean)
}

/// One CSV row of a minor table.
#[derive(Clone, Debug, Serialize)]
pub struct MinorRow {
    pub family: String,
    pub params: String,
    pub subset: String,
    pub value: f64,
    pub verdict: &'static str,
    pub provenance: &'static str,
}

impl MinorRow {
    pub fn new(family: &str, params: &str, result: &MinorResult) -> Self {
        MinorRow {
            family: family.to_string(),
            params: params.to_string(),
            subset: result.label(),
            value: result.value,
            verdict: result.verdict.as_str(),
            provenance: result.provenance.as_str(),
        }
    }
}

impl fmt::Display for MinorResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{} = {:.12e} ({})", self.label(), self.value, self.verdict.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};
    use crate::moments::AnalyticFamily;
    use crate::states::StateSpec;
    use approx::assert_abs_diff_eq;

    fn numeric(spec: &StateSpec, cutoff: usize) -> MomentMatrix {
        MomentMatrix::build(&spec.make_state(cutoff).unwrap(), 6).unwrap()
    }

    #[test]
    fn dominance_classification() {
        for s in ["1", "12", "13", "123", "1234", "1235", "1236", "12345", "123456"] {
            assert!(is_dominant(&parse_subset(s).unwrap()), "{s}");
        }
        for s in ["14", "15", "23", "124", "134", "145", "2", "1245"] {
            assert!(!is_dominant(&parse_subset(s).unwrap()), "{s}");
        }
    }

    #[test]
    fn subset_parsing() {
        assert_eq!(parse_subset("d1235").unwrap(), vec![1, 2, 3, 5]);
        assert_eq!(parse_subset("51").unwrap(), vec![1, 5]);
        assert!(parse_subset("11").is_err());
        assert!(parse_subset("10").is_err());
    }

    #[test]
    fn fock_two_d15() {
        let m = numeric(&StateSpec::fock(2), 10);
        let r = principal_minor(&m, &[1, 5]).unwrap();
        assert_abs_diff_eq!(r.value, -2.0, epsilon = 1e-12);
        assert!(r.verdict.detected());
        assert!(!r.dominant);
    }

    #[test]
    fn squeezed_d23() {
        let m = numeric(&StateSpec::squeezed(0.5), 80);
        assert_abs_diff_eq!(minor_value(&m, &[2, 3]).unwrap(), -0.5f64.sinh().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(minor_value(&m, &[2, 3]).unwrap(), -0.27154, epsilon = 1e-5);
    }

    #[test]
    fn coherent_minors_vanish() {
        let m = numeric(&StateSpec::coherent(c(0.7, 0.3)), 50);
        for s in ["12", "15", "23", "123", "1235", "12345", "456"] {
            assert!(minor_value(&m, &parse_subset(s).unwrap()).unwrap().abs() < 1e-10, "{s}");
        }
    }

    #[test]
    fn table_rows_match_analytic_moments() {
        let fams = [
            (Family::Fock { n: 3 }, AnalyticFamily::Fock { n: 3 }),
            (Family::Squeezed { r: 0.7, phi: 0.0 }, AnalyticFamily::Squeezed { r: 0.7 }),
            (Family::CatEven { beta: real(1.2) }, AnalyticFamily::Cat { parity: CatParity::Even, beta: real(1.2) }),
            (Family::CatOdd { beta: c(0.5, 0.6) }, AnalyticFamily::Cat { parity: CatParity::Odd, beta: c(0.5, 0.6) }),
        ];
        for (fam, afam) in fams {
            let m = MomentMatrix::analytic(&afam, 6).unwrap();
            for row in TABLE_I_ROWS {
                for label in *row {
                    let s = parse_subset(label).unwrap();
                    let want = analytic_minor(&fam, &s).unwrap();
                    let got = minor_value(&m, &s).unwrap();
                    assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} d{label}: {got} vs {want}", fam.name());
                }
            }
        }
    }

    #[test]
    fn gaussian_boundary() {
        assert!(gaussian_nonclassical(0.0, 0.1));
        assert!(!gaussian_nonclassical(0.5, 0.0));
        assert!(!gaussian_nonclassical(0.5, 0.5 * 2f64.ln()));
        assert!(gaussian_nonclassical(0.5, 0.5 * 2f64.ln() + 1e-9));
    }

    #[test]
    fn squeezed_thermal_table() {
        let m = MomentMatrix::analytic(&AnalyticFamily::Gaussian { nbar: 0.3, r: 0.4 }, 5).unwrap();
        let fam = Family::SqueezedThermal { nbar: 0.3, r: 0.4, phi: 0.0 };
        for s in TABLE_III_ROWS {
            let s = parse_subset(s).unwrap();
            assert_abs_diff_eq!(minor_value(&m, &s).unwrap(), analytic_minor(&fam, &s).unwrap(), epsilon = 1e-12);
        }
        assert!(analytic_minor(&fam, &[1, 2]).is_err());
    }

    #[test]
    fn displacement_deltas() {
        assert_abs_diff_eq!(displacement_delta_d15(&Family::Fock { n: 1 }, real(1.0)).unwrap(), 2.0, epsilon = 1e-15);
        let sq = Family::Squeezed { r: 0.5, phi: 0.3 };
        let psi = 0.3 + std::f64::consts::PI;
        let alpha = Complex64::from_polar(1.0, psi / 2.0 + std::f64::consts::FRAC_PI_2);
        let d = displacement_delta_d15(&sq, alpha).unwrap();
        assert_abs_diff_eq!(d, 2.0 * 0.5f64.sinh() * (0.5f64.sinh() - 0.5f64.cosh()), epsilon = 1e-12);
        assert_abs_diff_eq!(table_iv_delta_d15(&sq, alpha).unwrap(), d, epsilon = 1e-12);
        let odd = Family::CatOdd { beta: c(0.4, 0.9) };
        let a = c(0.3, -0.8);
        assert_abs_diff_eq!(displacement_delta_d15(&odd, a).unwrap(), table_iv_delta_d15(&odd, a).unwrap(), epsilon = 1e-12);
        // tabulated even-cat row differs in the sign of the cosine term
        let even = Family::CatEven { beta: real(1.0) };
        let q = cat_number_ratio(CatParity::Even, real(1.0));
        assert_abs_diff_eq!(table_iv_delta_d15(&even, real(1.0)).unwrap(), 2.0 * (q - 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(displacement_delta_d15(&even, real(1.0)).unwrap(), 2.0 * (q + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn displaced_even_cat_numeric_delta() {
        let beta = real(1.0);
        let alpha = c(0.4, 0.2);
        let base = minor_value(&numeric(&StateSpec::cat_even(beta), 40), &[1, 5]).unwrap();
        let moved = minor_value(&numeric(&StateSpec::cat_even(beta).displaced(alpha), 40), &[1, 5]).unwrap();
        let fam = Family::CatEven { beta };
        assert_abs_diff_eq!(moved - base, displacement_delta_d15(&fam, alpha).unwrap(), epsilon = 1e-9);
        assert!((moved - base - table_iv_delta_d15(&fam, alpha).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn d1235_forms_agree() {
        let a = -(2f64.sqrt()) * 0.4;
        let b = (1.0f64 - a * a - 0.16).sqrt();
        let specs = [
            StateSpec::fock(2),
            StateSpec::squeezed(0.6),
            StateSpec::cat_odd(real(1.1)),
            StateSpec::superposition012(a, b, 0.4),
        ];
        for spec in specs {
            let m = numeric(&spec, 60);
            let f = d1235_decompositions(&m).unwrap();
            assert!(f.max_discrepancy() < 1e-10, "{}: {f:?}", spec.label());
        }
        let m = numeric(&StateSpec::superposition012(a, b, 0.4), 10);
        assert!(d1235_decompositions(&m).unwrap().x.abs() > 1e-3);
        let m = numeric(&StateSpec::coherent(real(0.5)), 30);
        assert!(matches!(d1235_decompositions(&m), Err(Error::NotCentered(_))));
    }

    #[test]
    fn mandel_identity() {
        for spec in [StateSpec::fock(3), StateSpec::squeezed(0.4), StateSpec::cat_even(real(0.8)), StateSpec::thermal(0.7)] {
            let rho = spec.make_state(80).unwrap();
            let m = MomentMatrix::build(&rho, 5).unwrap();
            let n = m.get(1, 5).unwrap().re;
            assert_abs_diff_eq!(minor_value(&m, &[1, 5]).unwrap(), mandel_q(&rho).unwrap() * n, epsilon = 1e-10);
        }
    }
}
