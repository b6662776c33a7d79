//! Passive linear-optics circuits acting on state replicas, and the
//! photon-number functionals read out at their outputs.
//!
//! Mode labels in `CircuitSpec` and `Functional` are 1-based.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boson_algebra::{BosonPolynomial, ModeUnitary};
use crate::error::{Error, Result};
use crate::fock::FockDensityOperator;
use crate::linalg::{expm_i_hermitian, logm_unitary, real, CMatrix};
use crate::minors::{Verdict, DETECTION_EPSILON};
use crate::multicopy::product_expectation;
use crate::states::{default_cutoff, StateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    BeamSplitter,
    PhaseShifter,
}

/// One optical element; `param` is the transmittance `τ` of a beam splitter
/// or the phase `φ` of a phase shifter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    #[serde(rename = "type")]
    pub kind: ElementKind,
    pub modes: Vec<usize>,
    pub param: f64,
}

impl Element {
    pub fn beam_splitter(a: usize, b: usize, tau: f64) -> Self {
        Element { kind: ElementKind::BeamSplitter, modes: vec![a, b], param: tau }
    }

    pub fn phase_shifter(mode: usize, phi: f64) -> Self {
        Element { kind: ElementKind::PhaseShifter, modes: vec![mode], param: phi }
    }

    fn local_matrix(&self) -> Result<CMatrix> {
        match self.kind {
            ElementKind::BeamSplitter => {
                let tau = self.param;
                if !(0.0..=1.0).contains(&tau) {
                    return Err(Error::InvalidArgument(format!("transmittance {tau} outside [0, 1]")));
                }
                let (t, r) = (tau.sqrt(), (1.0 - tau).sqrt());
                Ok(CMatrix::from_row_slice(2, 2, &[real(t), real(r), real(r), real(-t)]))
            }
            ElementKind::PhaseShifter => {
                if !self.param.is_finite() {
                    return Err(Error::InvalidArgument("non-finite phase".into()));
                }
                Ok(CMatrix::from_element(1, 1, Complex64::from_polar(1.0, -self.param)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub modes: usize,
    pub elements: Vec<Element>,
}

impl CircuitSpec {
    pub fn identity(modes: usize) -> Self {
        CircuitSpec { modes, elements: Vec::new() }
    }

    /// 50:50 beam splitter on modes 1, 2.
    pub fn fig1() -> Self {
        CircuitSpec { modes: 2, elements: vec![Element::beam_splitter(1, 2, 0.5)] }
    }

    /// `π/2` phase on mode 2, then a 50:50 beam splitter.
    pub fn fig2() -> Self {
        Self::fig3(0.5, FRAC_PI_2)
    }

    /// Phase `φ` on mode 2, then a beam splitter of transmittance `τ`.
    pub fn fig3(tau: f64, phi: f64) -> Self {
        CircuitSpec {
            modes: 2,
            elements: vec![Element::phase_shifter(2, phi), Element::beam_splitter(1, 2, tau)],
        }
    }

    /// Three replicas: beam splitters of transmittance 1/2 on (1,2) and 2/3
    /// on (1,3) move the mean field into mode 1, then the two-mode `d23`
    /// circuit on modes 2, 3.
    pub fn fig4() -> Self {
        CircuitSpec {
            modes: 3,
            elements: vec![
                Element::beam_splitter(1, 2, 0.5),
                Element::beam_splitter(1, 3, 2.0 / 3.0),
                Element::phase_shifter(2, FRAC_PI_2),
                Element::beam_splitter(2, 3, 0.5),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 || self.modes > crate::boson_algebra::MAX_MODES {
            return Err(Error::InvalidArgument(format!("circuit mode count {} unsupported", self.modes)));
        }
        for e in &self.elements {
            let want = match e.kind {
                ElementKind::BeamSplitter => 2,
                ElementKind::PhaseShifter => 1,
            };
            if e.modes.len() != want {
                return Err(Error::InvalidArgument(format!("{:?} needs {want} modes", e.kind)));
            }
            if let Some(&m) = e.modes.iter().find(|&&m| m == 0 || m > self.modes) {
                return Err(Error::ModeOutOfRange { mode: m, modes: self.modes });
            }
            if want == 2 && e.modes[0] == e.modes[1] {
                return Err(Error::InvalidArgument("beam splitter needs two distinct modes".into()));
            }
            e.local_matrix()?;
        }
        Ok(())
    }
}

/// Three-mode discrete Fourier transform `u_jk = ω^{jk}/√3`.
pub fn dft3_unitary() -> ModeUnitary {
    let w = 2.0 * PI / 3.0;
    let m = CMatrix::from_fn(3, 3, |j, k| Complex64::from_polar(1.0 / 3f64.sqrt(), w * (j * k) as f64));
    ModeUnitary::new(m).expect("unitary")
}

/// Product of the element matrices in circuit order, `a_out = u a_in`.
pub fn compile_mode_unitary(c: &CircuitSpec) -> Result<ModeUnitary> {
    c.validate()?;
    let mut u = ModeUnitary::identity(c.modes);
    for e in &c.elements {
        let local = ModeUnitary::new(e.local_matrix()?)?;
        let zero_based: Vec<usize> = e.modes.iter().map(|m| m - 1).collect();
        u = u.then(&local.embed(c.modes, &zero_based)?)?;
    }
    Ok(u)
}

/// Occupation tuples with a fixed total, in lexicographic order.
fn sector_states(modes: usize, total: usize) -> Vec<Vec<u32>> {
    fn rec(modes: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if modes == 1 {
            cur.push(left as u32);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for n in (0..=left).rev() {
            cur.push(n as u32);
            rec(modes - 1, left - n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(modes, total, &mut Vec::with_capacity(modes), &mut out);
    out
}

/// Largest `Σ_N s_N³` work estimate accepted when building Fock unitaries.
pub const SECTOR_WORK_BUDGET: f64 = 2.0e10;

/// Passive Fock-space unitary stored as one block per total photon number.
#[derive(Clone, Debug)]
pub struct FockUnitary {
    modes: usize,
    sectors: Vec<Vec<Vec<u32>>>,
    blocks: Vec<CMatrix>,
    branch_cut: bool,
}

impl FockUnitary {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_total(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Set when the mode matrix had an eigenvalue at `−1`. Any logarithm
    /// branch gives the same Fock unitary, so this is informational.
    pub fn branch_cut(&self) -> bool {
        self.branch_cut
    }

    pub fn block(&self, total: usize) -> &CMatrix {
        &self.blocks[total]
    }

    pub fn sector(&self, total: usize) -> &[Vec<u32>] {
        &self.sectors[total]
    }

    /// Matrix on the per-mode truncated space (mode 1 most significant).
    pub fn dense(&self, cutoff: usize) -> Result<CMatrix> {
        let dim = cutoff.checked_pow(self.modes as u32).filter(|&d| d <= 1 << 14).ok_or(Error::ResourceLimit {
            required: cutoff.saturating_pow(self.modes as u32),
            budget: 1 << 14,
        })?;
        if self.modes * (cutoff - 1) > self.max_total() {
            return Err(Error::CutoffTooSmall { cutoff, reason: "Fock unitary built for fewer photons".into() });
        }
        let flat = |occ: &[u32]| occ.iter().fold(0usize, |acc, &n| acc * cutoff + n as usize);
        let mut out = CMatrix::zeros(dim, dim);
        for (total, states) in self.sectors.iter().enumerate() {
            let b = &self.blocks[total];
            for (i, si) in states.iter().enumerate() {
                if si.iter().any(|&n| n as usize >= cutoff) {
                    continue;
                }
                for (j, sj) in states.iter().enumerate() {
                    if sj.iter().all(|&n| (n as usize) < cutoff) {
                        out[(flat(si), flat(sj))] = b[(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Fock-space unitary `U = exp(i Σ h_ij a_i† a_j)` with `u = exp(i h)`, built
/// exactly on every photon-number sector up to `max_total`.
pub fn fock_unitary(u: &ModeUnitary, max_total: usize) -> Result<FockUnitary> {
    let modes = u.dim();
    let sectors: Vec<Vec<Vec<u32>>> = (0..=max_total).map(|n| sector_states(modes, n)).collect();
    let work: f64 = sectors.iter().map(|s| (s.len() as f64).powi(3)).sum();
    if work > SECTOR_WORK_BUDGET {
        return Err(Error::ResourceLimit { required: work as usize, budget: SECTOR_WORK_BUDGET as usize });
    }
    let (h, branch_cut) = logm_unitary(u.matrix());
    let index: Vec<HashMap<Vec<u32>, usize>> = sectors
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, occ)| (occ.clone(), i)).collect())
        .collect();
    let blocks: Vec<CMatrix> = sectors
        .par_iter()
        .zip(index.par_iter())
        .map(|(states, idx)| {
            let s = states.len();
            let mut g = CMatrix::zeros(s, s);
            for (col, occ) in states.iter().enumerate() {
                for k in 0..modes {
                    for l in 0..modes {
                        let hkl = h[(k, l)];
                        if hkl.norm() == 0.0 {
                            continue;
                        }
                        if k == l {
                            g[(col, col)] += hkl * occ[k] as f64;
                        } else if occ[l] > 0 {
                            let mut next = occ.clone();
                            next[l] -= 1;
                            next[k] += 1;
                            let amp = (occ[l] as f64 * next[k] as f64).sqrt();
                            g[(idx[&next], col)] += hkl * amp;
                        }
                    }
                }
            }
            expm_i_hermitian(&g, 1.0)
        })
        .collect();
    Ok(FockUnitary { modes, sectors, blocks, branch_cut })
}

/// Joint photon-number distribution at a circuit output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumberDistribution {
    modes: usize,
    entries: Vec<(Vec<u32>, f64)>,
}

/// Photon-number functionals; modes are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    MeanN { mode: usize },
    MeanProduct { m1: usize, m2: usize },
    /// `½⟨(n₁ − n₂)² − (n₁ + n₂)⟩`.
    HalfSqDiffMinusHalfSum { m1: usize, m2: usize },
}

impl Functional {
    fn modes(&self) -> Vec<usize> {
        match *self {
            Functional::MeanN { mode } => vec![mode],
            Functional::MeanProduct { m1, m2 } | Functional::HalfSqDiffMinusHalfSum { m1, m2 } => vec![m1, m2],
        }
    }

    fn value(&self, occ: &[u32]) -> f64 {
        let n = |m: usize| occ[m - 1] as f64;
        match *self {
            Functional::MeanN { mode } => n(mode),
            Functional::MeanProduct { m1, m2 } => n(m1) * n(m2),
            Functional::HalfSqDiffMinusHalfSum { m1, m2 } => {
                0.5 * (n(m1) - n(m2)).powi(2) - 0.5 * (n(m1) + n(m2))
            }
        }
    }

    /// The same functional as a polynomial in the output mode operators.
    pub fn polynomial(&self) -> BosonPolynomial {
        let n = |m: usize| BosonPolynomial::number(m - 1);
        match *self {
            Functional::MeanN { mode } => n(mode),
            Functional::MeanProduct { m1, m2 } => n(m1).multiply(&n(m2)),
            Functional::HalfSqDiffMinusHalfSum { m1, m2 } => {
                let diff = &n(m1) - &n(m2);
                let sum = &n(m1) + &n(m2);
                (&diff.multiply(&diff) - &sum) * 0.5
            }
        }
    }
}

impl NumberDistribution {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn entries(&self) -> &[(Vec<u32>, f64)] {
        &self.entries
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn measure(&self, f: &Functional) -> Result<f64> {
        if let Some(&m) = f.modes().iter().find(|&&m| m == 0 || m > self.modes) {
            return Err(Error::ModeOutOfRange { mode: m, modes: self.modes });
        }
        Ok(self.entries.iter().map(|(occ, p)| p * f.value(occ)).sum())
    }

    pub fn mean(&self, mode: usize) -> Result<f64> {
        self.measure(&Functional::MeanN { mode })
    }

    /// Mandel parameter of one output mode.
    pub fn mandel_q(&self, mode: usize) -> Result<f64> {
        let mean = self.mean(mode)?;
        if mean <= 0.0 {
            return Err(Error::InvalidState("Mandel parameter undefined at zero mean photon number".into()));
        }
        let second: f64 = self.entries.iter().map(|(occ, p)| p * (occ[mode - 1] as f64).powi(2)).sum();
        Ok((second - mean * mean - mean) / mean)
    }

    /// `Pr[n_{m1} ≠ n_{m2}]`.
    pub fn prob_unequal(&self, m1: usize, m2: usize) -> f64 {
        self.entries.iter().filter(|(occ, _)| occ[m1 - 1] != occ[m2 - 1]).map(|(_, p)| p).sum()
    }
}

pub fn measure_functional(dist: &NumberDistribution, f: &Functional) -> Result<f64> {
    dist.measure(f)
}

/// Runs `ρ^⊗k` (single-mode `rho`, `k` = circuit modes) through the circuit
/// and returns the output number distribution.
pub fn evolve_replicas(rho: &FockDensityOperator, fu: &FockUnitary) -> Result<NumberDistribution> {
    if rho.modes() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: rho.modes() });
    }
    let d = rho.cutoff();
    let k = fu.modes();
    if k * (d - 1) > fu.max_total() {
        return Err(Error::CutoffTooSmall { cutoff: d, reason: "Fock unitary built for fewer photons".into() });
    }
    if let Some(psi) = pure_amplitudes(rho) {
        return Ok(evolve_pure_replicas(&psi, k, fu));
    }
    let m = rho.matrix();
    let parts: Vec<Vec<(Vec<u32>, f64)>> = (0..=k * (d - 1))
        .into_par_iter()
        .map(|total| {
            let states = fu.sector(total);
            let live: Vec<usize> = (0..states.len()).filter(|&i| states[i].iter().all(|&n| (n as usize) < d)).collect();
            let s = states.len();
            let mut block = CMatrix::zeros(s, s);
            for &i in &live {
                for &j in &live {
                    let mut v = real(1.0);
                    for q in 0..k {
                        v *= m[(states[i][q] as usize, states[j][q] as usize)];
                    }
                    block[(i, j)] = v;
                }
            }
            let u = fu.block(total);
            let left = u * block;
            (0..s)
                .map(|r| {
                    let p: Complex64 = (0..s).map(|c| left[(r, c)] * u[(r, c)].conj()).sum();
                    (states[r].clone(), p.re)
                })
                .collect()
        })
        .collect();
    Ok(NumberDistribution { modes: k, entries: parts.into_iter().flatten().collect() })
}

/// State vector of a pure `rho` (purity within 1e-12 of one), up to phase.
fn pure_amplitudes(rho: &FockDensityOperator) -> Option<Vec<Complex64>> {
    if (rho.purity() - 1.0).abs() > 1e-12 {
        return None;
    }
    let m = rho.matrix();
    let d = rho.cutoff();
    let j = (0..d).max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))?;
    let norm = m[(j, j)].re.sqrt();
    Some((0..d).map(|i| m[(i, j)] / norm).collect())
}

fn evolve_pure_replicas(psi: &[Complex64], k: usize, fu: &FockUnitary) -> NumberDistribution {
    let d = psi.len();
    let parts: Vec<Vec<(Vec<u32>, f64)>> = (0..=k * (d - 1))
        .into_par_iter()
        .map(|total| {
            let states = fu.sector(total);
            let v = nalgebra::DVector::from_iterator(
                states.len(),
                states.iter().map(|occ| {
                    if occ.iter().any(|&n| n as usize >= d) {
                        real(0.0)
                    } else {
                        occ.iter().map(|&n| psi[n as usize]).product()
                    }
                }),
            );
            let out = fu.block(total) * v;
            states.iter().zip(out.iter()).map(|(occ, z)| (occ.clone(), z.norm_sqr())).collect()
        })
        .collect();
    NumberDistribution { modes: k, entries: parts.into_iter().flatten().collect() }
}

/// Runs a general `k`-mode state through the circuit.
pub fn evolve_state(rho: &FockDensityOperator, fu: &FockUnitary) -> Result<NumberDistribution> {
    let k = fu.modes();
    if rho.modes() != k {
        return Err(Error::DimensionMismatch { expected: k, got: rho.modes() });
    }
    let d = rho.cutoff();
    if k * (d - 1) > fu.max_total() {
        return Err(Error::CutoffTooSmall { cutoff: d, reason: "Fock unitary built for fewer photons".into() });
    }
    let m = rho.matrix();
    let flat = |occ: &[u32]| occ.iter().fold(0usize, |acc, &n| acc * d + n as usize);
    let mut entries = Vec::new();
    for total in 0..=k * (d - 1) {
        let states = fu.sector(total);
        let s = states.len();
        let mut block = CMatrix::zeros(s, s);
        for (i, si) in states.iter().enumerate() {
            if si.iter().any(|&n| n as usize >= d) {
                continue;
            }
            for (j, sj) in states.iter().enumerate() {
                if sj.iter().all(|&n| (n as usize) < d) {
                    block[(i, j)] = m[(flat(si), flat(sj))];
                }
            }
        }
        let u = fu.block(total);
        let out = u * block * u.adjoint();
        for (r, occ) in states.iter().enumerate() {
            entries.push((occ.clone(), out[(r, r)].re));
        }
    }
    Ok(NumberDistribution { modes: k, entries })
}

/// Circuit realizations of principal minors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    D12,
    D14,
    D15,
    D23,
    D123,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::D12, Preset::D14, Preset::D15, Preset::D23, Preset::D123];

    pub fn subset(self) -> &'static [usize] {
        match self {
            Preset::D12 => &[1, 2],
            Preset::D14 => &[1, 4],
            Preset::D15 => &[1, 5],
            Preset::D23 => &[2, 3],
            Preset::D123 => &[1, 2, 3],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::D12 => "d12",
            Preset::D14 => "d14",
            Preset::D15 => "d15",
            Preset::D23 => "d23",
            Preset::D123 => "d123",
        }
    }

    pub fn circuit(self) -> CircuitSpec {
        match self {
            Preset::D12 | Preset::D14 => CircuitSpec::fig1(),
            Preset::D15 => CircuitSpec::identity(2),
            Preset::D23 => CircuitSpec::fig2(),
            Preset::D123 => CircuitSpec::fig4(),
        }
    }

    /// Output functional and its prefactor.
    pub fn readout(self) -> (Functional, f64) {
        match self {
            Preset::D12 => (Functional::MeanN { mode: 2 }, 1.0),
            Preset::D14 => (Functional::MeanProduct { m1: 1, m2: 2 }, 2.0),
            Preset::D15 | Preset::D23 => (Functional::HalfSqDiffMinusHalfSum { m1: 1, m2: 2 }, 1.0),
            Preset::D123 => (Functional::HalfSqDiffMinusHalfSum { m1: 2, m2: 3 }, 1.0),
        }
    }

    /// Largest per-mode cutoff simulated for this preset's replica count.
    pub fn cutoff_cap(self) -> usize {
        match self.circuit().modes {
            2 => 64,
            _ => 12,
        }
    }
}

/// Caches Fock unitaries per circuit and photon budget.
#[derive(Default)]
pub struct CircuitRunner {
    cache: HashMap<(String, usize), FockUnitary>,
}

impl CircuitRunner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unitary(&mut self, c: &CircuitSpec, max_total: usize) -> Result<&FockUnitary> {
        let key = (serde_json::to_string(c)?, max_total);
        if !self.cache.contains_key(&key) {
            let u = compile_mode_unitary(c)?;
            self.cache.insert(key.clone(), fock_unitary(&u, max_total)?);
        }
        Ok(&self.cache[&key])
    }

    /// Runs `circuit` on replicas of `rho` and reads out `f`.
    pub fn run(&mut self, c: &CircuitSpec, rho: &FockDensityOperator, f: &Functional) -> Result<f64> {
        let fu = self.unitary(c, c.modes * (rho.cutoff() - 1))?;
        evolve_replicas(rho, fu)?.measure(f)
    }

    pub fn circuit_minor(&mut self, preset: Preset, rho: &FockDensityOperator) -> Result<f64> {
        self.circuit_minor_via(preset, &preset.circuit(), rho)
    }

    /// Same readout as `preset`, through an alternative circuit.
    pub fn circuit_minor_via(&mut self, preset: Preset, c: &CircuitSpec, rho: &FockDensityOperator) -> Result<f64> {
        let (f, scale) = preset.readout();
        Ok(scale * self.run(c, rho, &f)?)
    }
}

/// One-shot version of [`CircuitRunner::circuit_minor`].
pub fn circuit_minor(preset: Preset, rho: &FockDensityOperator) -> Result<f64> {
    CircuitRunner::new().circuit_minor(preset, rho)
}

/// The output functional rewritten in the input modes (`a_out = u a_in`).
pub fn heisenberg_functional(c: &CircuitSpec, f: &Functional) -> Result<BosonPolynomial> {
    let u = compile_mode_unitary(c)?;
    f.polynomial().transform_modes(&u)
}

/// Fig. 3 readout `½⟨(n₁′ − n₂′)² − (n₁′ + n₂′)⟩` on two replicas.
pub fn interpolation_value(tau: f64, phi: f64, rho: &FockDensityOperator) -> Result<f64> {
    if !(0.5..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("interpolation transmittance {tau} outside [1/2, 1]")));
    }
    let p = heisenberg_functional(&CircuitSpec::fig3(tau, phi), &Functional::HalfSqDiffMinusHalfSum { m1: 1, m2: 2 })?;
    product_expectation(rho, &p)
}

/// `(2 + √2)/4`, where a single photon stops being detected.
pub fn tau_star() -> f64 {
    (2.0 + 2f64.sqrt()) / 4.0
}

/// Transmittance where the Fock state `|n⟩` switches to detected.
pub fn fock_boundary(n: usize) -> f64 {
    let n = n as f64;
    0.5 * (1.0 + (n / (n + 1.0)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub family: String,
    pub param: String,
    pub tau: f64,
    pub value: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateBoundary {
    pub family: String,
    pub param: String,
    /// Transmittances where the verdict flips, refined by bisection.
    pub crossings: Vec<f64>,
    pub detected_at_half: bool,
    pub detected_at_one: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub boundaries: Vec<StateBoundary>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSettings {
    pub phi: f64,
    /// Grid step over `[1/2, 1]`.
    pub step: f64,
    pub bisection_tol: f64,
    pub tail_tol: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { phi: FRAC_PI_2, step: 1.0 / 512.0, bisection_tol: 1e-6, tail_tol: 1e-12 }
    }
}

fn param_label(spec: &StateSpec) -> String {
    let label = spec.label();
    match (label.find('('), label.rfind(')')) {
        (Some(a), Some(b)) if b > a => label[a + 1..b].to_string(),
        _ => String::new(),
    }
}

/// Scans the Fig. 3 readout over `τ ∈ [1/2, 1]` for each state and locates
/// the transmittances where detection switches on or off.
pub fn detection_boundary_scan(states: &[StateSpec], settings: &ScanSettings) -> Result<ScanReport> {
    let steps = (0.5 / settings.step).round() as usize;
    let per_state: Vec<Result<(Vec<ScanPoint>, StateBoundary)>> = states
        .par_iter()
        .map(|spec| {
            let rho = spec.make_state(default_cutoff(spec, settings.tail_tol)?)?;
            let family = spec.family.name().to_string();
            let param = param_label(spec);
            let value_at = |tau: f64| interpolation_value(tau.clamp(0.5, 1.0), settings.phi, &rho);
            let detected = |v: f64| v < -DETECTION_EPSILON;
            let mut points = Vec::with_capacity(steps + 1);
            for i in 0..=steps {
                let tau = 0.5 + i as f64 * settings.step;
                let value = value_at(tau)?;
                points.push(ScanPoint {
                    family: family.clone(),
                    param: param.clone(),
                    tau,
                    value,
                    verdict: Verdict::from_value(value, DETECTION_EPSILON),
                });
            }
            let mut crossings = Vec::new();
            for w in points.windows(2) {
                if w[0].verdict != w[1].verdict {
                    let (mut lo, mut hi) = (w[0].tau, w[1].tau);
                    let lo_detected = detected(w[0].value);
                    while hi - lo > settings.bisection_tol {
                        let mid = 0.5 * (lo + hi);
                        if detected(value_at(mid)?) == lo_detected {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    crossings.push(0.5 * (lo + hi));
                }
            }
            let boundary = StateBoundary {
                family,
                param,
                crossings,
                detected_at_half: points[0].verdict.detected(),
                detected_at_one: points[steps].verdict.detected(),
            };
            Ok((points, boundary))
        })
        .collect();
    let mut report = ScanReport { points: Vec::new(), boundaries: Vec::new() };
    for r in per_state {
        let (p, b) = r?;
        report.points.extend(p);
        report.boundaries.push(b);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, unitarity_defect};
    use crate::minors::minor_value;
    use crate::moments::MomentMatrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fig1_matrix() {
        let u = compile_mode_unitary(&CircuitSpec::fig1()).unwrap();
        let s = 0.5f64.sqrt();
        let want = CMatrix::from_row_slice(2, 2, &[real(s), real(s), real(s), real(-s)]);
        assert!((u.matrix() - want).norm() < 1e-15);
    }

    #[test]
    fn fig4_first_two_splitters_rotate() {
        let mut c = CircuitSpec::fig4();
        c.elements.truncate(2);
        let u = compile_mode_unitary(&c).unwrap();
        let r = crate::multicopy::three_copy_rotation();
        assert!((u.matrix() - r.matrix()).norm() < 1e-15);
        assert!(unitarity_defect(compile_mode_unitary(&CircuitSpec::fig4()).unwrap().matrix()) < 1e-12);
    }

    #[test]
    fn phase_shifter_convention() {
        let u = compile_mode_unitary(&CircuitSpec { modes: 2, elements: vec![Element::phase_shifter(2, FRAC_PI_2)] }).unwrap();
        assert!((u.matrix()[(1, 1)] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn bad_elements_rejected() {
        let bad_tau = CircuitSpec { modes: 2, elements: vec![Element::beam_splitter(1, 2, 1.2)] };
        assert!(compile_mode_unitary(&bad_tau).is_err());
        let bad_mode = CircuitSpec { modes: 2, elements: vec![Element::phase_shifter(3, 0.1)] };
        assert!(matches!(compile_mode_unitary(&bad_mode), Err(Error::ModeOutOfRange { .. })));
    }

    #[test]
    fn circuit_json_round_trip() {
        let c = CircuitSpec::fig4();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"type\":\"beam_splitter\""));
        assert_eq!(serde_json::from_str::<CircuitSpec>(&s).unwrap(), c);
    }

    #[test]
    fn identity_and_number_conservation() {
        let id = fock_unitary(&ModeUnitary::identity(2), 8).unwrap().dense(5).unwrap();
        assert!((id.clone() - CMatrix::identity(25, 25)).norm() < 1e-12);
        assert!(fock_unitary(&compile_mode_unitary(&CircuitSpec::fig1()).unwrap(), 2).unwrap().branch_cut());
        let fu = fock_unitary(&compile_mode_unitary(&CircuitSpec::fig2()).unwrap(), 8).unwrap();
        let u = fu.dense(5).unwrap();
        let ntot = CMatrix::from_fn(25, 25, |i, j| if i == j { real((i / 5 + i % 5) as f64) } else { real(0.0) });
        assert!((&u * &ntot - &ntot * &u).norm() < 1e-10);
    }

    #[test]
    fn single_photon_splits_evenly() {
        let fu = fock_unitary(&compile_mode_unitary(&CircuitSpec::fig1()).unwrap(), 2).unwrap();
        let mut psi = CMatrix::zeros(4, 4);
        psi[(2, 2)] = real(1.0); // |1,0⟩
        let rho = FockDensityOperator::new(2, 2, psi, 0.0).unwrap();
        let dist = evolve_state(&rho, &fu).unwrap();
        assert_abs_diff_eq!(dist.mean(1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.mean(2).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fig1_functionals() {
        let coh = StateSpec::coherent(c(0.6, 0.2)).make_state(20).unwrap();
        let mut runner = CircuitRunner::new();
        assert_abs_diff_eq!(runner.run(&CircuitSpec::fig1(), &coh, &Functional::MeanN { mode: 2 }).unwrap(), 0.0, epsilon = 1e-12);
        let th = StateSpec::thermal(0.4).make_state(30).unwrap();
        assert_abs_diff_eq!(runner.circuit_minor(Preset::D12, &th).unwrap(), 0.4, epsilon = 1e-10);
        let one = StateSpec::fock(1).make_state(4).unwrap();
        assert_abs_diff_eq!(runner.circuit_minor(Preset::D23, &one).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn presets_match_minors() {
        let mut runner = CircuitRunner::new();
        for spec in [StateSpec::fock(3), StateSpec::squeezed(0.4).displaced(real(1.0)), StateSpec::cat_even(real(1.0))] {
            let rho = spec.make_state(10).unwrap();
            let m = MomentMatrix::build(&rho, 6).unwrap();
            for p in Preset::ALL {
                let got = runner.circuit_minor(p, &rho).unwrap();
                let want = minor_value(&m, p.subset()).unwrap();
                assert!((got - want).abs() < 1e-9, "{} {}: {got} vs {want}", spec.label(), p.name());
            }
        }
    }

    #[test]
    fn dft3_gives_same_d123() {
        let rho = StateSpec::superposition012(0.6, 0.64, 0.48).make_state(4).unwrap();
        let mut runner = CircuitRunner::new();
        let dft = heisenberg_functional(
            &CircuitSpec::identity(3),
            &Functional::HalfSqDiffMinusHalfSum { m1: 2, m2: 3 },
        )
        .unwrap()
        .transform_modes(&dft3_unitary())
        .unwrap();
        let via_dft = product_expectation(&rho, &dft).unwrap();
        let via_fig4 = runner.circuit_minor(Preset::D123, &rho).unwrap();
        assert_abs_diff_eq!(via_dft, via_fig4, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_pair_becomes_correlated() {
        let rho = StateSpec::squeezed(0.5).make_state(40).unwrap();
        let fu = fock_unitary(&compile_mode_unitary(&CircuitSpec::fig2()).unwrap(), 78).unwrap();
        let dist = evolve_replicas(&rho, &fu).unwrap();
        assert!(dist.prob_unequal(1, 2) < 1e-9);
        assert_abs_diff_eq!(dist.total_probability(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let f2 = StateSpec::fock(2).make_state(8).unwrap();
        assert_abs_diff_eq!(interpolation_value(1.0, FRAC_PI_2, &f2).unwrap(), -2.0, epsilon = 1e-12);
        let sq = StateSpec::squeezed(0.5).make_state(60).unwrap();
        assert_abs_diff_eq!(interpolation_value(0.5, FRAC_PI_2, &sq).unwrap(), -0.5f64.sinh().powi(2), epsilon = 1e-12);
        let f1 = StateSpec::fock(1).make_state(6).unwrap();
        let t = tau_star() + 0.01;
        assert!(interpolation_value(t, FRAC_PI_2, &f1).unwrap() < -DETECTION_EPSILON);
        assert!(interpolation_value(t, FRAC_PI_2, &f2).unwrap() >= 0.0);
        assert!(interpolation_value(0.4, FRAC_PI_2, &f2).is_err());
    }

    #[test]
    fn interpolation_matches_fock_simulation() {
        let rho = StateSpec::cat_odd(c(0.7, 0.4)).make_state(12).unwrap();
        let mut runner = CircuitRunner::new();
        for tau in [0.5, 0.7, 0.9, 1.0] {
            let fock = runner.run(&CircuitSpec::fig3(tau, 0.3), &rho, &Functional::HalfSqDiffMinusHalfSum { m1: 1, m2: 2 }).unwrap();
            let heis = interpolation_value(tau, 0.3, &rho).unwrap();
            assert_abs_diff_eq!(fock, heis, epsilon = 1e-10);
        }
    }

    #[test]
    fn boundary_scan_single_photon() {
        let report = detection_boundary_scan(&[StateSpec::fock(1), StateSpec::fock(2)], &ScanSettings::default()).unwrap();
        let b1 = &report.boundaries[0];
        assert_eq!(b1.crossings.len(), 1);
        assert!((b1.crossings[0] - tau_star()).abs() < 1e-5);
        assert!((report.boundaries[1].crossings[0] - fock_boundary(2)).abs() < 1e-5);
        assert!(b1.detected_at_one && !b1.detected_at_half);
    }

    #[test]
    fn cat_detection_examples() {
        let odd = StateSpec::cat_odd(real(1.0)).make_state(40).unwrap();
        let even = StateSpec::cat_even(real(1.0)).make_state(40).unwrap();
        assert!(interpolation_value(0.95, FRAC_PI_2, &odd).unwrap() < -DETECTION_EPSILON);
        assert!(interpolation_value(0.6, FRAC_PI_2, &even).unwrap() < -DETECTION_EPSILON);
    }
}
