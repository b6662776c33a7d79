//! Constructors for the single-mode state families used by the criteria,
//! with truncation-tail bookkeeping.
//!
//! Conventions: squeezing `S(ξ) = exp(½(ξ* a² − ξ a†²))`, `ξ = r e^{iφ}`, so
//! that `⟨a²⟩ = −e^{iφ} sinh r cosh r`; rotation `R(θ) = exp(−iθ a†a)`;
//! displacement `D(α) = exp(α a† − α* a)`. Cat normalizations are
//! `N± = 2(1 ± e^{−2|β|²})` and `|c±⟩ = (|β⟩ ± |−β⟩)/√N±`.
//!
//! Modifiers are applied in the order photon addition, photon subtraction,
//! rotation, displacement.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockDensityOperator, TailBound};
use crate::linalg::{expm_i_hermitian, real, CMatrix, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatParity {
    Even,
    Odd,
}

impl CatParity {
    pub fn flipped(self) -> Self {
        match self {
            CatParity::Even => CatParity::Odd,
            CatParity::Odd => CatParity::Even,
        }
    }
}

/// `N± = 2(1 ± e^{−2|β|²})` for the given parity (`+` even, `−` odd).
pub fn cat_norm(parity: CatParity, beta: Complex64) -> f64 {
    let e = (-2.0 * beta.norm_sqr()).exp();
    match parity {
        CatParity::Even => 2.0 * (1.0 + e),
        CatParity::Odd => 2.0 * (1.0 - e),
    }
}

/// `a|c±⟩ = β √(N∓/N±) |c∓⟩`: returns the flipped parity and the factor.
pub fn apply_annihilation_to_cat(parity: CatParity, beta: Complex64) -> Result<(CatParity, Complex64)> {
    if beta.norm() == 0.0 {
        return Err(Error::InvalidArgument("cat amplitude must be nonzero".into()));
    }
    let flipped = parity.flipped();
    let factor = beta * (cat_norm(flipped, beta) / cat_norm(parity, beta)).sqrt();
    Ok((flipped, factor))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Fock { n: usize },
    Coherent { alpha: Complex64 },
    Squeezed {
        r: f64,
        #[serde(default)]
        phi: f64,
    },
    CatEven { beta: Complex64 },
    CatOdd { beta: Complex64 },
    Thermal { nbar: f64 },
    SqueezedThermal {
        nbar: f64,
        r: f64,
        #[serde(default)]
        phi: f64,
    },
    #[serde(rename = "superposition012")]
    Superposition012 { a: f64, b: f64, c: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Fock { .. } => "fock",
            Family::Coherent { .. } => "coherent",
            Family::Squeezed { .. } => "squeezed",
            Family::CatEven { .. } => "cat_even",
            Family::CatOdd { .. } => "cat_odd",
            Family::Thermal { .. } => "thermal",
            Family::SqueezedThermal { .. } => "squeezed_thermal",
            Family::Superposition012 { .. } => "superposition012",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Modifiers {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<f64>,
    #[serde(default)]
    pub photon_added: u32,
    #[serde(default)]
    pub photon_subtracted: u32,
}

impl Modifiers {
    pub fn is_empty(&self) -> bool {
        self.displacement.is_none() && self.rotation.is_none() && self.photon_added == 0 && self.photon_subtracted == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Modifiers::is_empty")]
    pub modifiers: Modifiers,
}

impl StateSpec {
    pub fn new(family: Family) -> Self {
        StateSpec { family, modifiers: Modifiers::default() }
    }

    pub fn fock(n: usize) -> Self {
        Self::new(Family::Fock { n })
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self::new(Family::Coherent { alpha })
    }

    pub fn squeezed(r: f64) -> Self {
        Self::new(Family::Squeezed { r, phi: 0.0 })
    }

    pub fn squeezed_with_phase(r: f64, phi: f64) -> Self {
        Self::new(Family::Squeezed { r, phi })
    }

    pub fn cat_even(beta: Complex64) -> Self {
        Self::new(Family::CatEven { beta })
    }

    pub fn cat_odd(beta: Complex64) -> Self {
        Self::new(Family::CatOdd { beta })
    }

    pub fn cat(parity: CatParity, beta: Complex64) -> Self {
        match parity {
            CatParity::Even => Self::cat_even(beta),
            CatParity::Odd => Self::cat_odd(beta),
        }
    }

    pub fn thermal(nbar: f64) -> Self {
        Self::new(Family::Thermal { nbar })
    }

    pub fn squeezed_thermal(nbar: f64, r: f64) -> Self {
        Self::new(Family::SqueezedThermal { nbar, r, phi: 0.0 })
    }

    pub fn superposition012(a: f64, b: f64, c: f64) -> Self {
        Self::new(Family::Superposition012 { a, b, c })
    }

    pub fn displaced(mut self, alpha: Complex64) -> Self {
        let prev = self.modifiers.displacement.unwrap_or_default();
        self.modifiers.displacement = Some(prev + alpha);
        self
    }

    pub fn rotated(mut self, theta: f64) -> Self {
        self.modifiers.rotation = Some(self.modifiers.rotation.unwrap_or(0.0) + theta);
        self
    }

    pub fn photon_added(mut self, count: u32) -> Self {
        self.modifiers.photon_added += count;
        self
    }

    pub fn photon_subtracted(mut self, count: u32) -> Self {
        self.modifiers.photon_subtracted += count;
        self
    }

    /// Short human-readable label used in reports, e.g. `squeezed(r=0.5)`.
    pub fn label(&self) -> String {
        let fmt_c = |z: Complex64| {
            if z.im == 0.0 {
                format!("{}", z.re)
            } else {
                format!("{}{:+}i", z.re, z.im)
            }
        };
        let mut s = match &self.family {
            Family::Fock { n } => format!("fock(n={n})"),
            Family::Coherent { alpha } => format!("coherent(alpha={})", fmt_c(*alpha)),
            Family::Squeezed { r, phi } if *phi == 0.0 => format!("squeezed(r={r})"),
            Family::Squeezed { r, phi } => format!("squeezed(r={r},phi={phi})"),
            Family::CatEven { beta } => format!("cat_even(beta={})", fmt_c(*beta)),
            Family::CatOdd { beta } => format!("cat_odd(beta={})", fmt_c(*beta)),
            Family::Thermal { nbar } => format!("thermal(nbar={nbar})"),
            Family::SqueezedThermal { nbar, r, phi } if *phi == 0.0 => format!("squeezed_thermal(nbar={nbar},r={r})"),
            Family::SqueezedThermal { nbar, r, phi } => format!("squeezed_thermal(nbar={nbar},r={r},phi={phi})"),
            Family::Superposition012 { a, b, c } => format!("superposition012(a={a},b={b},c={c})"),
        };
        let m = &self.modifiers;
        if m.photon_added > 0 {
            s = format!("add{}[{s}]", m.photon_added);
        }
        if m.photon_subtracted > 0 {
            s = format!("sub{}[{s}]", m.photon_subtracted);
        }
        if let Some(t) = m.rotation {
            s = format!("rot({t})[{s}]");
        }
        if let Some(a) = m.displacement {
            s = format!("disp({})[{s}]", fmt_c(a));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be finite and non-negative, got {x}")))
            }
        };
        match &self.family {
            Family::Fock { .. } => {}
            Family::Coherent { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidArgument("non-finite coherent amplitude".into()));
                }
            }
            Family::Squeezed { r, phi } => {
                finite_nonneg("r", *r)?;
                if !phi.is_finite() {
                    return Err(Error::InvalidArgument("non-finite squeezing angle".into()));
                }
            }
            Family::CatEven { beta } => {
                if !beta.is_finite() {
                    return Err(Error::InvalidArgument("non-finite cat amplitude".into()));
                }
            }
            Family::CatOdd { beta } => {
                if !beta.is_finite() || beta.norm() == 0.0 {
                    return Err(Error::InvalidArgument("odd cat needs a finite nonzero amplitude".into()));
                }
            }
            Family::Thermal { nbar } => finite_nonneg("nbar", *nbar)?,
            Family::SqueezedThermal { nbar, r, phi } => {
                finite_nonneg("nbar", *nbar)?;
                finite_nonneg("r", *r)?;
                if !phi.is_finite() {
                    return Err(Error::InvalidArgument("non-finite squeezing angle".into()));
                }
            }
            Family::Superposition012 { a, b, c } => {
                let norm = a * a + b * b + c * c;
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("a²+b²+c² = {norm}, expected 1")));
                }
            }
        }
        if let Some(a) = self.modifiers.displacement {
            if !a.is_finite() {
                return Err(Error::InvalidArgument("non-finite displacement".into()));
            }
        }
        if let Some(t) = self.modifiers.rotation {
            if !t.is_finite() {
                return Err(Error::InvalidArgument("non-finite rotation".into()));
            }
        }
        Ok(())
    }

    /// True when the base family is pure and its Fock amplitudes are known in
    /// closed form.
    fn has_amplitudes(&self) -> bool {
        !matches!(self.family, Family::Thermal { .. } | Family::SqueezedThermal { .. })
    }

    /// Fock amplitudes `⟨n|ψ⟩` for `n < len` of a pure base family.
    pub fn amplitudes(&self, len: usize) -> Result<Vec<Complex64>> {
        self.validate()?;
        let zero = Complex64::new(0.0, 0.0);
        let mut psi = vec![zero; len];
        match &self.family {
            Family::Fock { n } => {
                if *n < len {
                    psi[*n] = real(1.0);
                }
            }
            Family::Coherent { alpha } => fill_coherent(&mut psi, *alpha, 1.0),
            Family::Squeezed { r, phi } => {
                let t = -Complex64::from_polar(r.tanh(), *phi);
                let mut amp = real(1.0 / r.cosh().sqrt());
                for k in 0..len.div_ceil(2) {
                    if k > 0 {
                        let kk = k as f64;
                        amp *= t * ((2.0 * kk - 1.0) / (2.0 * kk)).sqrt();
                    }
                    if 2 * k < len {
                        psi[2 * k] = amp;
                    }
                }
            }
            Family::CatEven { beta } | Family::CatOdd { beta } => {
                let parity = if matches!(self.family, Family::CatEven { .. }) { CatParity::Even } else { CatParity::Odd };
                let norm = cat_norm(parity, *beta);
                if norm == 0.0 {
                    return Err(Error::InvalidState("cat state with zero norm".into()));
                }
                fill_coherent(&mut psi, *beta, 1.0);
                for (n, z) in psi.iter_mut().enumerate() {
                    let keep = match parity {
                        CatParity::Even => n % 2 == 0,
                        CatParity::Odd => n % 2 == 1,
                    };
                    *z = if keep { *z * (2.0 / norm.sqrt()) } else { zero };
                }
            }
            Family::Superposition012 { a, b, c } => {
                for (n, v) in [a, b, c].into_iter().enumerate() {
                    if n < len {
                        psi[n] = real(*v);
                    }
                }
            }
            Family::Thermal { .. } | Family::SqueezedThermal { .. } => {
                return Err(Error::Unsupported(format!("{} is a mixed state", self.family.name())));
            }
        }
        Ok(psi)
    }

    /// Exact photon-number populations of the unmodified base family.
    fn base_population(&self, n: usize) -> Option<f64> {
        match &self.family {
            Family::Fock { n: k } => Some(if n == *k { 1.0 } else { 0.0 }),
            Family::Coherent { alpha } => Some(poisson(alpha.norm_sqr(), n)),
            Family::Squeezed { r, .. } => {
                if n % 2 == 1 {
                    return Some(0.0);
                }
                let k = n / 2;
                // |ψ_{2k}|² = tanh^{2k} r (2k)! / (4^k k!² cosh r)
                let ln = 2.0 * k as f64 * r.tanh().ln() + ln_factorial(2 * k) - 2.0 * ln_factorial(k)
                    - k as f64 * 4f64.ln()
                    - r.cosh().ln();
                Some(if *r == 0.0 { if k == 0 { 1.0 } else { 0.0 } } else { ln.exp() })
            }
            Family::CatEven { beta } | Family::CatOdd { beta } => {
                let even = matches!(self.family, Family::CatEven { .. });
                if (n % 2 == 0) != even {
                    return Some(0.0);
                }
                let parity = if even { CatParity::Even } else { CatParity::Odd };
                Some(4.0 * poisson(beta.norm_sqr(), n) / cat_norm(parity, *beta))
            }
            Family::Thermal { nbar } => Some(thermal_population(*nbar, n)),
            Family::Superposition012 { a, b, c } => Some(match n {
                0 => a * a,
                1 => b * b,
                2 => c * c,
                _ => 0.0,
            }),
            Family::SqueezedThermal { nbar, r, .. } => {
                if *r == 0.0 {
                    Some(thermal_population(*nbar, n))
                } else {
                    None
                }
            }
        }
    }

    /// Lowest cutoff that holds the family's finite support.
    fn support_floor(&self) -> usize {
        let base = match &self.family {
            Family::Fock { n } => n + 1,
            Family::Superposition012 { .. } => 3,
            _ => 2,
        };
        base + self.modifiers.photon_added as usize
    }

    /// Builds the density operator on `cutoff` levels.
    pub fn make_state(&self, cutoff: usize) -> Result<FockDensityOperator> {
        self.validate()?;
        if cutoff < 2 {
            return Err(Error::CutoffTooSmall { cutoff, reason: "need at least two levels".into() });
        }
        if let Family::Fock { n } = self.family {
            if n + self.modifiers.photon_added as usize >= cutoff {
                return Err(Error::CutoffTooSmall { cutoff, reason: format!("Fock index {n} does not fit") });
            }
        }
        if self.modifiers.is_empty() {
            return self.make_base(cutoff);
        }
        let m = &self.modifiers;
        let displacement_room = m.displacement.map_or(0, |a| (a.norm_sqr() * 4.0 + 12.0 * a.norm()).ceil() as usize);
        let work = (2 * cutoff).max(cutoff + 40) + displacement_room + m.photon_subtracted as usize;
        let base = self.make_base(work)?;
        let base_tail = base.tail_mass();
        let mut rho = base.matrix().clone();
        let (a, adag) = fock::ladder(work)?;
        for _ in 0..m.photon_added {
            rho = &adag * rho * &a;
        }
        for _ in 0..m.photon_subtracted {
            rho = &a * rho * &adag;
        }
        let tr = rho.trace().re;
        if tr <= 1e-300 {
            return Err(Error::InvalidState("photon subtraction annihilated the state".into()));
        }
        rho /= real(tr);
        if let Some(theta) = m.rotation {
            let phases: Vec<Complex64> = (0..work).map(|n| Complex64::from_polar(1.0, -theta * n as f64)).collect();
            for i in 0..work {
                for j in 0..work {
                    rho[(i, j)] *= phases[i] * phases[j].conj();
                }
            }
        }
        if let Some(alpha) = m.displacement {
            // D(α) = exp(i G) with G = −i(α a† − α* a)
            let gen = (&adag * alpha - &a * alpha.conj()) * (-I);
            let d = expm_i_hermitian(&gen, 1.0);
            rho = &d * rho * d.adjoint();
        }
        let big = FockDensityOperator::from_truncated_mixed(1, work, rho, base_tail)?;
        big.project(cutoff)
    }

    fn make_base(&self, cutoff: usize) -> Result<FockDensityOperator> {
        if self.has_amplitudes() {
            let psi = self.amplitudes(cutoff)?;
            let declared = self.base_tail(cutoff, 0);
            return FockDensityOperator::from_truncated_pure(1, cutoff, &psi, declared);
        }
        match &self.family {
            Family::Thermal { nbar } => {
                let diag: Vec<Complex64> = (0..cutoff).map(|n| real(thermal_population(*nbar, n))).collect();
                let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
                FockDensityOperator::from_truncated_mixed(1, cutoff, m, 0.0)
            }
            Family::SqueezedThermal { nbar, r, phi } => {
                // Σ_k p_k S|k⟩⟨k|S†. With b = μ a + ν a†, b S|k⟩ = √k S|k−1⟩ gives a
                // recursion upward in n that is stable (its free solutions decay
                // like tanh r) and needs no levels beyond the cutoff.
                let zero = Complex64::new(0.0, 0.0);
                let terms = (0..).find(|&k| thermal_population(*nbar, k) < 1e-34).unwrap_or(1).max(1);
                let (mu, nu) = (r.cosh(), Complex64::from_polar(r.sinh(), *phi));
                let t_conj = Complex64::from_polar(r.tanh(), -phi);
                let mut prev = StateSpec::squeezed_with_phase(*r, *phi).amplitudes(cutoff)?;
                let mut head = vec![prev[0]];
                let mut rho = CMatrix::zeros(cutoff, cutoff);
                for k in 0..terms {
                    let psi = if k == 0 {
                        prev.clone()
                    } else {
                        let kf = k as f64;
                        let mut v = vec![zero; cutoff];
                        v[0] = if k % 2 == 0 { t_conj * ((kf - 1.0) / kf).sqrt() * head[k - 2] } else { zero };
                        v[1] = prev[0] * (kf.sqrt() / mu);
                        for n in 1..cutoff - 1 {
                            let nf = n as f64;
                            v[n + 1] = (prev[n] * kf.sqrt() - nu * nf.sqrt() * v[n - 1]) / (mu * (nf + 1.0).sqrt());
                        }
                        head.push(v[0]);
                        v
                    };
                    let w = thermal_population(*nbar, k);
                    for j in 0..cutoff {
                        let cj = psi[j].conj() * w;
                        if cj == zero {
                            continue;
                        }
                        for i in 0..cutoff {
                            rho[(i, j)] += psi[i] * cj;
                        }
                    }
                    prev = psi;
                }
                FockDensityOperator::from_truncated_mixed(1, cutoff, rho, 0.0)
            }
            _ => unreachable!("pure families handled above"),
        }
    }

    fn base_tail(&self, cutoff: usize, order: u32) -> f64 {
        if self.base_population(0).is_none() {
            return 0.0;
        }
        fock::tail_sum(cutoff, order, |n| self.base_population(n).unwrap_or(0.0))
    }
}

/// Numeric squeeze operator `exp(½(ξ* a² − ξ a†²))` on `cutoff` levels.
pub fn squeeze_unitary(cutoff: usize, r: f64, phi: f64) -> Result<CMatrix> {
    let (a, adag) = fock::ladder(cutoff)?;
    let xi = Complex64::from_polar(r, phi);
    let a2 = &a * &a;
    let ad2 = &adag * &adag;
    // K = ½(ξ* a² − ξ a†²) is anti-Hermitian; K = i G with G = −i K
    let k = (a2 * xi.conj() - ad2 * xi) * real(0.5);
    let g = k * (-I);
    Ok(expm_i_hermitian(&g, 1.0))
}

impl TailBound for StateSpec {
    fn min_cutoff(&self) -> usize {
        self.support_floor()
    }

    fn weighted_tail(&self, cutoff: usize, order: u32) -> Result<f64> {
        self.validate()?;
        if self.modifiers.is_empty() && self.base_population(0).is_some() {
            return Ok(self.base_tail(cutoff, order));
        }
        // Mixed or modified states: read populations off a much larger
        // construction and sum the weighted remainder there.
        let big = (2 * cutoff).max(cutoff + 60);
        let rho = self.make_state(big)?;
        let pops = rho.populations();
        let mut acc: f64 = pops[cutoff..]
            .iter()
            .enumerate()
            .map(|(i, p)| p.max(0.0) * ((cutoff + i + 1) as f64).powi(order as i32))
            .sum();
        acc += rho.tail_mass() * ((big + 1) as f64).powi(order as i32);
        Ok(acc)
    }
}

/// Default cutoff for moment work of total order up to 4.
///
/// Families with closed-form populations use [`fock::auto_cutoff`]. The rest
/// are built once on a generous reference size and the weighted tail is read
/// off its populations, doubling the reference until the cutoff sits well
/// inside it.
pub fn default_cutoff(spec: &StateSpec, tail_tol: f64) -> Result<usize> {
    const ORDER: u32 = 4;
    if spec.modifiers.is_empty() && spec.base_population(0).is_some() {
        return fock::auto_cutoff(spec, tail_tol, ORDER);
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!("tail tolerance {tail_tol} outside (0, 1e-3]")));
    }
    let floor = spec.support_floor().max(2);
    let mut big = (4 * floor).max(64);
    loop {
        let rho = spec.make_state(big)?;
        let pops = rho.populations();
        // weight past the reference size, extrapolated from the decay of the
        // last populations (the trace deficit itself is rounding noise here)
        let (hi, lo) = (pops[big - 1].max(0.0), pops[big - 17].max(0.0));
        let mut tail = if hi == 0.0 {
            0.0
        } else if lo > hi {
            let q = (hi / lo).powf(1.0 / 16.0);
            hi * q / (1.0 - q) * ((big + 1) as f64).powi(ORDER as i32)
        } else if hi < 1e-28 {
            // flat at the round-off floor of squared amplitudes
            hi * ((big + 1) as f64).powi(ORDER as i32 + 1)
        } else {
            f64::INFINITY
        };
        let mut d = big;
        while d > floor {
            let next = tail + pops[d - 1].max(0.0) * (d as f64).powi(ORDER as i32);
            if next > tail_tol {
                break;
            }
            tail = next;
            d -= 1;
        }
        if 4 * d <= 3 * big {
            return Ok(d + ORDER as usize);
        }
        big *= 2;
        if big > 2 * fock::MAX_AUTO_CUTOFF {
            return Err(Error::ResourceLimit { required: big, budget: 2 * fock::MAX_AUTO_CUTOFF });
        }
    }
}

fn fill_coherent(psi: &mut [Complex64], alpha: Complex64, scale: f64) {
    let mut amp = real(scale * (-alpha.norm_sqr() / 2.0).exp());
    for (n, z) in psi.iter_mut().enumerate() {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        *z = amp;
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn poisson(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mean + n as f64 * mean.ln() - ln_factorial(n)).exp()
}

fn thermal_population(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let q = nbar / (nbar + 1.0);
    q.powi(n as i32) / (nbar + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boson_algebra::{BosonMonomial, BosonPolynomial};
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;

    fn moment(rho: &FockDensityOperator, k: u8, l: u8) -> Complex64 {
        let p = BosonPolynomial::term(BosonMonomial::from_powers(&[(0, k, l)]), real(1.0));
        rho.expect_polynomial(&p).unwrap()
    }

    #[test]
    fn fock_two_moments() {
        let rho = StateSpec::fock(2).make_state(6).unwrap();
        assert_abs_diff_eq!(moment(&rho, 1, 1).re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(moment(&rho, 2, 2).re, 2.0, epsilon = 1e-14);
        assert!(StateSpec::fock(5).make_state(5).is_err());
    }

    #[test]
    fn odd_cat_mean_number() {
        let beta = real(1.0);
        let rho = StateSpec::cat_odd(beta).make_state(40).unwrap();
        let expected = cat_norm(CatParity::Even, beta) / cat_norm(CatParity::Odd, beta);
        assert_abs_diff_eq!(moment(&rho, 1, 1).re, expected, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_second_moment_sign() {
        let r: f64 = 0.5;
        let rho = StateSpec::squeezed(r).make_state(80).unwrap();
        assert_abs_diff_eq!(moment(&rho, 0, 2).re, -r.sinh() * r.cosh(), epsilon = 1e-12);
        assert_abs_diff_eq!(moment(&rho, 1, 1).re, r.sinh().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn numeric_squeeze_matches_series() {
        let r = 0.4;
        let phi = 0.9;
        let d = 60;
        let s = squeeze_unitary(2 * d, r, phi).unwrap();
        let series = StateSpec::squeezed_with_phase(r, phi).amplitudes(d).unwrap();
        for n in 0..d / 2 {
            assert!((s[(n, 0)] - series[n]).norm() < 1e-12, "level {n}");
        }
    }

    #[test]
    fn squeezed_thermal_reduces_to_thermal() {
        let rho = StateSpec::squeezed_thermal(1.0, 0.0).make_state(60).unwrap();
        assert_abs_diff_eq!(moment(&rho, 1, 1).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_thermal_quadrature_variances() {
        let (nbar, r) = (0.5, 0.35);
        let rho = StateSpec::squeezed_thermal(nbar, r).make_state(60).unwrap();
        let n = moment(&rho, 1, 1).re;
        let a2 = moment(&rho, 0, 2);
        // x = (a + a†)/√2: ⟨x²⟩ = ½(⟨a²⟩ + ⟨a†²⟩ + 2⟨a†a⟩ + 1)
        let var_x = 0.5 * (2.0 * a2.re + 2.0 * n + 1.0);
        let var_p = 0.5 * (-2.0 * a2.re + 2.0 * n + 1.0);
        assert_abs_diff_eq!(var_x, (nbar + 0.5) * (-2.0 * r).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(var_p, (nbar + 0.5) * (2.0 * r).exp(), epsilon = 1e-10);
    }

    #[test]
    fn displacement_shifts_first_moment() {
        let alpha = c(0.6, -0.3);
        let spec = StateSpec::squeezed(0.3).displaced(alpha);
        let rho = spec.make_state(40).unwrap();
        assert!((moment(&rho, 0, 1) - alpha).norm() < 1e-10);
        let coh = StateSpec::coherent(c(0.2, 0.1)).displaced(alpha).make_state(40).unwrap();
        assert!((moment(&coh, 0, 1) - (alpha + c(0.2, 0.1))).norm() < 1e-10);
    }

    #[test]
    fn rotation_phases_moments() {
        let theta = 0.7;
        let base = StateSpec::squeezed(0.4).make_state(50).unwrap();
        let rot = StateSpec::squeezed(0.4).rotated(theta).make_state(50).unwrap();
        let expected = moment(&base, 0, 2) * Complex64::from_polar(1.0, -2.0 * theta);
        assert!((moment(&rot, 0, 2) - expected).norm() < 1e-10);
    }

    #[test]
    fn annihilation_on_cats() {
        let beta = real(1.0);
        let (p, f) = apply_annihilation_to_cat(CatParity::Odd, beta).unwrap();
        assert_eq!(p, CatParity::Even);
        let expected = (cat_norm(CatParity::Even, beta) / cat_norm(CatParity::Odd, beta)).sqrt();
        assert_abs_diff_eq!(f.re, expected, epsilon = 1e-15);
        let (p2, f2) = apply_annihilation_to_cat(p, beta).unwrap();
        assert_eq!(p2, CatParity::Odd);
        assert!((f * f2 - beta * beta).norm() < 1e-14);
        assert!(apply_annihilation_to_cat(CatParity::Even, real(0.0)).is_err());

        // the numeric states agree and the two parities are orthogonal
        let d = 40;
        let even = StateSpec::cat_even(beta).amplitudes(d).unwrap();
        let odd = StateSpec::cat_odd(beta).amplitudes(d).unwrap();
        let overlap: Complex64 = even.iter().zip(&odd).map(|(x, y)| x.conj() * y).sum();
        assert!(overlap.norm() < 1e-15);
        for n in 0..d - 1 {
            let a_odd = odd[n + 1] * ((n + 1) as f64).sqrt();
            assert!((a_odd - f * even[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn superposition_must_be_normalized() {
        assert!(StateSpec::superposition012(0.5, 0.5, 0.5).make_state(5).is_err());
        let s = 0.5f64.sqrt();
        assert!(StateSpec::superposition012(s, s, 0.0).make_state(5).is_ok());
    }

    #[test]
    fn auto_cutoff_choices() {
        let d = fock::auto_cutoff(&StateSpec::fock(3), 1e-12, 0).unwrap();
        assert_eq!(d, 4);
        let d4 = fock::auto_cutoff(&StateSpec::fock(3), 1e-12, 4).unwrap();
        assert_eq!(d4, 8);
        let coh = StateSpec::coherent(real(1.0));
        let d = fock::auto_cutoff(&coh, 1e-12, 0).unwrap();
        let tail = |d: usize| 1.0 - (0..d).map(|n| poisson(1.0, n)).sum::<f64>();
        assert!(tail(d) <= 1e-12 + 1e-16);
        assert!(tail(d - 1) > 1e-12);
        let sq = StateSpec::squeezed(1.0);
        let d = fock::auto_cutoff(&sq, 1e-12, 0).unwrap();
        let partial: f64 = (0..d).map(|n| sq.base_population(n).unwrap()).sum();
        assert!(1.0 - partial <= 1e-12 + 1e-15);
    }

    #[test]
    fn photon_subtracted_squeezed_thermal_is_sub_poissonian() {
        let rho = StateSpec::squeezed_thermal(0.01, 0.1).photon_subtracted(1).make_state(30).unwrap();
        let n = moment(&rho, 1, 1).re;
        let d15 = moment(&rho, 2, 2).re - n * n;
        assert!(d15 < 0.0, "d15 = {d15}");
    }

    #[test]
    fn json_round_trip() {
        let spec = StateSpec::cat_even(c(1.0, 0.5)).displaced(c(0.5, 0.0));
        let s = serde_json::to_string(&spec).unwrap();
        let back: StateSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let parsed: StateSpec = serde_json::from_str(r#"{"family":"squeezed","r":0.5}"#).unwrap();
        assert_eq!(parsed, StateSpec::squeezed(0.5));
    }
}
