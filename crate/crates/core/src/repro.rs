//! Reproduction jobs: every table and figure dataset plus the verification
//! suites, each emitted as a CSV table and a JSON summary of named checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use itertools::Itertools;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circuits::{
    dft3_unitary, detection_boundary_scan, fock_boundary, interpolation_value, tau_star, CircuitRunner, CircuitSpec,
    Preset, ScanSettings,
};
use crate::error::{Error, Result};
use crate::fock::FockDensityOperator;
use crate::linalg::{c, real};
use crate::minors::{
    analytic_minor, d1235_decompositions, displacement_delta_d15, gaussian_nonclassical, is_dominant, mandel_q,
    minor_value, parse_subset, squeezed_thermal_minor, subset_label, table_iv_delta_d15, DETECTION_EPSILON,
    TABLE_I_ROWS,
};
use crate::moments::{moment, table_moment, AnalyticFamily, MomentMatrix};
use crate::multicopy::{
    build_multicopy, compact_form_check, f1235_even_permutations, f1235_ladder_form, f1235_output_check,
    f1235_pairings, ly_vector_rotation_check, multicopy_expectation, multicopy_expectation_tensor, SignMatch,
    SYMBOLIC_TOL,
};
use crate::states::{default_cutoff, CatParity, Family, StateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Table1,
    Table2,
    Table3,
    Table4,
    Fig4,
    Fig5,
    Fig6,
    VerifyMulticopy,
    VerifyCircuits,
    VerifyProperties,
}

impl Target {
    pub const ALL: [Target; 10] = [
        Target::Table1,
        Target::Table2,
        Target::Table3,
        Target::Table4,
        Target::Fig4,
        Target::Fig5,
        Target::Fig6,
        Target::VerifyMulticopy,
        Target::VerifyCircuits,
        Target::VerifyProperties,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Table3 => "table3",
            Target::Table4 => "table4",
            Target::Fig4 => "fig4",
            Target::Fig5 => "fig5",
            Target::Fig6 => "fig6",
            Target::VerifyMulticopy => "verify_multicopy",
            Target::VerifyCircuits => "verify_circuits",
            Target::VerifyProperties => "verify_properties",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown target '{s}'")))
    }
}

/// Parameter battery shared by the tables and verification suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Battery {
    pub fock: Vec<usize>,
    pub squeezed: Vec<f64>,
    pub cats: Vec<Complex64>,
    pub nbar: Vec<f64>,
    pub gaussian_r: Vec<f64>,
    pub displacements: Vec<Complex64>,
    pub coherent: Vec<Complex64>,
    /// Real amplitudes `(a, b, c)` of `a|0⟩ + b|1⟩ + c|2⟩`.
    pub superpositions: Vec<[f64; 3]>,
}

/// Zero-mean superposition `−√2 c|0⟩ + √(1 − 3c²)|1⟩ + c|2⟩`.
pub fn centered_superposition(c: f64) -> [f64; 3] {
    [-(2f64.sqrt()) * c, (1.0 - 3.0 * c * c).sqrt(), c]
}

impl Default for Battery {
    fn default() -> Self {
        Battery {
            fock: vec![1, 2, 3],
            squeezed: vec![0.2, 0.5, 1.0],
            cats: vec![real(0.5), real(1.0), real(1.5)],
            nbar: vec![0.2, 0.5, 1.0],
            gaussian_r: vec![0.1, 0.35, 0.7],
            displacements: vec![real(0.5), c(1.0, 0.5)],
            coherent: vec![real(0.8), c(0.7, 0.3), c(1.2, -0.4)],
            superpositions: vec![
                [0.6, 0.64, 0.48],
                [0.8, 0.0, 0.6],
                centered_superposition(0.3),
                centered_superposition(0.4),
                centered_superposition(0.5),
            ],
        }
    }
}

impl Battery {
    fn superposition_states(&self) -> Vec<StateSpec> {
        self.superpositions.iter().map(|&[a, b, c]| StateSpec::superposition012(a, b, c)).collect()
    }

    fn cat_states(&self) -> Vec<StateSpec> {
        let mut v: Vec<StateSpec> = self.cats.iter().map(|&b| StateSpec::cat_even(b)).collect();
        v.extend(self.cats.iter().map(|&b| StateSpec::cat_odd(b)));
        v
    }

    /// Fock, squeezed and cat states: the families with tabulated minors.
    pub fn tabulated(&self) -> Vec<StateSpec> {
        let mut v: Vec<StateSpec> = self.fock.iter().map(|&n| StateSpec::fock(n)).collect();
        v.extend(self.squeezed.iter().map(|&r| StateSpec::squeezed(r)));
        v.extend(self.cat_states());
        v
    }

    pub fn gaussian(&self) -> Vec<StateSpec> {
        let mut v: Vec<StateSpec> = self.nbar.iter().map(|&n| StateSpec::thermal(n)).collect();
        for &n in &self.nbar {
            v.extend(self.gaussian_r.iter().map(|&r| StateSpec::squeezed_thermal(n, r)));
        }
        v
    }

    /// Every battery state, displacements excluded.
    pub fn all(&self) -> Vec<StateSpec> {
        let mut v = self.tabulated();
        v.extend(self.gaussian());
        v.extend(self.coherent.iter().map(|&a| StateSpec::coherent(a)));
        v.extend(self.superposition_states());
        v
    }

    /// Battery states with `⟨a⟩ = 0`.
    pub fn centered(&self) -> Vec<StateSpec> {
        let mut v = self.tabulated();
        v.extend(self.gaussian());
        v.extend(
            self.superpositions
                .iter()
                .filter(|[a, b, c]| (b * (a + 2f64.sqrt() * c)).abs() < 1e-14)
                .map(|&[a, b, c]| StateSpec::superposition012(a, b, c)),
        );
        v
    }

    /// Bases that are displaced in the invariance and contract checks.
    fn displacement_bases(&self) -> Vec<StateSpec> {
        let mut v = vec![StateSpec::fock(1), StateSpec::squeezed(0.5), StateSpec::cat_even(real(1.0))];
        v.extend(self.nbar.first().map(|&n| StateSpec::thermal(n)));
        v.extend(self.superposition_states().into_iter().take(1));
        v
    }
}

/// Job settings; every field is optional in the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproConfig {
    /// Overrides the primary comparison tolerance of the chosen target.
    pub tol: Option<f64>,
    pub tail_tol: f64,
    /// Overrides the grid resolution of table3, fig4, fig5 and fig6.
    pub grid: Option<usize>,
    pub battery: Battery,
}

impl Default for ReproConfig {
    fn default() -> Self {
        ReproConfig { tol: None, tail_tol: 1e-12, grid: None, battery: Battery::default() }
    }
}

impl ReproConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ReproConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::Config(format!("tail tolerance {} outside (0, 1)", self.tail_tol)));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerance {t} must be positive")));
            }
        }
        if let Some(g) = self.grid {
            if g < 2 {
                return Err(Error::Config(format!("grid resolution {g} must be at least 2")));
            }
        }
        for spec in self.battery.all() {
            spec.validate().map_err(|e| Error::Config(format!("battery state {}: {e}", spec.label())))?;
        }
        Ok(())
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproJob {
    pub target: Target,
    pub config: ReproConfig,
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub tolerance: f64,
    pub max_residual: f64,
    pub cases: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

struct CheckAcc {
    name: String,
    tolerance: f64,
    max_residual: f64,
    cases: usize,
    failures: usize,
    detail: Vec<String>,
}

impl CheckAcc {
    fn new(name: &str, tolerance: f64) -> Self {
        CheckAcc { name: name.into(), tolerance, max_residual: 0.0, cases: 0, failures: 0, detail: Vec::new() }
    }

    fn add(&mut self, residual: f64, pass: bool, case: impl FnOnce() -> String) -> bool {
        self.cases += 1;
        if residual.is_nan() {
            self.max_residual = f64::NAN;
        } else if !self.max_residual.is_nan() {
            self.max_residual = self.max_residual.max(residual);
        }
        if !pass {
            self.failures += 1;
            if self.detail.len() < 8 {
                self.detail.push(case());
            }
        }
        pass
    }

    fn note(&mut self, text: impl Into<String>) {
        self.detail.push(text.into());
    }

    fn finish(self) -> Check {
        Check {
            pass: self.failures == 0 && self.cases > 0,
            name: self.name,
            tolerance: self.tolerance,
            max_residual: self.max_residual,
            cases: self.cases,
            failures: self.failures,
            detail: self.detail.join("; "),
        }
    }
}

/// Header plus string cells, written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub target: Target,
    pub table: Table,
    pub checks: Vec<Check>,
    /// Target-specific summary data.
    pub extra: serde_json::Value,
    /// Additional output files, name and contents.
    pub files: Vec<(String, String)>,
    settings: ReproConfig,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> serde_json::Value {
        let max_residual = self
            .checks
            .iter()
            .map(|c| c.max_residual)
            .fold(0.0f64, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
        json!({
            "target": self.target.as_str(),
            "pass": self.pass(),
            "rows": self.table.rows.len(),
            "max_residual": max_residual,
            "checks": self.checks,
            "settings": self.settings,
            "data": self.extra,
        })
    }

    /// Writes `<target>.csv`, `<target>.summary.json` and any extra files.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let name = self.target.as_str();
        std::fs::write(dir.join(format!("{name}.csv")), self.table.to_csv()?)?;
        let summary = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join(format!("{name}.summary.json")), summary + "\n")?;
        for (file, contents) in &self.files {
            std::fs::write(dir.join(file), contents)?;
        }
        Ok(())
    }
}

pub fn run(job: &ReproJob) -> Result<Report> {
    job.config.validate()?;
    let cfg = &job.config;
    let (table, checks, extra, files) = match job.target {
        Target::Table1 => table1(cfg)?,
        Target::Table2 => table2(cfg)?,
        Target::Table3 => table3(cfg)?,
        Target::Table4 => table4(cfg)?,
        Target::Fig4 => fig4(cfg)?,
        Target::Fig5 => fig5(cfg)?,
        Target::Fig6 => fig6(cfg)?,
        Target::VerifyMulticopy => verify_multicopy(cfg)?,
        Target::VerifyCircuits => verify_circuits(cfg)?,
        Target::VerifyProperties => verify_properties(cfg)?,
    };
    Ok(Report { target: job.target, table, checks, extra, files, settings: cfg.clone() })
}

type Output = (Table, Vec<Check>, serde_json::Value, Vec<(String, String)>);

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn flag(b: bool) -> String {
    if b { "pass" } else { "fail" }.to_string()
}

fn family_and_params(spec: &StateSpec) -> (String, String) {
    let label = spec.label();
    match (label.find('('), label.rfind(')')) {
        (Some(a), Some(b)) if b > a && !label.starts_with("disp") && !label.starts_with("rot") => {
            (label[..a].to_string(), label[a + 1..b].replace(',', ";"))
        }
        _ => (spec.family.name().to_string(), label.replace(',', ";")),
    }
}

/// State at its automatic cutoff for order-4 moments.
pub fn prepare(spec: &StateSpec, tail_tol: f64) -> Result<FockDensityOperator> {
    spec.make_state(default_cutoff(spec, tail_tol)?)
}

fn prepare_all(specs: &[StateSpec], tail_tol: f64) -> Result<Vec<FockDensityOperator>> {
    specs.par_iter().map(|s| prepare(s, tail_tol)).collect()
}

fn d6(rho: &FockDensityOperator) -> Result<MomentMatrix> {
    MomentMatrix::build(rho, 6)
}

/// Relative comparison, absolute for an exactly-zero reference.
fn rel_check(expected: f64, observed: f64, rel: f64, abs_zero: f64) -> (f64, f64, bool) {
    let abs = (observed - expected).abs();
    if expected == 0.0 {
        (abs, abs, abs <= abs_zero)
    } else {
        let r = abs / expected.abs();
        (abs, r, r <= rel)
    }
}

fn table_i_subsets() -> Vec<(&'static str, &'static str)> {
    TABLE_I_ROWS.iter().flat_map(|row| row.iter().map(move |s| (row[0], *s))).collect()
}

fn table1(cfg: &ReproConfig) -> Result<Output> {
    let rel = cfg.tol_or(1e-8);
    let specs = cfg.battery.tabulated();
    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    let mats: Vec<MomentMatrix> = rhos.iter().map(d6).collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "family", "params", "row", "subset", "analytic", "numeric", "abs_err", "rel_err", "verdict", "pass",
    ]);
    let mut acc = CheckAcc::new("table1.minors", rel);
    for (spec, m) in specs.iter().zip(&mats) {
        let (family, params) = family_and_params(spec);
        for (row, s) in table_i_subsets() {
            let subset = parse_subset(s)?;
            let analytic = analytic_minor(&spec.family, &subset)?;
            let numeric = minor_value(m, &subset)?;
            let (abs, r, ok) = rel_check(analytic, numeric, rel, 1e-10);
            acc.add(r, ok, || format!("{} d{s}: {numeric:e} vs {analytic:e}", spec.label()));
            let verdict = crate::minors::Verdict::from_value(numeric, DETECTION_EPSILON);
            table.push(vec![
                family.clone(),
                params.clone(),
                format!("d{row}"),
                format!("d{s}"),
                num(analytic),
                num(numeric),
                num(abs),
                num(r),
                verdict.as_str().into(),
                flag(ok),
            ]);
        }
    }
    let cutoffs: BTreeMap<String, usize> = specs.iter().zip(&rhos).map(|(s, r)| (s.label(), r.cutoff())).collect();
    let extra = json!({ "closed_form_rows": TABLE_I_ROWS.len(), "subsets": table_i_subsets().len(), "cutoffs": cutoffs });
    Ok((table, vec![acc.finish()], extra, Vec::new()))
}

/// Moments `⟨a†^k a^l⟩` compared in table2, `k ≤ l`.
pub const TABLE_II_MOMENTS: [(usize, usize); 8] = [(0, 1), (0, 2), (1, 1), (0, 3), (1, 2), (0, 4), (1, 3), (2, 2)];

fn analytic_families(b: &Battery) -> Vec<(AnalyticFamily, StateSpec)> {
    let mut v: Vec<(AnalyticFamily, StateSpec)> =
        b.fock.iter().map(|&n| (AnalyticFamily::Fock { n }, StateSpec::fock(n))).collect();
    v.extend(b.squeezed.iter().map(|&r| (AnalyticFamily::Squeezed { r }, StateSpec::squeezed(r))));
    for parity in [CatParity::Even, CatParity::Odd] {
        v.extend(b.cats.iter().map(|&beta| (AnalyticFamily::Cat { parity, beta }, StateSpec::cat(parity, beta))));
    }
    for &nbar in &b.nbar {
        for &r in &b.gaussian_r {
            v.push((AnalyticFamily::Gaussian { nbar, r }, StateSpec::squeezed_thermal(nbar, r)));
        }
    }
    v
}

fn table2(cfg: &ReproConfig) -> Result<Output> {
    let rel = cfg.tol_or(1e-8);
    let fams = analytic_families(&cfg.battery);
    let specs: Vec<StateSpec> = fams.iter().map(|(_, s)| s.clone()).collect();
    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    let mut table = Table::new(&[
        "family", "params", "k", "l", "analytic_re", "analytic_im", "numeric_re", "numeric_im", "abs_err", "rel_err",
        "pass",
    ]);
    let mut acc = CheckAcc::new("table2.moments", rel);
    for ((fam, _), rho) in fams.iter().zip(&rhos) {
        for &(k0, l0) in &TABLE_II_MOMENTS {
            // both orderings, so conjugate entries are covered too
            for (k, l) in [(k0, l0), (l0, k0)].into_iter().unique() {
                let want = table_moment(fam, k, l)?;
                let got = moment(rho, k, l)?;
                let abs = (got - want).norm();
                let scale = want.norm();
                let (r, ok) = if scale == 0.0 { (abs, abs <= 1e-10) } else { (abs / scale, abs <= rel * scale) };
                acc.add(r, ok, || format!("{} {} <a+^{k} a^{l}>: {got} vs {want}", fam.name(), fam.params()));
                table.push(vec![
                    fam.name().into(),
                    fam.params().replace(',', ";"),
                    k.to_string(),
                    l.to_string(),
                    num(want.re),
                    num(want.im),
                    num(got.re),
                    num(got.im),
                    num(abs),
                    num(r),
                    flag(ok),
                ]);
            }
        }
    }
    Ok((table, vec![acc.finish()], json!({ "states": fams.len() }), Vec::new()))
}

/// `n` evenly spaced points on `[lo, hi]`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub const TABLE3_NBAR_RANGE: (f64, f64) = (0.0, 2.0);
pub const TABLE3_R_RANGE: (f64, f64) = (0.0, 1.5);

fn table3(cfg: &ReproConfig) -> Result<Output> {
    let g = cfg.grid.unwrap_or(50);
    let tol = cfg.tol_or(1e-8);
    let nbars = linspace(TABLE3_NBAR_RANGE.0, TABLE3_NBAR_RANGE.1, g);
    let rs = linspace(TABLE3_R_RANGE.0, TABLE3_R_RANGE.1, g);
    let mut table = Table::new(&[
        "nbar", "r", "d15", "d23", "d1235_product", "d1235_determinant", "abs_err", "gaussian_nonclassical",
        "d23_negative", "agree", "pass",
    ]);
    let mut agree = CheckAcc::new("table3.sign_agreement", 0.0);
    let mut ident = CheckAcc::new("table3.d1235_identity", tol);
    let mut pos = CheckAcc::new("table3.d15_nonnegative", 0.0);
    let sub = parse_subset("1235")?;
    for &nbar in &nbars {
        for &r in &rs {
            let d15 = squeezed_thermal_minor(nbar, r, &[1, 5])?;
            let d23 = squeezed_thermal_minor(nbar, r, &[2, 3])?;
            let product = squeezed_thermal_minor(nbar, r, &sub)?;
            let m = MomentMatrix::analytic(&AnalyticFamily::Gaussian { nbar, r }, 5)?;
            let det = minor_value(&m, &sub)?;
            let err = (det - product).abs();
            let id_ok = err <= tol * (1.0 + product.abs());
            ident.add(err / (1.0 + product.abs()), id_ok, || format!("nbar={nbar} r={r}: {det:e} vs {product:e}"));
            let nc = gaussian_nonclassical(nbar, r);
            let neg = d23 < 0.0;
            agree.add(if nc == neg { 0.0 } else { 1.0 }, nc == neg, || format!("nbar={nbar} r={r} d23={d23:e}"));
            pos.add((-d15).max(0.0), d15 >= 0.0, || format!("nbar={nbar} r={r} d15={d15:e}"));
            table.push(vec![
                num(nbar),
                num(r),
                num(d15),
                num(d23),
                num(product),
                num(det),
                num(err),
                nc.to_string(),
                neg.to_string(),
                (nc == neg).to_string(),
                flag(nc == neg && id_ok && d15 >= 0.0),
            ]);
        }
    }
    // numeric squeezed-thermal states against the closed forms
    let mut numeric = CheckAcc::new("table3.numeric_minors", tol);
    let specs: Vec<StateSpec> = cfg.battery.gaussian();
    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    for (spec, rho) in specs.iter().zip(&rhos) {
        let (nbar, r) = match spec.family {
            Family::Thermal { nbar } => (nbar, 0.0),
            Family::SqueezedThermal { nbar, r, .. } => (nbar, r),
            _ => unreachable!("battery gaussian states"),
        };
        let m = d6(rho)?;
        for s in crate::minors::TABLE_III_ROWS {
            let subset = parse_subset(s)?;
            let want = squeezed_thermal_minor(nbar, r, &subset)?;
            let got = minor_value(&m, &subset)?;
            let err = (got - want).abs();
            numeric.add(err / (1.0 + want.abs()), err <= tol * (1.0 + want.abs()), || {
                format!("{} d{s}: {got:e} vs {want:e}", spec.label())
            });
        }
    }
    let extra = json!({ "grid": g, "nbar_range": TABLE3_NBAR_RANGE, "r_range": TABLE3_R_RANGE });
    Ok((table, vec![agree.finish(), ident.finish(), pos.finish(), numeric.finish()], extra, Vec::new()))
}

fn table4_families(b: &Battery) -> Vec<Family> {
    let mut v: Vec<Family> = b.fock.iter().map(|&n| Family::Fock { n }).collect();
    for &r in &b.squeezed {
        v.push(Family::Squeezed { r, phi: 0.0 });
        v.push(Family::Squeezed { r, phi: 1.0 });
    }
    for &beta in &b.cats {
        v.push(Family::CatEven { beta });
        v.push(Family::CatOdd { beta });
    }
    v.push(Family::CatEven { beta: c(0.6, 0.8) });
    v.push(Family::CatOdd { beta: c(0.6, 0.8) });
    v
}

/// Numeric `d15(D(α)ρ) − d15(ρ)` for a centered family.
fn numeric_delta_d15(family: &Family, alpha: Complex64, tail_tol: f64) -> Result<f64> {
    let base = StateSpec::new(family.clone());
    let shifted = base.clone().displaced(alpha);
    let d0 = minor_value(&d6(&prepare(&base, tail_tol)?)?, &[1, 5])?;
    let d1 = minor_value(&d6(&prepare(&shifted, tail_tol)?)?, &[1, 5])?;
    Ok(d1 - d0)
}

struct DeltaRow {
    family: Family,
    alpha: Complex64,
    tabulated: f64,
    corrected: f64,
    numeric: f64,
}

fn delta_rows(cfg: &ReproConfig) -> Result<Vec<DeltaRow>> {
    let cases: Vec<(Family, Complex64)> = table4_families(&cfg.battery)
        .into_iter()
        .cartesian_product(cfg.battery.displacements.iter().copied())
        .collect();
    cases
        .par_iter()
        .map(|(f, a)| {
            Ok(DeltaRow {
                family: f.clone(),
                alpha: *a,
                tabulated: table_iv_delta_d15(f, *a)?,
                corrected: displacement_delta_d15(f, *a)?,
                numeric: numeric_delta_d15(f, *a, cfg.tail_tol)?,
            })
        })
        .collect()
}

fn table4(cfg: &ReproConfig) -> Result<Output> {
    let tol = cfg.tol_or(1e-6);
    let rows = delta_rows(cfg)?;
    let mut table = Table::new(&[
        "family", "params", "alpha_re", "alpha_im", "tabulated", "corrected", "numeric", "abs_err_tabulated",
        "abs_err_corrected", "pass",
    ]);
    let mut printed = CheckAcc::new("table4.tabulated_deltas", tol);
    let mut fixed = CheckAcc::new("table4.corrected_deltas", tol);
    for r in &rows {
        let (family, params) = family_and_params(&StateSpec::new(r.family.clone()));
        let e1 = (r.numeric - r.tabulated).abs();
        let e2 = (r.numeric - r.corrected).abs();
        let ok = printed.add(e1, e1 <= tol, || format!("{family}({params}) alpha={}: {:e} vs {:e}", r.alpha, r.numeric, r.tabulated));
        fixed.add(e2, e2 <= tol, || format!("{family}({params}) alpha={}", r.alpha));
        table.push(vec![
            family,
            params,
            num(r.alpha.re),
            num(r.alpha.im),
            num(r.tabulated),
            num(r.corrected),
            num(r.numeric),
            num(e1),
            num(e2),
            flag(ok),
        ]);
    }
    Ok((table, vec![printed.finish(), fixed.finish()], json!({ "cases": rows.len() }), Vec::new()))
}

/// States scanned for the detection boundary.
pub fn fig4_states() -> Vec<StateSpec> {
    let mut v: Vec<StateSpec> = (1..=4).map(StateSpec::fock).collect();
    v.extend((1..=10).map(|i| StateSpec::squeezed(i as f64 / 10.0)));
    v
}

fn fig4(cfg: &ReproConfig) -> Result<Output> {
    let tol = cfg.tol_or(1e-4);
    let mut settings = ScanSettings { tail_tol: cfg.tail_tol, ..ScanSettings::default() };
    if let Some(g) = cfg.grid {
        settings.step = 0.5 / g as f64;
    }
    let specs = fig4_states();
    let scan = detection_boundary_scan(&specs, &settings)?;
    let mut table = Table::new(&["family", "param", "tau", "value", "verdict"]);
    for p in &scan.points {
        table.push(vec![p.family.clone(), p.param.clone(), num(p.tau), num(p.value), p.verdict.as_str().into()]);
    }
    let ts = tau_star();
    let fock_crossing = |n: usize| -> Option<f64> { scan.boundaries[n - 1].crossings.first().copied() };
    let mut checks = Vec::new();
    for n in [2, 1] {
        let mut acc = CheckAcc::new(&format!("fig4.fock{n}_boundary_at_tau_star"), tol);
        match fock_crossing(n) {
            Some(x) => {
                acc.add((x - ts).abs(), (x - ts).abs() <= tol, || format!("boundary {x:.6} vs {ts:.6}"));
            }
            None => {
                acc.add(f64::INFINITY, false, || "no boundary found".into());
            }
        }
        checks.push(acc.finish());
    }
    let mut closed = CheckAcc::new("fig4.fock_boundaries_closed_form", 10.0 * settings.bisection_tol);
    for n in 1..=4 {
        let want = fock_boundary(n);
        let b = &scan.boundaries[n - 1];
        let ok = b.crossings.len() == 1 && !b.detected_at_half && b.detected_at_one;
        let err = b.crossings.first().map_or(f64::INFINITY, |x| (x - want).abs());
        closed.add(err, ok && err <= closed.tolerance, || format!("n={n}: {:?} vs {want:.6}", b.crossings));
    }
    checks.push(closed.finish());

    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    let squeezed: Vec<(&StateSpec, &FockDensityOperator)> =
        specs.iter().zip(&rhos).filter(|(s, _)| matches!(s.family, Family::Squeezed { .. })).collect();
    let mut at084 = CheckAcc::new("fig4.squeezed_detected_at_0.84", DETECTION_EPSILON);
    let mut at087 = CheckAcc::new("fig4.squeezed_undetected_at_0.87", DETECTION_EPSILON);
    let mut values = BTreeMap::new();
    for (spec, rho) in &squeezed {
        let v84 = interpolation_value(0.84, settings.phi, rho)?;
        let v87 = interpolation_value(0.87, settings.phi, rho)?;
        at084.add(v84, v84 < -DETECTION_EPSILON, || format!("{} value {v84:e}", spec.label()));
        at087.add(-v87, v87 >= -DETECTION_EPSILON, || format!("{} value {v87:e}", spec.label()));
        values.insert(spec.label(), (v84, v87));
    }
    checks.push(at084.finish());
    checks.push(at087.finish());

    let probe = ts + 0.01;
    let mut flagged_acc = CheckAcc::new("fig4.flagged_at_tau_star_plus_0.01", 0.0);
    let mut flagged = Vec::new();
    let mut expected = Vec::new();
    for n in 1..=4 {
        let v = interpolation_value(probe, settings.phi, &rhos[n - 1])?;
        if v < -DETECTION_EPSILON {
            flagged.push(n);
        }
        if fock_crossing(n).is_some_and(|x| x < probe) {
            expected.push(n);
        }
    }
    flagged_acc.add(0.0, flagged == expected && flagged == vec![1], || {
        format!("flagged {flagged:?}, boundaries below {expected:?}")
    });
    flagged_acc.note(format!("flagged Fock states {flagged:?}"));
    checks.push(flagged_acc.finish());

    let extra = json!({
        "tau_star": ts,
        "step": settings.step,
        "phi": settings.phi,
        "boundaries": scan.boundaries,
        "squeezed_values_at_0.84_0.87": values,
    });
    Ok((table, checks, extra, Vec::new()))
}

/// Minors `(d15, d23, d123)` of `√(1 − b²)|0⟩ + b|1⟩`.
pub fn fig5_minors(b: f64) -> Result<(f64, f64, f64)> {
    let a = (1.0 - b * b).max(0.0).sqrt();
    let m = d6(&StateSpec::superposition012(a, b, 0.0).make_state(6)?)?;
    Ok((minor_value(&m, &[1, 5])?, minor_value(&m, &[2, 3])?, minor_value(&m, &[1, 2, 3])?))
}

fn fig5(cfg: &ReproConfig) -> Result<Output> {
    let g = cfg.grid.unwrap_or(101);
    let bs = linspace(0.0, 1.0, g);
    let vals: Vec<(f64, f64, f64)> = bs.iter().map(|&b| fig5_minors(b)).collect::<Result<_>>()?;
    let mut table = Table::new(&["b", "a", "d15", "d23", "d123", "d123_detects"]);
    let mut d23_acc = CheckAcc::new("fig5.d23_nonnegative", 1e-10);
    let mut d15_acc = CheckAcc::new("fig5.d15_negative_on_interior", 0.0);
    for (&b, &(d15, d23, d123)) in bs.iter().zip(&vals) {
        d23_acc.add((-d23).max(0.0), d23 >= -1e-10, || format!("b={b}: d23={d23:e}"));
        if (0.05 - 1e-12..=0.95 + 1e-12).contains(&b) {
            d15_acc.add(d15.max(0.0), d15 < 0.0, || format!("b={b}: d15={d15:e}"));
        }
        table.push(vec![
            num(b),
            num((1.0 - b * b).max(0.0).sqrt()),
            num(d15),
            num(d23),
            num(d123),
            (d123 < -DETECTION_EPSILON).to_string(),
        ]);
    }
    // first sign change of d123 from detected to undetected, bisected
    let tol = cfg.tol_or(0.02);
    let mut cross = CheckAcc::new("fig5.d123_zero_crossing", tol);
    let mut crossing = None;
    for i in 1..bs.len() {
        if vals[i - 1].2 < 0.0 && vals[i].2 >= 0.0 {
            let (mut lo, mut hi) = (bs[i - 1], bs[i]);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if fig5_minors(mid)?.2 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing = Some(0.5 * (lo + hi));
            break;
        }
    }
    match crossing {
        Some(x) => cross.add((x - 0.70).abs(), (x - 0.70).abs() <= tol, || format!("crossing at b={x:.6}")),
        None => cross.add(f64::INFINITY, false, || "no crossing on the grid".into()),
    };
    let extra = json!({ "grid": g, "d123_crossing": crossing });
    Ok((table, vec![cross.finish(), d23_acc.finish(), d15_acc.finish()], extra, Vec::new()))
}

/// Fixed `|1⟩` amplitude of the ternary superposition in fig6.
pub const FIG6_B: f64 = 0.1;

/// `(a, c, d14, d15, d23)` at angle `θ`, with `a = √(1 − b²) cos θ`,
/// `c = √(1 − b²) sin θ`.
pub fn fig6_point(theta: f64) -> Result<(f64, f64, f64, f64, f64)> {
    let rad = (1.0 - FIG6_B * FIG6_B).sqrt();
    let (a, c) = (rad * theta.cos(), rad * theta.sin());
    let m = d6(&StateSpec::superposition012(a, FIG6_B, c).make_state(6)?)?;
    Ok((a, c, minor_value(&m, &[1, 4])?, minor_value(&m, &[1, 5])?, minor_value(&m, &[2, 3])?))
}

fn fig6_grid(cfg: &ReproConfig) -> Vec<f64> {
    let g = cfg.grid.unwrap_or(360);
    (0..g).map(|i| 2.0 * PI * i as f64 / g as f64).collect()
}

fn fig6(cfg: &ReproConfig) -> Result<Output> {
    let thetas = fig6_grid(cfg);
    let pts: Vec<(f64, f64, f64, f64, f64)> = thetas.par_iter().map(|&t| fig6_point(t)).collect::<Result<_>>()?;
    let mut table = Table::new(&["theta", "a", "b", "c", "d14", "d15", "d23", "complementarity_residual", "both_detect"]);
    let eps = DETECTION_EPSILON;
    let tol = cfg.tol_or(1e-10);
    let mut both = CheckAcc::new("fig6.no_simultaneous_detection", eps);
    let mut comp = CheckAcc::new("fig6.complementarity", tol);
    let mut d14_acc = CheckAcc::new("fig6.d14_nonnegative", tol);
    let (mut n15, mut n23) = (0usize, 0usize);
    for (&t, &(a, c, d14, d15, d23)) in thetas.iter().zip(&pts) {
        let res = (d15 + d23 - d14).abs();
        let simultaneous = d15 < -eps && d23 < -eps;
        n15 += (d15 < -eps) as usize;
        n23 += (d23 < -eps) as usize;
        both.add(if simultaneous { 1.0 } else { 0.0 }, !simultaneous, || format!("theta={t}: d15={d15:e} d23={d23:e}"));
        comp.add(res, res <= tol, || format!("theta={t}: residual {res:e}"));
        d14_acc.add((-d14).max(0.0), d14 >= -tol, || format!("theta={t}: d14={d14:e}"));
        table.push(vec![
            num(t),
            num(a),
            num(FIG6_B),
            num(c),
            num(d14),
            num(d15),
            num(d23),
            num(res),
            simultaneous.to_string(),
        ]);
    }
    let extra = json!({ "points": thetas.len(), "b": FIG6_B, "d15_detects": n15, "d23_detects": n23 });
    Ok((table, vec![both.finish(), comp.finish(), d14_acc.finish()], extra, Vec::new()))
}

/// Index sets covered by the multicopy contract.
pub const MULTICOPY_SUBSETS: [&str; 7] = ["12", "14", "15", "23", "25", "123", "1235"];
/// Index sets with a compact angular-momentum form.
pub const COMPACT_SUBSETS: [&str; 6] = ["12", "14", "23", "123", "1235", "25"];

fn verify_multicopy(cfg: &ReproConfig) -> Result<Output> {
    let tol = cfg.tol_or(1e-8);
    let observables: Vec<_> =
        MULTICOPY_SUBSETS.iter().map(|s| build_multicopy(&parse_subset(s)?)).collect::<Result<_>>()?;
    let mut specs: Vec<(StateSpec, bool)> = cfg.battery.all().into_iter().map(|s| (s, false)).collect();
    for base in cfg.battery.displacement_bases() {
        for &alpha in &cfg.battery.displacements {
            specs.push((base.clone().displaced(alpha), true));
        }
    }
    let plain: Vec<StateSpec> = specs.iter().map(|(s, _)| s.clone()).collect();
    let rhos = prepare_all(&plain, cfg.tail_tol)?;
    let mut table = Table::new(&["state", "subset", "cutoff", "multicopy", "minor", "abs_err", "bound", "pass"]);
    let mut contract = CheckAcc::new("multicopy.contract", tol);
    for ((spec, displaced), rho) in specs.iter().zip(&rhos) {
        let m = d6(rho)?;
        for b in &observables {
            if *displaced && !is_dominant(b.subset()) {
                continue;
            }
            let got = multicopy_expectation(rho, b)?;
            let want = minor_value(&m, b.subset())?;
            let err = (got - want).abs();
            let bound = tol * (1.0 + want.abs());
            let ok = contract.add(err / (1.0 + want.abs()), err <= bound, || {
                format!("{} B{}: {got:e} vs {want:e}", spec.label(), b.label())
            });
            table.push(vec![
                spec.label(),
                format!("B{}", b.label()),
                rho.cutoff().to_string(),
                num(got),
                num(want),
                num(err),
                num(bound),
                flag(ok),
            ]);
        }
    }

    // B1235 at per-mode cutoff 14, minors taken on the same truncated state
    let b1235 = observables.last().expect("1235 is listed last");
    let mut at14 = CheckAcc::new("multicopy.b1235_cutoff14", tol);
    for (spec, rho) in plain.iter().zip(&rhos) {
        let small = if rho.cutoff() > 14 { rho.project(14)? } else { rho.clone() };
        let got = multicopy_expectation(&small, b1235)?;
        let want = minor_value(&d6(&small)?, b1235.subset())?;
        let err = (got - want).abs();
        at14.add(err / (1.0 + want.abs()), err <= tol * (1.0 + want.abs()), || spec.label());
    }

    // replica-tensor evaluation agrees with the factorized one
    let mut tensor = CheckAcc::new("multicopy.tensor_path", tol);
    let probe = StateSpec::superposition012(0.6, 0.64, 0.48).displaced(real(0.2));
    for b in &observables {
        let cutoff = if b.copies() == 4 { 5 } else { 7 };
        let rho = probe.make_state(cutoff)?;
        let slow = multicopy_expectation_tensor(&rho, b, 1 << 16)?;
        let fast = multicopy_expectation(&rho, b)?;
        let err = (slow - fast).abs();
        tensor.add(err, err <= tol * (1.0 + fast.abs()), || format!("B{}: {slow:e} vs {fast:e}", b.label()));
    }

    let mut symbolic = CheckAcc::new("multicopy.compact_forms", SYMBOLIC_TOL);
    for s in COMPACT_SUBSETS {
        let check = compact_form_check(&build_multicopy(&parse_subset(s)?)?)?;
        symbolic.add(check.mismatches.len() as f64, check.matches, || {
            format!("B{s}: {} mismatched coefficients", check.mismatches.len())
        });
    }
    let mut f_forms = CheckAcc::new("multicopy.f1235_forms", SYMBOLIC_TOL);
    let f = f1235_even_permutations();
    f_forms.add(0.0, f.approx_eq(&f1235_pairings(), SYMBOLIC_TOL), || "pairing form differs".into());
    f_forms.add(0.0, f.approx_eq(&f1235_ladder_form(), SYMBOLIC_TOL), || "ladder form differs".into());
    f_forms.add(0.0, f.is_hermitian(SYMBOLIC_TOL), || "f1235 not Hermitian".into());
    let mut output_form = CheckAcc::new("multicopy.f1235_output_modes", SYMBOLIC_TOL);
    let sign = f1235_output_check()?;
    output_form.add(0.0, sign != SignMatch::Different, || "output-mode form differs".into());
    output_form.note(format!("sign relation {sign:?}").to_lowercase());
    let mut rotation = CheckAcc::new("multicopy.ly_vector_rotation", SYMBOLIC_TOL);
    let rot = ly_vector_rotation_check()?;
    rotation.add(0.0, rot.ly_follows, || "Ly vector does not follow the mode rotation".into());

    let dump: BTreeMap<String, serde_json::Value> = observables
        .iter()
        .map(|b| {
            let terms: Vec<(String, [f64; 2])> =
                b.polynomial().terms().map(|(m, z)| (m.to_string(), [z.re, z.im])).collect();
            (format!("B{}", b.label()), json!({ "copies": b.copies(), "tag": b.tag(), "terms": terms }))
        })
        .collect();
    let dump_text = serde_json::to_string_pretty(&dump).map_err(|e| Error::Io(e.to_string()))? + "\n";
    let term_counts: BTreeMap<String, usize> =
        observables.iter().map(|b| (format!("B{}", b.label()), b.polynomial().len())).collect();
    let extra = json!({ "term_counts": term_counts, "f1235_output_sign": sign, "rotation": rot });
    let checks = vec![
        contract.finish(),
        at14.finish(),
        tensor.finish(),
        symbolic.finish(),
        f_forms.finish(),
        output_form.finish(),
        rotation.finish(),
    ];
    Ok((table, checks, extra, vec![("verify_multicopy.observables.json".into(), dump_text)]))
}

fn verify_circuits(cfg: &ReproConfig) -> Result<Output> {
    let tol = cfg.tol_or(1e-7);
    let specs = cfg.battery.all();
    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    let mut runner = CircuitRunner::new();
    let mut table = Table::new(&["state", "preset", "cutoff", "circuit", "minor", "abs_err", "pass"]);
    let mut equiv = CheckAcc::new("circuits.preset_equivalence", tol);
    for preset in Preset::ALL {
        for (spec, rho) in specs.iter().zip(&rhos) {
            let cap = preset.cutoff_cap();
            let small = if rho.cutoff() > cap { rho.project(cap)? } else { rho.clone() };
            let got = runner.circuit_minor(preset, &small)?;
            let want = minor_value(&d6(&small)?, preset.subset())?;
            let err = (got - want).abs();
            let ok = equiv.add(err, err <= tol, || format!("{} {}: {got:e} vs {want:e}", spec.label(), preset.name()));
            table.push(vec![
                spec.label(),
                preset.name().into(),
                small.cutoff().to_string(),
                num(got),
                num(want),
                num(err),
                flag(ok),
            ]);
        }
    }

    let mut tmsv = CheckAcc::new("circuits.two_mode_squeezed_correlation", 1e-9);
    let sq = StateSpec::squeezed(0.5);
    let rho = prepare(&sq, cfg.tail_tol)?;
    let rho = if rho.cutoff() > 64 { rho.project(64)? } else { rho };
    let fu = runner.unitary(&CircuitSpec::fig2(), 2 * (rho.cutoff() - 1))?;
    let p = crate::circuits::evolve_replicas(&rho, fu)?.prob_unequal(1, 2);
    tmsv.add(p, p <= 1e-9, || format!("Pr[n1 != n2] = {p:e}"));

    // the Fourier circuit and the three-element circuit give the same d123
    let mut dft = CheckAcc::new("circuits.dft3_matches_fig4", tol);
    let u = dft3_unitary();
    for (spec, rho) in specs.iter().zip(&rhos).take(6) {
        let small = if rho.cutoff() > 8 { rho.project(8)? } else { rho.clone() };
        let via_fig4 = runner.circuit_minor(Preset::D123, &small)?;
        let fu = crate::circuits::fock_unitary(&u, 3 * (small.cutoff() - 1))?;
        let (f, scale) = Preset::D123.readout();
        let via_dft = scale * crate::circuits::evolve_replicas(&small, &fu)?.measure(&f)?;
        let err = (via_fig4 - via_dft).abs();
        dft.add(err, err <= tol, || format!("{}: {via_fig4:e} vs {via_dft:e}", spec.label()));
    }

    let extra = json!({ "cutoff_caps": Preset::ALL.iter().map(|p| (p.name(), p.cutoff_cap())).collect::<BTreeMap<_, _>>() });
    Ok((table, vec![equiv.finish(), tmsv.finish(), dft.finish()], extra, Vec::new()))
}

/// Subsets of `{1, …, 6}` with at least two elements that stay invariant
/// under displacements.
pub fn dominant_subsets() -> Vec<Vec<usize>> {
    (2..=6)
        .flat_map(|k| (1..=6).combinations(k))
        .filter(|s| is_dominant(s))
        .collect()
}

fn verify_properties(cfg: &ReproConfig) -> Result<Output> {
    let mut table =
        Table::new(&["property", "state", "subset", "parameter", "expected", "observed", "abs_err", "tolerance", "pass"]);
    let push = |table: &mut Table, prop: &str, state: &str, subset: &str, param: String, e: f64, o: f64, tol: f64, ok: bool| {
        table.push(vec![
            prop.into(),
            state.into(),
            subset.into(),
            param,
            num(e),
            num(o),
            num((o - e).abs()),
            num(tol),
            flag(ok),
        ]);
    };
    let subsets: Vec<Vec<usize>> = table_i_subsets().iter().map(|(_, s)| parse_subset(s)).collect::<Result<_>>()?;
    let specs = cfg.battery.all();
    let rhos = prepare_all(&specs, cfg.tail_tol)?;
    let mats: Vec<MomentMatrix> = rhos.iter().map(d6).collect::<Result<_>>()?;

    // rotation invariance, same cutoff so only phases change
    let tol_rot = cfg.tol_or(1e-8);
    let mut rot = CheckAcc::new("properties.rotation_invariance", tol_rot);
    for ((spec, rho), m) in specs.iter().zip(&rhos).zip(&mats) {
        for theta in [PI / 7.0, 1.0, 2.5] {
            let mr = d6(&spec.clone().rotated(theta).make_state(rho.cutoff())?)?;
            for s in &subsets {
                let (e, o) = (minor_value(m, s)?, minor_value(&mr, s)?);
                let ok = rot.add((o - e).abs() / (1.0 + e.abs()), (o - e).abs() <= tol_rot * (1.0 + e.abs()), || {
                    format!("{} theta={theta} d{}", spec.label(), subset_label(s))
                });
                if !ok || s.len() <= 2 {
                    push(&mut table, "rotation", &spec.label(), &format!("d{}", subset_label(s)), format!("theta={theta}"), e, o, tol_rot, ok);
                }
            }
        }
    }

    // displacement invariance of dominant minors
    let tol_disp = 1e-6;
    let mut disp = CheckAcc::new("properties.displacement_invariance", tol_disp);
    let dominant = dominant_subsets();
    let mut bases = cfg.battery.tabulated();
    bases.extend(cfg.battery.gaussian().into_iter().take(2));
    bases.extend(cfg.battery.superposition_states());
    let cases: Vec<(StateSpec, Complex64)> =
        bases.iter().cloned().cartesian_product(cfg.battery.displacements.iter().copied()).collect();
    let shifted: Vec<(MomentMatrix, MomentMatrix)> = cases
        .par_iter()
        .map(|(s, a)| Ok((d6(&prepare(s, cfg.tail_tol)?)?, d6(&prepare(&s.clone().displaced(*a), cfg.tail_tol)?)?)))
        .collect::<Result<_>>()?;
    for ((spec, alpha), (m0, m1)) in cases.iter().zip(&shifted) {
        for s in &dominant {
            let (e, o) = (minor_value(m0, s)?, minor_value(m1, s)?);
            let ok = disp.add((o - e).abs() / (1.0 + e.abs()), (o - e).abs() <= tol_disp * (1.0 + e.abs()), || {
                format!("{} alpha={alpha} d{}: {o:e} vs {e:e}", spec.label(), subset_label(s))
            });
            push(&mut table, "displacement", &spec.label(), &format!("d{}", subset_label(s)), format!("alpha={alpha}"), e, o, tol_disp, ok);
        }
    }

    // displacement deltas of d15
    let tol_delta = 1e-6;
    let mut printed = CheckAcc::new("properties.table_iv_deltas", tol_delta);
    let mut corrected = CheckAcc::new("properties.corrected_deltas", tol_delta);
    for r in delta_rows(cfg)? {
        let label = StateSpec::new(r.family.clone()).label();
        let e1 = (r.numeric - r.tabulated).abs();
        let ok = printed.add(e1, e1 <= tol_delta, || format!("{label} alpha={}: {:e} vs {:e}", r.alpha, r.numeric, r.tabulated));
        let e2 = (r.numeric - r.corrected).abs();
        corrected.add(e2, e2 <= tol_delta, || format!("{label} alpha={}", r.alpha));
        push(&mut table, "delta_d15", &label, "d15", format!("alpha={}", r.alpha), r.tabulated, r.numeric, tol_delta, ok);
    }

    // complementarity on the battery and the fig6 grid
    let tol_comp = 1e-10;
    let mut comp = CheckAcc::new("properties.complementarity", tol_comp);
    let mut comp_case = |label: String, d14: f64, d15: f64, d23: f64, table: &mut Table| {
        let res = (d15 + d23 - d14).abs();
        let ok = comp.add(res.max(-d14), res <= tol_comp && d14 >= -tol_comp, || format!("{label}: d14={d14:e} d15+d23={:e}", d15 + d23));
        if !ok {
            table.push(vec!["complementarity".into(), label, "d14".into(), String::new(), num(d14), num(d15 + d23), num(res), num(tol_comp), flag(ok)]);
        }
    };
    for (spec, m) in specs.iter().zip(&mats) {
        comp_case(spec.label(), minor_value(m, &[1, 4])?, minor_value(m, &[1, 5])?, minor_value(m, &[2, 3])?, &mut table);
    }
    for t in fig6_grid(cfg) {
        let (_, _, d14, d15, d23) = fig6_point(t)?;
        comp_case(format!("fig6(theta={t})"), d14, d15, d23, &mut table);
    }

    // coherent states: every minor vanishes
    let tol_coh = 1e-8;
    let mut coh = CheckAcc::new("properties.coherent_nullity", tol_coh);
    for &alpha in &cfg.battery.coherent {
        let spec = StateSpec::coherent(alpha);
        let m = d6(&prepare(&spec, cfg.tail_tol)?)?;
        for s in &subsets {
            let v = minor_value(&m, s)?;
            let ok = coh.add(v.abs(), v.abs() <= tol_coh, || format!("{} d{}: {v:e}", spec.label(), subset_label(s)));
            if !ok {
                push(&mut table, "coherent_nullity", &spec.label(), &format!("d{}", subset_label(s)), String::new(), 0.0, v, tol_coh, ok);
            }
        }
    }

    // d15 = Q <n>
    let tol_q = 1e-8;
    let mut mandel = CheckAcc::new("properties.mandel_identity", tol_q);
    for ((spec, rho), m) in specs.iter().zip(&rhos).zip(&mats) {
        let n = m.get(1, 5)?.re;
        if n <= 0.0 {
            continue;
        }
        let e = mandel_q(rho)? * n;
        let o = minor_value(m, &[1, 5])?;
        let ok = mandel.add((o - e).abs(), (o - e).abs() <= tol_q, || format!("{}: {o:e} vs {e:e}", spec.label()));
        push(&mut table, "mandel", &spec.label(), "d15", String::new(), e, o, tol_q, ok);
    }

    // three evaluations of d1235 on centered states
    let tol_d = cfg.tol_or(1e-8);
    let mut forms = CheckAcc::new("properties.d1235_forms", tol_d);
    let mut nonzero_x = 0usize;
    for spec in cfg.battery.centered() {
        let m = d6(&prepare(&spec, cfg.tail_tol)?)?;
        let f = d1235_decompositions(&m)?;
        if f.x.abs() > 1e-6 {
            nonzero_x += 1;
        }
        let worst = f.max_discrepancy();
        let ok = forms.add(worst, worst <= tol_d, || format!("{}: {f:?}", spec.label()));
        push(&mut table, "d1235_cofactor", &spec.label(), "d1235", format!("x={:e}", f.x), f.direct, f.cofactor, tol_d, ok);
        push(&mut table, "d1235_product", &spec.label(), "d1235", format!("x={:e}", f.x), f.direct, f.product, tol_d, ok);
        if let Some(b) = f.block {
            push(&mut table, "d1235_block", &spec.label(), "d1235", format!("x={:e}", f.x), f.direct, b, tol_d, ok);
        }
    }
    forms.note(format!("{nonzero_x} states with x != 0"));
    if nonzero_x == 0 {
        forms.add(0.0, false, || "no centered state with x != 0 in the battery".into());
    }

    let checks = vec![
        rot.finish(),
        disp.finish(),
        printed.finish(),
        corrected.finish(),
        comp.finish(),
        coh.finish(),
        mandel.finish(),
        forms.finish(),
    ];
    let extra = json!({ "dominant_subsets": dominant.iter().map(|s| subset_label(s)).collect::<Vec<_>>() });
    Ok((table, checks, extra, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_round_trip() {
        for t in Target::ALL {
            assert_eq!(t.as_str().parse::<Target>().unwrap(), t);
        }
        assert!("table5".parse::<Target>().is_err());
    }

    #[test]
    fn config_defaults_and_rejection() {
        let cfg = ReproConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ReproConfig::default());
        let cfg = ReproConfig::from_json(r#"{"tol": 1e-6, "battery": {"fock": [4]}}"#).unwrap();
        assert_eq!(cfg.battery.fock, vec![4]);
        assert_eq!(cfg.battery.squeezed, vec![0.2, 0.5, 1.0]);
        assert!(ReproConfig::from_json(r#"{"tolerance": 1}"#).is_err());
        assert!(ReproConfig::from_json(r#"{"tail_tol": 2}"#).is_err());
        assert!(ReproConfig::from_json(r#"{"battery": {"superpositions": [[1, 1, 1]]}}"#).is_err());
    }

    #[test]
    fn centered_battery_members() {
        let b = Battery::default();
        let centered = b.centered();
        assert!(centered.iter().any(|s| matches!(s.family, Family::Superposition012 { .. })));
        for s in &centered {
            let m = d6(&prepare(s, 1e-12).unwrap()).unwrap();
            assert!(m.get(1, 2).unwrap().norm() < 1e-10, "{}", s.label());
        }
    }

    #[test]
    fn dominant_subset_list() {
        let d: Vec<String> = dominant_subsets().iter().map(|s| subset_label(s)).collect();
        for s in ["12", "13", "123", "1234", "1235", "1236", "12345", "123456"] {
            assert!(d.contains(&s.to_string()), "{s}");
        }
        assert!(!d.contains(&"23".to_string()));
        assert!(!d.contains(&"15".to_string()));
    }

    #[test]
    fn fig5_crossing_near_root_half() {
        let (_, _, below) = fig5_minors(0.70).unwrap();
        let (_, _, above) = fig5_minors(0.72).unwrap();
        assert!(below < 0.0 && above > 0.0);
    }

    #[test]
    fn csv_has_header() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec!["1".into(), "a,b".into()]);
        assert_eq!(t.to_csv().unwrap(), "x,y\n1,\"a,b\"\n");
    }

    #[test]
    fn fig6_job_is_deterministic() {
        let cfg = ReproConfig { grid: Some(24), ..ReproConfig::default() };
        let job = ReproJob { target: Target::Fig6, config: cfg };
        let a = run(&job).unwrap();
        let b = run(&job).unwrap();
        assert_eq!(a.table.to_csv().unwrap(), b.table.to_csv().unwrap());
        assert!(a.pass(), "{:?}", a.checks);
    }
}
