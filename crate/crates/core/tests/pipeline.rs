//! End-to-end consistency across the library layers: states, moments,
//! minors, multicopy observables and circuit readouts.

use nonclass_core::circuits::{circuit_minor, interpolation_value, tau_star, Preset};
use nonclass_core::linalg::{c, real};
use nonclass_core::minors::{analytic_minor, minor_value, parse_subset, principal_minor, Verdict};
use nonclass_core::moments::{AnalyticFamily, MomentMatrix};
use nonclass_core::multicopy::{build_multicopy, multicopy_expectation};
use nonclass_core::repro::prepare;
use nonclass_core::states::StateSpec;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn four_routes_to_the_same_minor() {
    let states = [
        StateSpec::fock(2),
        StateSpec::squeezed(0.3),
        StateSpec::cat_odd(real(0.9)),
        StateSpec::squeezed_thermal(0.2, 0.35),
        StateSpec::superposition012(0.6, 0.64, 0.48),
    ];
    for spec in states {
        let rho = prepare(&spec, 1e-12).unwrap();
        let m = MomentMatrix::build(&rho, 6).unwrap();
        for preset in Preset::ALL {
            let s = preset.subset();
            let numeric = minor_value(&m, s).unwrap();
            let b = build_multicopy(s).unwrap();
            let multi = multicopy_expectation(&rho, &b).unwrap();
            assert!(close(multi, numeric, 1e-10), "{} {}", spec.label(), preset.name());
            let small = rho.project(rho.cutoff().min(8)).unwrap();
            let direct = minor_value(&MomentMatrix::build(&small, 6).unwrap(), s).unwrap();
            let circuit = circuit_minor(preset, &small).unwrap();
            assert!((circuit - direct).abs() < 1e-9, "{} {}: {circuit} vs {direct}", spec.label(), preset.name());
            if let Ok(analytic) = analytic_minor(&spec.family, s) {
                assert!(close(numeric, analytic, 1e-8), "{} {}", spec.label(), preset.name());
            }
        }
    }
}

#[test]
fn analytic_and_numeric_moment_matrices_agree() {
    let cases = [
        (AnalyticFamily::Squeezed { r: 0.5 }, StateSpec::squeezed(0.5)),
        (AnalyticFamily::Gaussian { nbar: 0.5, r: 0.35 }, StateSpec::squeezed_thermal(0.5, 0.35)),
        (
            AnalyticFamily::Cat { parity: nonclass_core::states::CatParity::Even, beta: c(0.6, 0.8) },
            StateSpec::cat_even(c(0.6, 0.8)),
        ),
    ];
    for (fam, spec) in cases {
        let a = MomentMatrix::analytic(&fam, 6).unwrap();
        let n = MomentMatrix::build(&prepare(&spec, 1e-12).unwrap(), 6).unwrap();
        let diff = (a.entries() - n.entries()).norm();
        assert!(diff < 1e-9, "{}: {diff:e}", spec.label());
    }
}

#[test]
fn verdicts_follow_the_threshold() {
    let one = prepare(&StateSpec::fock(1), 1e-12).unwrap();
    let m = MomentMatrix::build(&one, 6).unwrap();
    let d15 = principal_minor(&m, &parse_subset("d15").unwrap()).unwrap();
    assert_eq!(d15.verdict, Verdict::NonclassicalDetected);
    let th = prepare(&StateSpec::thermal(0.4), 1e-12).unwrap();
    let d = principal_minor(&MomentMatrix::build(&th, 6).unwrap(), &[2, 3]).unwrap();
    assert_eq!(d.verdict, Verdict::NotDetected);
    // |1> stays detected just above the threshold and not just below it
    assert!(interpolation_value(tau_star() + 1e-3, std::f64::consts::FRAC_PI_2, &one).unwrap() < 0.0);
    assert!(interpolation_value(tau_star() - 1e-3, std::f64::consts::FRAC_PI_2, &one).unwrap() > 0.0);
}

#[test]
fn displacement_leaves_dominant_minor_alone() {
    let base = StateSpec::squeezed_thermal(0.2, 0.7);
    let shifted = base.clone().displaced(c(0.3, 0.8));
    let m0 = MomentMatrix::build(&prepare(&base, 1e-12).unwrap(), 6).unwrap();
    let m1 = MomentMatrix::build(&prepare(&shifted, 1e-12).unwrap(), 6).unwrap();
    for s in [vec![1, 2], vec![1, 2, 3], vec![1, 2, 3, 5]] {
        assert!(close(minor_value(&m1, &s).unwrap(), minor_value(&m0, &s).unwrap(), 1e-8), "{s:?}");
    }
    // d15 is not dominant and moves
    assert!((minor_value(&m1, &[1, 5]).unwrap() - minor_value(&m0, &[1, 5]).unwrap()).abs() > 0.1);
}
