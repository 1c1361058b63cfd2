mod common;

use bistab_core::params::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn derive_is_pure(p in common::physical_params()) {
        let (a, b) = (derive(&p).unwrap(), derive(&p).unwrap());
        prop_assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        prop_assert_eq!(a.upsilon_n, p.n_atoms as f64 * a.upsilon + 2.0);
        prop_assert_eq!(a.s_eta, a.s1 * a.n_eta);
    }
}

#[test]
fn large_n_ratio_limit() {
    let n_eta = 40.0;
    for n in [1e3, 1e5, 1e7] {
        let p = SystemParams::new(0.05, 0.3, n as u64).with_pump_photons(n_eta);
        let d = derive(&p).unwrap();
        let limit = 2.0 * n_eta / (n * p.gamma);
        let ratio = d.s_eta / d.upsilon_n;
        let exact = d.s_eta / (n * d.upsilon);
        assert!((exact / limit - 1.0).abs() < 1e-12);
        assert!(ratio < exact && (ratio / exact - 1.0).abs() <= 2.0 / (n * d.upsilon));
    }
}

#[test]
fn experimental_rates() {
    let p = experimental(200_000);
    assert!((p.g - 0.002676).abs() < 1e-6);
    assert!((p.gamma - 0.002206).abs() < 1e-6);
    assert_eq!(p.kappa, 1.0);
    let q = SystemParams::from_collective(1.2, 0.0022, 200_000);
    assert!((q.g / 0.00268 - 1.0).abs() < 2e-3);
    // Same in rad/s.
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = from_physical(&PhysicalInput::new(
        Rate::rad_per_sec(two_pi * 9.1e3),
        Rate::rad_per_sec(two_pi * 7.5e3),
        Rate::rad_per_sec(two_pi * 3.4e6),
        200_000,
    ))
    .unwrap();
    assert!((r.g / p.g - 1.0).abs() < 1e-12 && (r.gamma / p.gamma - 1.0).abs() < 1e-12);
}

#[test]
fn dimensionless_input_passes_through() {
    let mut input = PhysicalInput::new(Rate::kappa(0.3), Rate::kappa(2.0), Rate::kappa(1.0), 7);
    input.delta_a = Rate::kappa(-1.5);
    let p = from_physical(&input).unwrap();
    assert_eq!((p.g, p.gamma, p.kappa, p.n_atoms, p.delta_a), (0.3, 2.0, 1.0, 7, -1.5));
}

#[test]
fn mixed_units_are_rejected() {
    let input = PhysicalInput::new(Rate::hz(9.1e3), Rate::new(0.002, RateUnit::Unspecified), Rate::hz(3.4e6), 10);
    assert!(matches!(from_physical(&input), Err(bistab_core::Error::MixedUnits(_))));
    // Values in units of κ are unambiguous next to physical ones.
    let input = PhysicalInput::new(Rate::hz(9.1e3), Rate::kappa(0.002), Rate::hz(3.4e6), 10);
    assert_eq!(from_physical(&input).unwrap().gamma, 0.002);
    let input = PhysicalInput::new(Rate::hz(9.1e3), Rate::hz(7.5e3), Rate::kappa(1.0), 10);
    assert!(matches!(from_physical(&input), Err(bistab_core::Error::MixedUnits(_))));
}
