mod common;

use bistab_core::dynamics::*;
use bistab_core::params::SystemParams;
use bistab_core::spectra::{branch_follow, scan_spectrum, Direction, ScanAxis, ScanOptions, StartHint};
use bistab_core::steadystate::{steady_states, AtomConfiguration};
use bistab_core::cubic::Stability;
use num_complex::Complex64;
use proptest::prelude::*;

const HOM: AtomConfiguration = AtomConfiguration::Homogeneous;

fn sampled(dt: f64) -> Controls {
    Controls { sample_interval: Some(dt), ..Controls::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn steady_states_are_fixed_points(p in common::physical_params()) {
        for s in steady_states(&p).unwrap() {
            let d = rhs(&MeanFieldState::from_steady_state(&s), &p, &HOM, 0.0, None).unwrap();
            prop_assert!(rhs_norm(&d) <= 1e-8 * p.kappa, "n = {}, |rhs| = {}", s.n, rhs_norm(&d));
        }
    }
}

#[test]
fn ground_state_is_stationary_without_pump() {
    let p = SystemParams::new(0.3, 1.0, 100);
    let d = rhs(&MeanFieldState::ground(&HOM), &p, &HOM, 0.0, None).unwrap();
    assert_eq!(rhs_norm(&d), 0.0);
    let cfg = AtomConfiguration::Positions(vec![0.1, 0.7, 2.0]);
    let p = SystemParams::new(0.3, 1.0, 3);
    let d = rhs(&MeanFieldState::ground(&cfg), &p, &cfg, 0.0, None).unwrap();
    assert_eq!(rhs_norm(&d), 0.0);
}

#[test]
fn empty_cavity_charge_up() {
    let mut p = SystemParams::default();
    p.eta_plus = 2.0;
    let tr = integrate(&MeanFieldState::ground(&HOM), &p, &HOM, None, 10.0, &sampled(0.5)).unwrap();
    for (&t, s) in tr.times.iter().zip(&tr.states).skip(1) {
        let want = 2.0 * (1.0 - (-t).exp());
        assert!((s.alpha_plus.re / want - 1.0).abs() < 1e-6, "t = {t}");
        assert!(s.alpha_plus.im.abs() < 1e-9);
    }
}

#[test]
fn free_atomic_decay() {
    let p = SystemParams { gamma: 0.7, ..SystemParams::default() };
    let s0 = MeanFieldState {
        sigma_minus: vec![Complex64::new(0.2, -0.1)],
        sigma_z: vec![0.3],
        alpha_plus: Complex64::new(0.0, 0.0),
        alpha_minus: Complex64::new(0.0, 0.0),
    };
    let tr = integrate(&s0, &p, &HOM, None, 8.0, &sampled(0.25)).unwrap();
    for (&t, s) in tr.times.iter().zip(&tr.states) {
        let z = -1.0 + 1.3 * (-0.7 * t).exp();
        let m = s0.sigma_minus[0].norm() * (-0.35 * t).exp();
        assert!((s.sigma_z[0] - z).abs() < 1e-7, "t = {t}");
        assert!((s.sigma_minus[0].norm() - m).abs() < 1e-7, "t = {t}");
    }
}

#[test]
fn tighter_tolerances_converge() {
    let p = SystemParams::from_collective(3.0, 1.0, 1000).with_pump_photons(50.0).with_detunings(1.0, 0.5);
    let run = |rtol: f64| {
        let c = Controls { rtol, atol: rtol * 1e-4, ..Controls::default() };
        integrate(&MeanFieldState::ground(&HOM), &p, &HOM, None, 20.0, &c).unwrap().last().clone()
    };
    let (a, b) = (run(1e-8), run(5e-9));
    let diff = a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.to_vec().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    assert!(diff < 10.0 * 5e-9 * scale, "diff {diff}");
}

#[test]
fn trajectories_stay_in_the_bloch_ball() {
    let p = SystemParams::from_collective(12.4, 2.0, 10_000).with_pump_photons(1e4).with_detunings(-9.0, -9.0);
    let tr = integrate(&MeanFieldState::ground(&HOM), &p, &HOM, None, 30.0, &sampled(0.05)).unwrap();
    assert!(tr.states.iter().all(|s| s.is_physical(1e-6)));
    let cfg = AtomConfiguration::Positions(vec![0.0, 0.4, 1.1, 2.5]);
    let q = SystemParams::new(0.8, 1.0, 4).with_pump_photons(3.0).with_detunings(0.5, 0.2);
    let tr = integrate(&MeanFieldState::ground(&cfg), &q, &cfg, None, 30.0, &sampled(0.1)).unwrap();
    assert!(tr.states.iter().all(|s| s.is_physical(1e-6)));
}

/// Stable steady states attract small perturbations within 20/Γ.
#[test]
fn stable_states_are_attractors() {
    let cases = [
        SystemParams::from_collective(3.0, 1.0, 1000).with_pump_photons(50.0).with_detunings(1.0, 0.5),
        SystemParams::from_collective(12.4, 2.0, 10_000).with_pump_photons(1e4).with_detunings(-9.0, -9.0),
        SystemParams::new(1.0, 1.0, 100).with_pump_photons(20.0),
    ];
    let mut checked = 0;
    for p in cases {
        for s in steady_states(&p).unwrap() {
            if stability(&p, &s).unwrap().stability != Stability::Stable {
                continue;
            }
            let fixed = MeanFieldState::from_steady_state(&s);
            // α₋ is not a degree of freedom of the homogeneous reduction.
            let mut kicked = fixed.to_vec();
            for v in &mut kicked[..5] {
                *v += 1e-3;
            }
            let c = Controls { rtol: 1e-10, atol: 1e-13, ..Controls::default() };
            let end = integrate(&MeanFieldState::from_vec(&kicked), &p, &HOM, None, 20.0 / p.gamma, &c).unwrap();
            let dist = end.last().to_vec().iter().zip(fixed.to_vec()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dist < 1e-5, "n = {}: distance {dist}", s.n);
            checked += 1;
        }
    }
    assert!(checked >= 4);
}

#[test]
fn slow_ramp_tracks_unistable_branch() {
    let p = SystemParams::from_collective(3.0, 1.0, 1000).with_pump_photons(0.1);
    let ramp = RampSpec { axis: RampAxis::DeltaA, start: -6.0, stop: 6.0, duration: 5000.0 };
    let start = steady_states(&params_at(&p, Some(&ramp), 0.0)).unwrap()[0];
    let tr = integrate(&MeanFieldState::from_steady_state(&start), &p, &HOM, Some(&ramp), 5000.0, &sampled(50.0)).unwrap();
    let grid: Vec<f64> = tr.times.iter().map(|&t| ramp.value_at(t)).collect();
    let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &ScanOptions::default()).unwrap();
    assert_eq!(branches.len(), 1);
    for (s, x) in tr.states.iter().zip(&grid) {
        let q = branches[0].samples.iter().find(|q| q.x == *x).unwrap();
        assert!((s.photon_number() / q.n - 1.0).abs() < 0.01, "x = {x}: {} vs {}", s.photon_number(), q.n);
    }
}

/// Position of the largest change in photon number between samples.
fn jump_position(tr: &Trajectory, ramp: &RampSpec) -> f64 {
    let n: Vec<f64> = tr.states.iter().map(|s| s.photon_number()).collect();
    let k = (1..n.len()).max_by(|&a, &b| (n[a] - n[a - 1]).abs().total_cmp(&(n[b] - n[b - 1]).abs())).unwrap();
    ramp.value_at(0.5 * (tr.times[k] + tr.times[k - 1]))
}

#[test]
fn ramps_jump_at_opposite_folds() {
    let p = SystemParams::from_collective(12.4, 2.0, 10_000).with_pump_photons(1e4);
    let grid: Vec<f64> = (0..2001).map(|i| -12.0 + 7.0 * i as f64 / 2000.0).collect();
    let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &ScanOptions::default()).unwrap();
    let up = branch_follow(&branches, Direction::Up, StartHint::Lowest).jump_points[0];
    let down = branch_follow(&branches, Direction::Down, StartHint::Lowest).jump_points[0];
    assert!(up > down);

    for (from, to, want) in [(-12.0, -5.0, up), (-5.0, -12.0, down)] {
        let ramp = RampSpec { axis: RampAxis::DeltaA, start: from, stop: to, duration: 3000.0 };
        let s0 = steady_states(&params_at(&p, Some(&ramp), 0.0)).unwrap()[0];
        let tr = integrate(&MeanFieldState::from_steady_state(&s0), &p, &HOM, Some(&ramp), 3000.0, &sampled(1.0)).unwrap();
        let at = jump_position(&tr, &ramp);
        assert!((at - want).abs() < 0.1, "ramp {from} -> {to}: jump at {at}, fold at {want}");
    }
}
