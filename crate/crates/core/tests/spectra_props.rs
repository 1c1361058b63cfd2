mod common;

use bistab_core::params::{derive, SystemParams};
use bistab_core::spectra::*;
use proptest::prelude::*;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn no_refine() -> ScanOptions {
    ScanOptions { refine: false, ..ScanOptions::default() }
}

/// The experimental configuration pumped inside the on-resonance window.
fn nmbc() -> SystemParams {
    SystemParams::from_collective(1.2, 0.0022, 200_000).with_pump_photons(12_100.0)
}

fn roots_at(branches: &[SpectrumBranch], x: f64) -> Vec<f64> {
    let mut v: Vec<f64> = branches
        .iter()
        .flat_map(|b| b.samples.iter().filter(|s| s.x == x).map(|s| s.n))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn branch_invariants(p in common::physical_params()) {
        let span = 2.0 * p.g_n() + 4.0 * (1.0 + p.gamma);
        let grid = linspace(-span, span, 201);
        let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: p.delta_ca() }, &grid, &ScanOptions::default()).unwrap();
        let n_eta = p.n_eta();
        for b in &branches {
            prop_assert!(!b.samples.is_empty());
            prop_assert!(b.samples.windows(2).all(|w| w[1].x > w[0].x));
            for s in &b.samples {
                prop_assert!(s.n >= 0.0 && s.n.is_finite());
                prop_assert!((s.transmission - s.n / n_eta).abs() <= 1e-12 * s.transmission.max(1e-300));
            }
        }
        // Every base grid point carries at least one root.
        for &x in &grid {
            prop_assert!(!roots_at(&branches, x).is_empty());
        }
    }

    #[test]
    fn resonant_cavity_branches_are_mirror_symmetric(p in common::physical_params()) {
        let span = 2.0 * p.g_n() + 4.0 * (1.0 + p.gamma);
        let half = linspace(0.0, span, 51);
        let grid: Vec<f64> = half.iter().rev().map(|x| -x).chain(half[1..].iter().copied()).collect();
        let branches = scan_spectrum(&p, ScanAxis::DeltaAFixedCavity { delta_c: 0.0 }, &grid, &no_refine()).unwrap();
        for (k, &x) in grid.iter().enumerate() {
            let mirror = grid[grid.len() - 1 - k];
            prop_assert_eq!(mirror, -x);
            prop_assert_eq!(roots_at(&branches, x), roots_at(&branches, mirror));
        }
    }

    #[test]
    fn unistable_traces_coincide(lg in -3.0f64..-1.0, gamma in 0.5f64..3.0) {
        // Weak pump: one root everywhere.
        let p = SystemParams::from_collective(3.0, gamma, 1000).with_pump_photons(10f64.powf(lg));
        let grid = linspace(-10.0, 10.0, 401);
        let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &ScanOptions::default()).unwrap();
        let up = branch_follow(&branches, Direction::Up, StartHint::Lowest);
        let down = branch_follow(&branches, Direction::Down, StartHint::Lowest);
        prop_assert_eq!(&up.samples, &down.samples);
        prop_assert!(up.jump_points.is_empty() && down.jump_points.is_empty());
    }
}

#[test]
fn empty_cavity_lorentzian() {
    let p = SystemParams::new(0.7, 1.0, 0).with_pump_photons(3.0);
    let grid = linspace(-5.0, 5.0, 1001);
    let branches = scan_spectrum(&p, ScanAxis::DeltaCa { delta_a: 0.0 }, &grid, &ScanOptions::default()).unwrap();
    assert_eq!(branches.len(), 1);
    for s in &branches[0].samples {
        // Δ_c = Δ_a − Δ_ca = −x.
        let want = 1.0 / (1.0 + s.x * s.x);
        assert!((s.transmission / want - 1.0).abs() < 1e-12);
    }
    let b = pump_bifurcation(&p, &[1.0, 10.0, 100.0], 0.0, 0.0).unwrap();
    assert_eq!(b.len(), 1);
    assert!(b[0].samples.iter().all(|s| (s.transmission - 1.0).abs() < 1e-12));
}

#[test]
fn normal_mode_doublet_at_weak_pump() {
    let base = SystemParams::from_collective(12.4, 2.0, 10_000);
    let d = derive(&base).unwrap();
    let p = base.with_pump_photons(1e-4 * d.upsilon_n / d.s1);
    let grid = linspace(-20.0, 20.0, 4001);
    let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &ScanOptions::default()).unwrap();
    assert_eq!(branches.len(), 1);
    let t: Vec<f64> = branches[0].samples.iter().map(|s| s.transmission).collect();
    let peaks: Vec<f64> = (1..t.len() - 1)
        .filter(|&i| t[i] > t[i - 1] && t[i] >= t[i + 1])
        .map(|i| branches[0].samples[i].x)
        .collect();
    assert_eq!(peaks.len(), 2, "peaks at {peaks:?}");
    for (x, want) in peaks.iter().zip([-12.4, 12.4]) {
        assert!((x - want).abs() < 0.5, "peak at {x}");
    }
}

/// Traces differ exactly where several roots coexist, up to one grid step.
fn assert_inclusion(branches: &[SpectrumBranch], grid: &[f64], up: &HysteresisTrace, down: &HysteresisTrace) {
    let step = grid[1] - grid[0];
    let multi: Vec<bool> = grid.iter().map(|&x| roots_at(branches, x).len() >= 2).collect();
    for (k, &x) in grid.iter().enumerate() {
        let differs = up.n_at(x) != down.n_at(x);
        if differs != multi[k] {
            let at_edge = (k > 0 && multi[k - 1] != multi[k]) || (k + 1 < grid.len() && multi[k + 1] != multi[k]);
            assert!(at_edge, "mismatch at x = {x} (step {step}): differs {differs}, multi {}", multi[k]);
        }
    }
}

#[test]
fn wing_hysteresis() {
    let p = SystemParams::from_collective(12.4, 2.0, 10_000).with_pump_photons(1e4);
    let grid = linspace(-20.0, 20.0, 2001);
    let branches = scan_spectrum(&p, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &ScanOptions::default()).unwrap();
    let up = branch_follow(&branches, Direction::Up, StartHint::Lowest);
    let down = branch_follow(&branches, Direction::Down, StartHint::Lowest);
    assert_eq!(up.jump_points.len(), 2);
    assert_eq!(down.jump_points.len(), 2);
    // Mirror images of each other.
    for (u, d) in up.jump_points.iter().zip(&down.jump_points) {
        assert!((u + d).abs() < 1e-9, "{u} vs {d}");
    }
    assert_inclusion(&branches, &grid, &up, &down);
}

/// On resonance the saturated branch and its unstable partner form a closed
/// loop detached from the weakly transmitting branch, so a scan from the far
/// wings never reaches it. Prepared in the saturated state at Δ_a = 0, the
/// system drops off the loop at its two edges.
#[test]
fn center_window_is_an_isola() {
    let p = nmbc();
    let axis = ScanAxis::DeltaAFixedCavity { delta_c: 0.0 };
    let full = linspace(-1.0, 1.0, 2001);
    let branches = scan_spectrum(&p, axis, &full, &ScanOptions::default()).unwrap();
    let through: Vec<&SpectrumBranch> = branches.iter().filter(|b| !b.fold_at_start && !b.fold_at_end).collect();
    assert_eq!(through.len(), 1);
    assert!(through[0].samples.len() >= full.len());
    let up = branch_follow(&branches, Direction::Up, StartHint::Lowest);
    assert!(up.jump_points.is_empty());

    let right = linspace(0.0, 1.0, 1001);
    let left: Vec<f64> = right.iter().rev().map(|x| -x).collect();
    let step = right[1];
    let rb = scan_spectrum(&p, axis, &right, &ScanOptions::default()).unwrap();
    let lb = scan_spectrum(&p, axis, &left, &ScanOptions::default()).unwrap();
    let up = branch_follow(&rb, Direction::Up, StartHint::Highest);
    let down = branch_follow(&lb, Direction::Down, StartHint::Highest);
    assert_eq!(up.jump_points.len(), 1);
    assert_eq!(down.jump_points.len(), 1);
    let (ue, de) = (up.jump_points[0], down.jump_points[0]);
    assert!(ue > 0.0 && de < 0.0);
    assert!((ue + de).abs() <= step, "edges {ue}, {de}");
    // Before the edge the trace stays on the top root.
    let top = roots_at(&rb, 0.0);
    assert_eq!(up.n_at(0.0), top.last().copied());
}

#[test]
fn pump_s_curve_hysteresis() {
    let p = SystemParams::from_collective(1.2, 0.0022, 200_000);
    let grid = bistab_core::phases::log_grid(1e2, 1e7, 400);
    let branches = pump_bifurcation(&p, &grid, 0.0, 0.0).unwrap();
    let up = branch_follow(&branches, Direction::Up, StartHint::Lowest);
    let down = branch_follow(&branches, Direction::Down, StartHint::Highest);
    let mut diff_idx = Vec::new();
    for (k, &x) in grid.iter().enumerate() {
        let differs = up.n_at(x) != down.n_at(x);
        let multi = roots_at(&branches, x).len() >= 2;
        assert_eq!(differs, multi, "at s1*n_eta = {x}");
        if differs {
            diff_idx.push(k);
        }
    }
    // One contiguous window.
    assert!(!diff_idx.is_empty());
    assert_eq!(diff_idx.last().unwrap() - diff_idx[0] + 1, diff_idx.len());
    assert_eq!(up.jump_points.len(), 1);
    assert_eq!(down.jump_points.len(), 1);
    assert!(up.jump_points[0] > down.jump_points[0]);
}

#[test]
fn solution_count_sequence() {
    let p = SystemParams::from_collective(1.2, 0.0022, 200_000);
    let grid = bistab_core::phases::log_grid(1e2, 1e7, 2000);
    let counts: Vec<usize> = solution_counts(&p, &grid, 0.0, 0.0).unwrap().iter().map(|c| c.total()).collect();
    let mut seq = vec![counts[0]];
    for &c in &counts[1..] {
        if c != *seq.last().unwrap() {
            seq.push(c);
        }
    }
    assert_eq!(seq, vec![1, 2, 3, 2, 1]);
}

#[test]
fn zero_phase_geometry() {
    let p = SystemParams::from_collective(12.4, 2.0, 10_000).with_pump_photons(100.0);
    assert_eq!(zero_phase_curve(&p, 0.0).unwrap(), 0.0);
    let d = derive(&p).unwrap();
    let ng2 = p.g_n().powi(2);
    let x = zero_phase_crossing(&p).unwrap().unwrap();
    let want = (ng2 - 1.0 - 0.5 * d.omega_eta.powi(2)).sqrt();
    assert!((x - want).abs() < 1e-12);
    assert!(zero_phase_curve(&p, x).unwrap().abs() < 1e-9);
    assert!(zero_phase_curve(&p, -x).unwrap().abs() < 1e-9);

    // Crossings disappear exactly when Ng² ≤ Γ²/4 + Ω_η²/2, with Ω_η = 2gη/κ.
    let g = p.g;
    let eta_merge = ((ng2 - 1.0) * 2.0).sqrt() / (2.0 * g);
    let mut q = p;
    q.eta_plus = eta_merge * (1.0 + 1e-9);
    assert!(zero_phase_crossing(&q).unwrap().is_none());
    q.eta_plus = eta_merge * (1.0 - 1e-9);
    assert!(zero_phase_crossing(&q).unwrap().is_some());
}
