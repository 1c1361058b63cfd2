#![allow(dead_code)]

use bistab_core::params::SystemParams;
use num_complex::Complex64;
use proptest::prelude::*;

/// Parameters spanning good and bad cavities, weak to saturating pumps.
pub fn physical_params() -> impl Strategy<Value = SystemParams> {
    (
        -1.0f64..2.0,   // log10 g_N
        0.0f64..6.0,    // log10 N
        -3.0f64..1.0,   // log10 Γ
        -3.0f64..8.0,   // log10 n_η
        -30.0f64..30.0, // Δ_a
        -30.0f64..30.0, // Δ_c
    )
        .prop_map(|(lg, ln, lgam, leta, da, dc)| {
            let n = 10f64.powf(ln).round().max(1.0) as u64;
            SystemParams::from_collective(10f64.powf(lg), 10f64.powf(lgam), n)
                .with_pump_photons(10f64.powf(leta))
                .with_detunings(da, dc)
        })
}

/// Greedy nearest matching of two root triples; returns pairs.
pub fn match_roots(a: &[Complex64; 3], b: &[Complex64; 3]) -> Vec<(Complex64, Complex64)> {
    let mut used = [false; 3];
    a.iter()
        .map(|&x| {
            let (k, _) = b
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .min_by(|p, q| (p.1 - x).norm().total_cmp(&(q.1 - x).norm()))
                .expect("three candidates");
            used[k] = true;
            (x, b[k])
        })
        .collect()
}

/// Smallest distance from root `i` to the other two, relative to its size.
pub fn separation(r: &[Complex64; 3], i: usize) -> f64 {
    let m = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (0..3)
        .filter(|&j| j != i)
        .map(|j| (r[i] - r[j]).norm())
        .fold(f64::INFINITY, f64::min)
        / m.max(f64::MIN_POSITIVE)
}
