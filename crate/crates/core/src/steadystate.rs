//! Steady states of the driven cavity: photon numbers from the cubic, field
//! amplitudes, atomic observables and the general two-mode equations.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cubic::{self, CubicCoefficients, RootSet};
use crate::error::{Error, Result};
use crate::params::{derive, SystemParams};

/// Relative tolerance on |α₊|² = n and on the fixed-point form of the cubic.
pub const CONSISTENCY_TOL: f64 = 1e-8;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_MAX_HALVINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub n: f64,
    pub alpha_plus: Complex64,
    pub alpha_minus: Complex64,
    pub transmission: f64,
    pub sigma_z: f64,
    pub sigma_minus: Complex64,
    pub p_excited: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicState {
    pub sigma_z: f64,
    pub sigma_minus: Complex64,
    pub p_excited: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AtomConfiguration {
    /// Uniform cloud, b = 0.
    Homogeneous,
    /// Phases kz_j of the individual atoms.
    Positions(Vec<f64>),
}

impl AtomConfiguration {
    /// Bunching parameter b = |(1/N) Σ e^{2ikz_j}|.
    pub fn bunching(&self) -> f64 {
        match self {
            AtomConfiguration::Homogeneous => 0.0,
            AtomConfiguration::Positions(p) if p.is_empty() => 0.0,
            AtomConfiguration::Positions(p) => {
                let s: Complex64 = p.iter().map(|&kz| Complex64::from_polar(1.0, 2.0 * kz)).sum();
                (s / p.len() as f64).norm()
            }
        }
    }
}

/// Coefficients A, B, C, D of the cubic in n for given scaled detunings
/// Δ̄_a = 2Δ_a/Γ and Δ̄_c = Δ_c/κ.
pub fn coefficients(params: &SystemParams, bar_delta_a: f64, bar_delta_c: f64) -> Result<CubicCoefficients> {
    let d = derive(params)?;
    let s1 = d.s1;
    let n_eta = d.n_eta;
    let s_eta = d.s_eta;
    let n_up = params.n_atoms as f64 * d.upsilon;
    let up_n = d.upsilon_n;
    let da2 = bar_delta_a * bar_delta_a;
    let dc = bar_delta_c;
    let p = 1.0 + da2;
    let cross = dc * p - 0.5 * n_up * bar_delta_a;
    let a = s1 * s1 * (1.0 + dc * dc);
    let b = 2.0 * s1 * (da2 + up_n / 2.0) + 2.0 * s1 * dc * cross - s1 * s_eta;
    let c = (da2 + up_n / 2.0).powi(2) + cross * cross - 2.0 * s_eta * p;
    let dd = -n_eta * p * p;
    Ok(CubicCoefficients::new(a, b, c, dd))
}

/// Right-hand side of the single-mode photon-number equation
/// n = n_η / ((1 + M/Q)² + (Δ̄_c − Δ̄_a M/Q)²), M = NΥ/2, Q = 1 + s₁n + Δ̄_a².
pub fn photon_number_map(params: &SystemParams, n: f64, delta_a: f64, delta_c: f64) -> Result<f64> {
    let d = derive(&params.with_detunings(delta_a, delta_c))?;
    let m = 0.5 * params.n_atoms as f64 * d.upsilon;
    let q = 1.0 + d.s1 * n + d.bar_delta_a * d.bar_delta_a;
    let re = 1.0 + m / q;
    let im = d.bar_delta_c - d.bar_delta_a * m / q;
    Ok(d.n_eta / (re * re + im * im))
}

/// All complex roots of the photon-number polynomial (three for coupled
/// atoms, one when the cubic degenerates to a linear equation).
pub fn complex_roots(params: &SystemParams, delta_a: f64, delta_c: f64) -> Result<Vec<Complex64>> {
    let p = params.with_detunings(delta_a, delta_c);
    let d = derive(&p)?;
    if d.n_eta == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0)]);
    }
    let coef = coefficients(&p, d.bar_delta_a, d.bar_delta_c)?;
    Ok(if coef.a3 == 0.0 {
        // Uncoupled atoms: the cubic collapses to C n + D = 0.
        vec![Complex64::new(-coef.a0 / coef.a1, 0.0)]
    } else {
        cubic::solve_cubic_closed(&coef)?.to_vec()
    })
}

/// All non-negative real photon numbers of the homogeneous single-mode
/// steady state at the given detunings.
pub fn photon_numbers(params: &SystemParams, delta_a: f64, delta_c: f64) -> Result<RootSet> {
    let p = params.with_detunings(delta_a, delta_c);
    let d = derive(&p)?;
    let roots = complex_roots(params, delta_a, delta_c)?;
    let mut set = cubic::positive_real_roots(&roots, cubic::DEFAULT_TOL);
    if d.n_eta == 0.0 {
        return Ok(set);
    }
    let coef = coefficients(&p, d.bar_delta_a, d.bar_delta_c)?;
    for r in &mut set.roots {
        // Tighten each real root on the fixed-point form; the cubic and the
        // map share their positive roots.
        let mapped = photon_number_map(&p, r.value, delta_a, delta_c)?;
        if (mapped - r.value).abs() > CONSISTENCY_TOL * r.value.max(f64::MIN_POSITIVE) && r.multiplicity == 1 {
            r.value = polish_real(&coef, r.value);
        }
    }
    Ok(set)
}

fn polish_real(c: &CubicCoefficients, mut x: f64) -> f64 {
    for _ in 0..8 {
        let f = c.eval(x);
        let df = (3.0 * c.a3 * x + 2.0 * c.a2) * x + c.a1;
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = x - f / df;
        if !(c.eval(next).abs() < f.abs()) {
            break;
        }
        x = next;
    }
    x
}

fn amplitude(d: &crate::params::DerivedParams, n_atoms: u64, n: f64) -> Complex64 {
    let m = 0.5 * n_atoms as f64 * d.upsilon;
    let q = 1.0 + d.s1 * n + d.bar_delta_a * d.bar_delta_a;
    let den = Complex64::new(1.0, -d.bar_delta_c) + Complex64::new(1.0, d.bar_delta_a) * (m / q);
    d.alpha_eta / den
}

/// Steady state for photon number `n` at the detunings in `params`, without
/// the |α₊|² = n consistency check of [`field_amplitude`].
pub fn solution_for(params: &SystemParams, n: f64) -> Result<SteadyStateSolution> {
    let d = derive(params)?;
    let alpha = amplitude(&d, params.n_atoms, n);
    let zero = Complex64::new(0.0, 0.0);
    let atom = atomic_observables(params, alpha, zero, 0.0)?;
    Ok(SteadyStateSolution {
        n,
        alpha_plus: alpha,
        alpha_minus: zero,
        transmission: if d.n_eta > 0.0 { n / d.n_eta } else { 0.0 },
        sigma_z: atom.sigma_z,
        sigma_minus: atom.sigma_minus,
        p_excited: atom.p_excited,
    })
}

/// Excited-state population of the homogeneous steady state with photon
/// number `n`: σ_z = −1/(1 + s₁n/(1 + Δ̄_a²)).
pub fn excited_population(params: &SystemParams, n: f64) -> Result<f64> {
    let d = derive(params)?;
    let sz = -1.0 / (1.0 + d.s1 * n / (1.0 + d.bar_delta_a * d.bar_delta_a));
    Ok(0.5 * (1.0 + sz))
}

/// Intracavity amplitude α₊ for photon number `n`,
/// α₊ = (η₊/κ) / (1 − iΔ̄_c + (NΥ/2)(1 + iΔ̄_a)/(1 + s₁n + Δ̄_a²)).
pub fn field_amplitude(params: &SystemParams, n: f64, delta_a: f64, delta_c: f64) -> Result<Complex64> {
    let d = derive(&params.with_detunings(delta_a, delta_c))?;
    if !n.is_finite() || n < 0.0 {
        return Err(Error::SpuriousRoot { n, alpha_sq: f64::NAN });
    }
    let alpha = amplitude(&d, params.n_atoms, n);
    let alpha_sq = alpha.norm_sqr();
    let floor = 1e-14 * d.n_eta;
    if (alpha_sq - n).abs() > CONSISTENCY_TOL * n + floor {
        return Err(Error::SpuriousRoot { n, alpha_sq });
    }
    Ok(alpha)
}

/// Atomic inversion and coherence of an atom at phase `kz`, given the two
/// field amplitudes.
///
/// σ_z = −1/(1 + 2|U_γ/g|²|E|²) with E = e^{ikz}α₊ + e^{−ikz}α₋, and
/// σ⁻ = −(U_γ/g)·E·σ_z, the stationary point of the equations of motion used
/// in [`crate::dynamics`].
pub fn atomic_observables(
    params: &SystemParams,
    alpha_plus: Complex64,
    alpha_minus: Complex64,
    kz: f64,
) -> Result<AtomicState> {
    if !(alpha_plus.re.is_finite() && alpha_plus.im.is_finite() && alpha_minus.re.is_finite() && alpha_minus.im.is_finite()) {
        return Err(Error::NonFinite("field amplitudes"));
    }
    let d = derive(params)?;
    if params.g == 0.0 {
        return Ok(AtomicState { sigma_z: -1.0, sigma_minus: Complex64::new(0.0, 0.0), p_excited: 0.0 });
    }
    let e = Complex64::from_polar(1.0, kz) * alpha_plus + Complex64::from_polar(1.0, -kz) * alpha_minus;
    let u_over_g = d.u_gamma / params.g;
    let sigma_z = -1.0 / (1.0 + 2.0 * u_over_g.norm_sqr() * e.norm_sqr());
    let sigma_minus = -u_over_g * e * sigma_z;
    Ok(AtomicState { sigma_z, sigma_minus, p_excited: 0.5 * (1.0 + sigma_z) })
}

/// Homogeneous steady states at the detunings stored in `params`, ordered by
/// photon number.
pub fn steady_states(params: &SystemParams) -> Result<Vec<SteadyStateSolution>> {
    let roots = photon_numbers(params, params.delta_a, params.delta_c)?;
    roots
        .roots
        .iter()
        .map(|r| {
            field_amplitude(params, r.value, params.delta_a, params.delta_c)?;
            solution_for(params, r.value)
        })
        .collect()
}

fn positions(params: &SystemParams, config: &AtomConfiguration) -> Result<Vec<f64>> {
    match config {
        AtomConfiguration::Homogeneous => Err(Error::param(
            "config",
            "the two-mode equations need explicit atom positions",
        )),
        AtomConfiguration::Positions(p) => {
            if p.len() as u64 != params.n_atoms {
                return Err(Error::param(
                    "config",
                    format!("{} positions given for {} atoms", p.len(), params.n_atoms),
                ));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("atom positions"));
            }
            Ok(p.clone())
        }
    }
}

/// Residuals of the two coupled stationary field equations
/// Δ_κα_± − Σ_j U_γ(α_± + e^{∓2ikz_j}α_∓)/S_j − iη_±, with
/// S_j = 1 + 2|U_γ/g|²|e^{ikz_j}α₊ + e^{−ikz_j}α₋|².
pub fn two_mode_residual(
    params: &SystemParams,
    config: &AtomConfiguration,
    alpha_plus: Complex64,
    alpha_minus: Complex64,
) -> Result<(Complex64, Complex64)> {
    let pos = positions(params, config)?;
    let d = derive(params)?;
    Ok(residual_at(params, &d, &pos, alpha_plus, alpha_minus))
}

fn residual_at(
    params: &SystemParams,
    d: &crate::params::DerivedParams,
    pos: &[f64],
    ap: Complex64,
    am: Complex64,
) -> (Complex64, Complex64) {
    let g2 = params.g * params.g;
    let sat = 2.0 * g2 / (params.delta_a * params.delta_a + 0.25 * params.gamma * params.gamma);
    let mut sum_p = Complex64::new(0.0, 0.0);
    let mut sum_m = Complex64::new(0.0, 0.0);
    for &kz in pos {
        let ph = Complex64::from_polar(1.0, kz);
        let e = ph * ap + ph.conj() * am;
        let inv_s = 1.0 / (1.0 + sat * e.norm_sqr());
        let ph2 = ph * ph;
        sum_p += (ap + ph2.conj() * am) * inv_s;
        sum_m += (am + ph2 * ap) * inv_s;
    }
    let i = Complex64::new(0.0, 1.0);
    (
        d.delta_kappa * ap - d.u_gamma * sum_p - i * params.eta_plus,
        d.delta_kappa * am - d.u_gamma * sum_m - i * params.eta_minus,
    )
}

/// Jacobian of the residual with respect to (Re α₊, Im α₊, Re α₋, Im α₋).
fn jacobian_at(
    params: &SystemParams,
    d: &crate::params::DerivedParams,
    pos: &[f64],
    ap: Complex64,
    am: Complex64,
) -> Matrix4<f64> {
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let g2 = params.g * params.g;
    let sat = 2.0 * g2 / (params.delta_a * params.delta_a + 0.25 * params.gamma * params.gamma);
    let mut dp = [Complex64::new(0.0, 0.0); 4];
    let mut dm = [Complex64::new(0.0, 0.0); 4];
    for &kz in pos {
        let ph = Complex64::from_polar(1.0, kz);
        let c2 = ph * ph;
        let e = ph * ap + ph.conj() * am;
        let w = 1.0 / (1.0 + sat * e.norm_sqr());
        let vp = ap + c2.conj() * am;
        let vm = am + c2 * ap;
        let de = [ph, i * ph, ph.conj(), i * ph.conj()];
        let dvp = [one, i, c2.conj(), i * c2.conj()];
        let dvm = [c2, i * c2, one, i];
        for k in 0..4 {
            let dw = -sat * w * w * 2.0 * (e.conj() * de[k]).re;
            dp[k] += dvp[k] * w + vp * dw;
            dm[k] += dvm[k] * w + vm * dw;
        }
    }
    let lin_p = [d.delta_kappa, i * d.delta_kappa, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    let lin_m = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), d.delta_kappa, i * d.delta_kappa];
    let mut jac = Matrix4::zeros();
    for k in 0..4 {
        let cp = lin_p[k] - d.u_gamma * dp[k];
        let cm = lin_m[k] - d.u_gamma * dm[k];
        jac[(0, k)] = cp.re;
        jac[(1, k)] = cp.im;
        jac[(2, k)] = cm.re;
        jac[(3, k)] = cm.im;
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeSolution {
    pub alpha_plus: Complex64,
    pub alpha_minus: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton iteration on (Re α₊, Im α₊, Re α₋, Im α₋) starting from
/// `initial_guess`. Converges to the solution reached from the guess; no
/// global uniqueness is implied.
pub fn two_mode_solve(
    params: &SystemParams,
    config: &AtomConfiguration,
    initial_guess: (Complex64, Complex64),
) -> Result<TwoModeSolution> {
    let pos = positions(params, config)?;
    let d = derive(params)?;
    let f = |x: &Vector4<f64>| -> Vector4<f64> {
        let (rp, rm) = residual_at(
            params,
            &d,
            &pos,
            Complex64::new(x[0], x[1]),
            Complex64::new(x[2], x[3]),
        );
        Vector4::new(rp.re, rp.im, rm.re, rm.im)
    };
    let target = 1e-10 * (1.0 + params.eta_plus / params.kappa);
    let mut x = Vector4::new(initial_guess.0.re, initial_guess.0.im, initial_guess.1.re, initial_guess.1.im);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial guess"));
    }
    let mut fx = f(&x);
    let mut norm = fx.norm();
    let done = |x: &Vector4<f64>, iterations: usize, residual: f64| TwoModeSolution {
        alpha_plus: Complex64::new(x[0], x[1]),
        alpha_minus: Complex64::new(x[2], x[3]),
        iterations,
        residual,
    };
    for it in 0..NEWTON_MAX_ITER {
        if norm <= target {
            return Ok(done(&x, it, norm));
        }
        let jac = jacobian_at(params, &d, &pos, Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]));
        let Some(step) = jac.lu().solve(&(-fx)) else {
            return Err(Error::NoConvergence { iterations: it, residual: norm });
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial = x + step * lambda;
            let ft = f(&trial);
            let nt = ft.norm();
            if nt.is_finite() && nt < norm {
                x = trial;
                fx = ft;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Take the smallest damped step anyway; the residual may need to
            // rise briefly to leave a shallow valley.
            x += step * lambda;
            fx = f(&x);
            norm = fx.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite("two-mode Newton iterate"));
            }
        }
    }
    if norm <= target {
        return Ok(done(&x, NEWTON_MAX_ITER, norm));
    }
    Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_s1(s1: f64, upsilon_n: f64, n_eta: f64) -> SystemParams {
        // Γ = 1, κ = 1: s₁ = 8g², Υ = 4g², so Υ_N = 4Ng² + 2.
        let g = (s1 / 8.0).sqrt();
        let n = ((upsilon_n - 2.0) / (4.0 * g * g)).round() as u64;
        SystemParams::new(g, 1.0, n).with_pump_photons(n_eta)
    }

    #[test]
    fn empty_cavity_coefficients() {
        let p = SystemParams::new(0.5, 1.0, 0).with_pump_photons(1.0);
        let c = coefficients(&p, 0.0, 0.0).unwrap();
        assert_eq!((c.a3, c.a2, c.a1, c.a0), (4.0, 0.0, -3.0, -1.0));
    }

    #[test]
    fn resonant_coefficients() {
        let p = params_s1(8.0, 18.0, 27.0 / 8.0);
        assert_eq!(p.n_atoms, 4);
        let c = coefficients(&p, 0.0, 0.0).unwrap();
        let e = [64.0, -72.0, 27.0, -27.0 / 8.0];
        for (x, y) in [c.a3, c.a2, c.a1, c.a0].iter().zip(e) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn triple_root_at_onset() {
        let p = params_s1(8.0, 18.0, 27.0 / 8.0);
        let set = photon_numbers(&p, 0.0, 0.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.roots[0].multiplicity, 3);
        assert!((set.roots[0].value - 0.375).abs() < 1e-9);
    }

    #[test]
    fn empty_cavity_roots() {
        let p = SystemParams::new(0.3, 0.1, 0).with_pump_photons(7.0);
        for da in [-3.0, 0.0, 0.2, 5.0] {
            let set = photon_numbers(&p, da, 0.0).unwrap();
            assert_eq!(set.len(), 1);
            assert!((set.values()[0] / 7.0 - 1.0).abs() < 1e-12);
        }
        let uncoupled = SystemParams::new(0.0, 0.1, 10).with_pump_photons(7.0);
        let set = photon_numbers(&uncoupled, 0.0, 1.0).unwrap();
        assert!((set.values()[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn bistable_resonant_point() {
        let p = SystemParams::from_collective(1.2, 0.0022, 200_000);
        let s1 = derive(&p).unwrap().s1;
        let p = p.with_pump_photons(1e5 / s1);
        let set = photon_numbers(&p, 0.0, 0.0).unwrap();
        assert_eq!(set.len(), 3);
        for r in &set.roots {
            let a = field_amplitude(&p, r.value, 0.0, 0.0).unwrap();
            assert!((a.norm_sqr() / r.value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn field_amplitude_empty_cavity() {
        let p = SystemParams::new(0.0, 1.0, 0).with_pump_photons(4.0);
        let a = field_amplitude(&p, 4.0, 0.0, 0.0).unwrap();
        assert!((a - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let a = field_amplitude(&p, 2.0, 0.0, 1.0).unwrap();
        assert!((a.norm_sqr() / 4.0 - 0.5).abs() < 1e-15);
        assert!(matches!(field_amplitude(&p, 3.0, 0.0, 0.0), Err(Error::SpuriousRoot { .. })));
    }

    #[test]
    fn observables() {
        let p = SystemParams::new(0.5, 1.0, 1);
        let zero = Complex64::new(0.0, 0.0);
        let a = atomic_observables(&p, zero, zero, 0.3).unwrap();
        assert_eq!((a.sigma_z, a.p_excited), (-1.0, 0.0));
        // s₁ = 2 here.
        let n: f64 = 0.5;
        let a = atomic_observables(&p, Complex64::new(n.sqrt(), 0.0), zero, 0.0).unwrap();
        assert!((a.sigma_z + 0.5).abs() < 1e-15 && (a.p_excited - 0.25).abs() < 1e-15);
        let n: f64 = 99.0 / 2.0;
        let a = atomic_observables(&p, Complex64::new(0.0, n.sqrt()), zero, 0.0).unwrap();
        assert!((a.p_excited - 0.495).abs() < 1e-15);
        let bad = Complex64::new(f64::NAN, 0.0);
        assert!(atomic_observables(&p, bad, zero, 0.0).is_err());
    }

    #[test]
    fn two_mode_empty_cavity() {
        let mut p = SystemParams::new(0.1, 1.0, 0).with_detunings(0.3, -0.7);
        p.eta_plus = 1.5;
        p.eta_minus = 0.4;
        let cfg = AtomConfiguration::Positions(vec![]);
        let i = Complex64::new(0.0, 1.0);
        let dk = Complex64::new(p.delta_c, p.kappa);
        let (ep, em) = (i * p.eta_plus / dk, i * p.eta_minus / dk);
        let (rp, rm) = two_mode_residual(&p, &cfg, ep, em).unwrap();
        assert!(rp.norm() < 1e-15 && rm.norm() < 1e-15);
        let sol = two_mode_solve(&p, &cfg, (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.alpha_plus - ep).norm() < 1e-12 && (sol.alpha_minus - em).norm() < 1e-12);
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let mut p = SystemParams::new(0.2, 0.5, 3).with_detunings(0.4, -0.3);
        p.eta_plus = 1.0;
        let pos = vec![0.1, 1.3, 2.9];
        let d = derive(&p).unwrap();
        let (ap, am) = (Complex64::new(0.7, -0.2), Complex64::new(0.1, 0.3));
        let jac = jacobian_at(&p, &d, &pos, ap, am);
        let x = [ap.re, ap.im, am.re, am.im];
        for k in 0..4 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (a, b) = residual_at(&p, &d, &pos, Complex64::new(xp[0], xp[1]), Complex64::new(xp[2], xp[3]));
            let (c, e) = residual_at(&p, &d, &pos, Complex64::new(xm[0], xm[1]), Complex64::new(xm[2], xm[3]));
            let col = [(a - c).re, (a - c).im, (b - e).re, (b - e).im].map(|v| v / (2.0 * h));
            for r in 0..4 {
                assert!((jac[(r, k)] - col[r]).abs() < 1e-7, "({r},{k})");
            }
        }
    }

    #[test]
    fn homogeneous_rejected_by_two_mode() {
        let p = SystemParams::new(0.1, 1.0, 3);
        let z = Complex64::new(0.0, 0.0);
        assert!(two_mode_residual(&p, &AtomConfiguration::Homogeneous, z, z).is_err());
        assert!(two_mode_residual(&p, &AtomConfiguration::Positions(vec![0.0]), z, z).is_err());
    }

    #[test]
    fn bunching_limits() {
        assert_eq!(AtomConfiguration::Positions(vec![0.0; 5]).bunching(), 1.0);
        let n = 64;
        let pos = (0..n).map(|j| std::f64::consts::PI * j as f64 / n as f64).collect();
        assert!(AtomConfiguration::Positions(pos).bunching() < 1e-14);
    }
}
