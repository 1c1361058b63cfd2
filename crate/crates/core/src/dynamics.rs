//! Mean-field equations of motion, adaptive time integration and linear
//! stability of steady states.
//!
//! Equations (κ, Γ, g, detunings as in [`SystemParams`]):
//!
//! dσ⁻/dt = (iΔ_a − Γ/2)σ⁻ + igEσ_z
//! dσ_z/dt = −2igEσ⁺ + 2igE*σ⁻ − Γ(1 + σ_z)
//! dα_±/dt = (iΔ_c − κ)α_± − igΣ_j σ⁻_j e^{∓ikz_j} + η_±
//!
//! with E = e^{ikz}α₊ + e^{−ikz}α₋ at the atom. Their fixed points are the
//! steady states of [`crate::steadystate`].

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cubic::Stability;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::steadystate::{AtomConfiguration, SteadyStateSolution};

/// Real parts within this band (in units of κ) count as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;
const JACOBIAN_STEP: f64 = 1e-6;
const STEADY_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub sigma_minus: Vec<Complex64>,
    pub sigma_z: Vec<f64>,
    pub alpha_plus: Complex64,
    pub alpha_minus: Complex64,
}

impl MeanFieldState {
    /// All atoms in the ground state, empty cavity.
    pub fn ground(config: &AtomConfiguration) -> Self {
        let m = atom_count(config);
        MeanFieldState {
            sigma_minus: vec![Complex64::new(0.0, 0.0); m],
            sigma_z: vec![-1.0; m],
            alpha_plus: Complex64::new(0.0, 0.0),
            alpha_minus: Complex64::new(0.0, 0.0),
        }
    }

    /// Homogeneous-reduction state of a single-mode steady state.
    pub fn from_steady_state(s: &SteadyStateSolution) -> Self {
        MeanFieldState {
            sigma_minus: vec![s.sigma_minus],
            sigma_z: vec![s.sigma_z],
            alpha_plus: s.alpha_plus,
            alpha_minus: Complex64::new(0.0, 0.0),
        }
    }

    pub fn photon_number(&self) -> f64 {
        self.alpha_plus.norm_sqr()
    }

    /// Mean excited-state population (1 + ⟨σ_z⟩)/2.
    pub fn p_excited(&self) -> f64 {
        let m = self.sigma_z.len().max(1) as f64;
        0.5 * (1.0 + self.sigma_z.iter().sum::<f64>() / m)
    }

    /// Checks the Bloch-ball bound |σ⁻|² ≤ (1 − σ_z²)/4 + ε and σ_z ∈ [−1−ε, 1+ε].
    pub fn is_physical(&self, eps: f64) -> bool {
        self.sigma_minus.len() == self.sigma_z.len()
            && self.sigma_minus.iter().zip(&self.sigma_z).all(|(s, &z)| {
                z.is_finite()
                    && s.re.is_finite()
                    && s.im.is_finite()
                    && z >= -1.0 - eps
                    && z <= 1.0 + eps
                    && s.norm_sqr() <= (1.0 - z * z) / 4.0 + eps
            })
    }

    /// Flat real layout: (Re σ⁻, Im σ⁻, σ_z) per atom, then
    /// Re α₊, Im α₊, Re α₋, Im α₋.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.sigma_z.len() + 4);
        for (s, z) in self.sigma_minus.iter().zip(&self.sigma_z) {
            v.extend_from_slice(&[s.re, s.im, *z]);
        }
        v.extend_from_slice(&[self.alpha_plus.re, self.alpha_plus.im, self.alpha_minus.re, self.alpha_minus.im]);
        v
    }

    /// Inverse of [`MeanFieldState::to_vec`].
    pub fn from_vec(v: &[f64]) -> Self {
        let m = (v.len() - 4) / 3;
        let mut sigma_minus = Vec::with_capacity(m);
        let mut sigma_z = Vec::with_capacity(m);
        for j in 0..m {
            sigma_minus.push(Complex64::new(v[3 * j], v[3 * j + 1]));
            sigma_z.push(v[3 * j + 2]);
        }
        let k = 3 * m;
        MeanFieldState {
            sigma_minus,
            sigma_z,
            alpha_plus: Complex64::new(v[k], v[k + 1]),
            alpha_minus: Complex64::new(v[k + 2], v[k + 3]),
        }
    }
}

fn atom_count(config: &AtomConfiguration) -> usize {
    match config {
        AtomConfiguration::Homogeneous => 1,
        AtomConfiguration::Positions(p) => p.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampAxis {
    /// Laser frequency: Δ_a and Δ_c move together, Δ_ca stays fixed.
    DeltaA,
    /// Pump rate η₊.
    Pump,
}

/// Linear sweep from `start` at t = 0 to `stop` at t = `duration`, held at
/// `stop` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub axis: RampAxis,
    pub start: f64,
    pub stop: f64,
    pub duration: f64,
}

impl RampSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        let f = (t / self.duration).clamp(0.0, 1.0);
        self.start + (self.stop - self.start) * f
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::param("duration", "ramp duration must be positive"));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::param("ramp", "endpoints must be finite"));
        }
        if self.axis == RampAxis::Pump && (self.start < 0.0 || self.stop < 0.0) {
            return Err(Error::param("ramp", "pump rate must be non-negative"));
        }
        Ok(())
    }
}

/// Parameters in effect at time `t` under `ramp`.
pub fn params_at(params: &SystemParams, ramp: Option<&RampSpec>, t: f64) -> SystemParams {
    let mut p = *params;
    if let Some(r) = ramp {
        let v = r.value_at(t);
        match r.axis {
            RampAxis::DeltaA => {
                let dca = params.delta_ca();
                p.delta_a = v;
                p.delta_c = v - dca;
            }
            RampAxis::Pump => p.eta_plus = v,
        }
    }
    p
}

fn rhs_flat(p: &SystemParams, config: &AtomConfiguration, y: &[f64], dy: &mut [f64]) {
    let i = Complex64::new(0.0, 1.0);
    let m = (y.len() - 4) / 3;
    let k = 3 * m;
    let ap = Complex64::new(y[k], y[k + 1]);
    let am = Complex64::new(y[k + 2], y[k + 3]);
    let atom_decay = Complex64::new(-0.5 * p.gamma, p.delta_a);
    let cav = Complex64::new(-p.kappa, p.delta_c);
    let mut sum_p = Complex64::new(0.0, 0.0);
    let mut sum_m = Complex64::new(0.0, 0.0);
    let homogeneous = matches!(config, AtomConfiguration::Homogeneous);
    for j in 0..m {
        let s = Complex64::new(y[3 * j], y[3 * j + 1]);
        let z = y[3 * j + 2];
        let (e, ph) = match config {
            AtomConfiguration::Homogeneous => (ap, Complex64::new(1.0, 0.0)),
            AtomConfiguration::Positions(pos) => {
                let ph = Complex64::from_polar(1.0, pos[j]);
                (ph * ap + ph.conj() * am, ph)
            }
        };
        let ds = atom_decay * s + i * p.g * e * z;
        let dz = (-2.0 * i * p.g * e * s.conj() + 2.0 * i * p.g * e.conj() * s).re - p.gamma * (1.0 + z);
        dy[3 * j] = ds.re;
        dy[3 * j + 1] = ds.im;
        dy[3 * j + 2] = dz;
        sum_p += s * ph.conj();
        sum_m += s * ph;
    }
    if homogeneous {
        let n = p.n_atoms as f64;
        let da = cav * ap - i * p.g * n * sum_p + p.eta_plus;
        dy[k] = da.re;
        dy[k + 1] = da.im;
        dy[k + 2] = 0.0;
        dy[k + 3] = 0.0;
    } else {
        let dap = cav * ap - i * p.g * sum_p + p.eta_plus;
        let dam = cav * am - i * p.g * sum_m + p.eta_minus;
        dy[k] = dap.re;
        dy[k + 1] = dap.im;
        dy[k + 2] = dam.re;
        dy[k + 3] = dam.im;
    }
}

fn check_state(state: &MeanFieldState, config: &AtomConfiguration) -> Result<()> {
    if state.sigma_minus.len() != state.sigma_z.len() || state.sigma_z.len() != atom_count(config) {
        return Err(Error::param("state", "atom count does not match the configuration"));
    }
    if state.to_vec().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    Ok(())
}

/// Time derivative of `state`. In the homogeneous reduction the single atom
/// represents all N atoms and α₋ is held at zero.
pub fn rhs(
    state: &MeanFieldState,
    params: &SystemParams,
    config: &AtomConfiguration,
    t: f64,
    ramp: Option<&RampSpec>,
) -> Result<MeanFieldState> {
    check_state(state, config)?;
    let p = params_at(params, ramp, t);
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    rhs_flat(&p, config, &y, &mut dy);
    Ok(MeanFieldState::from_vec(&dy))
}

/// Largest component of the derivative, max-norm.
pub fn rhs_norm(d: &MeanFieldState) -> f64 {
    d.to_vec().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Output cadence; `None` records only the initial and final states.
    pub sample_interval: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Stop early once the max-norm of the derivative drops below this value
    /// and the ramp (if any) has finished.
    pub stationary_tol: Option<f64>,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rtol: 1e-8,
            atol: 1e-12,
            sample_interval: None,
            initial_step: None,
            max_steps: 50_000_000,
            stationary_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// Time at which the stationarity criterion was met, if it was.
    pub stationary_at: Option<f64>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &MeanFieldState {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `state0` at t = 0 to `t_end` with an adaptive
/// Dormand–Prince 5(4) scheme and PI step-size control.
pub fn integrate(
    state0: &MeanFieldState,
    params: &SystemParams,
    config: &AtomConfiguration,
    ramp: Option<&RampSpec>,
    t_end: f64,
    controls: &Controls,
) -> Result<Trajectory> {
    params.validate()?;
    check_state(state0, config)?;
    if let Some(r) = ramp {
        r.validate()?;
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::param("t_end", "must be positive and finite"));
    }
    if !(controls.rtol > 0.0) || !(controls.atol > 0.0) {
        return Err(Error::param("controls", "tolerances must be positive"));
    }
    if let Some(dt) = controls.sample_interval {
        if !(dt > 0.0) {
            return Err(Error::param("sample_interval", "must be positive"));
        }
    }

    let f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let p = params_at(params, ramp, t);
        rhs_flat(&p, config, y, dy);
    };

    let n = 3 * atom_count(config) + 4;
    let mut y = state0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = 0.0;
    f(t, &y, &mut k[0]);

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state0.clone()],
        stationary_at: None,
        steps: 0,
        rejected: 0,
    };

    let ramp_end = ramp.map(|r| r.duration).unwrap_or(0.0);
    let mut h_try = controls.initial_step.unwrap_or_else(|| {
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let dnorm = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        (0.01 * scale / dnorm).min(0.1 * t_end).min(1.0)
    });
    let mut next_sample = controls.sample_interval.map(|dt| dt.min(t_end));
    let mut err_prev: f64 = 1e-4;

    while t < t_end {
        if traj.steps + traj.rejected >= controls.max_steps {
            return Err(Error::NoConvergence { iterations: controls.max_steps, residual: f64::NAN });
        }
        let target = next_sample.unwrap_or(t_end).min(t_end);
        let mut landing = false;
        let mut h = h_try;
        if t + h >= target {
            h = target - t;
            landing = true;
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min && !landing {
            return Err(Error::StepUnderflow { t, last_state: Box::new(MeanFieldState::from_vec(&y)) });
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            f(t + C[s] * h, &ytmp, &mut k[s]);
        }
        // ytmp holds the 5th-order solution (stage 7 uses the b weights).
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            e *= h;
            ynew[i] = ytmp[i];
            let sc = controls.atol + controls.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            traj.rejected += 1;
            h_try = h * 0.1;
            if h_try < h_min {
                return Err(Error::StepUnderflow { t, last_state: Box::new(MeanFieldState::from_vec(&y)) });
            }
            continue;
        }

        if err <= 1.0 {
            t = if landing { target } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            traj.steps += 1;

            let mut stop = false;
            if let Some(tol) = controls.stationary_tol {
                if t >= ramp_end {
                    let d = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if d <= tol {
                        traj.stationary_at = Some(t);
                        stop = true;
                    }
                }
            }
            if landing && next_sample.is_some() && t < t_end && !stop {
                traj.times.push(t);
                traj.states.push(MeanFieldState::from_vec(&y));
                next_sample = controls.sample_interval.map(|dt| (t + dt).min(t_end));
            }
            if stop || t >= t_end {
                traj.times.push(t);
                traj.states.push(MeanFieldState::from_vec(&y));
                break;
            }

            let e = err.max(1e-10);
            if !landing {
                let fac = 0.9 * e.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                h_try = h * fac.clamp(0.2, 5.0);
            }
            err_prev = e;
        } else {
            traj.rejected += 1;
            let fac = 0.9 * err.powf(-1.0 / 5.0);
            h_try = h * fac.clamp(0.1, 0.9);
            if h_try < h_min {
                return Err(Error::StepUnderflow { t, last_state: Box::new(MeanFieldState::from_vec(&y)) });
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stability: Stability,
    /// Largest real part among the Jacobian eigenvalues.
    pub leading_real: f64,
    pub eigenvalues: Vec<Complex64>,
}

fn homogeneous_rhs5(p: &SystemParams, x: &[f64; 5]) -> [f64; 5] {
    let y = [x[0], x[1], x[2], x[3], x[4], 0.0, 0.0];
    let mut dy = [0.0; 7];
    rhs_flat(p, &AtomConfiguration::Homogeneous, &y, &mut dy);
    [dy[0], dy[1], dy[2], dy[3], dy[4]]
}

/// Linear stability of a homogeneous steady state from the eigenvalues of the
/// central-difference Jacobian of (Re σ⁻, Im σ⁻, σ_z, Re α₊, Im α₊).
pub fn stability(params: &SystemParams, solution: &SteadyStateSolution) -> Result<StabilityReport> {
    params.validate()?;
    let x0 = [
        solution.sigma_minus.re,
        solution.sigma_minus.im,
        solution.sigma_z,
        solution.alpha_plus.re,
        solution.alpha_plus.im,
    ];
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("steady state"));
    }
    let f0 = homogeneous_rhs5(params, &x0);
    let residual = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > STEADY_RESIDUAL * params.kappa {
        return Err(Error::NotStationary { residual });
    }
    let mut jac = SMatrix::<f64, 5, 5>::zeros();
    for c in 0..5 {
        let mut xp = x0;
        let mut xm = x0;
        xp[c] += JACOBIAN_STEP;
        xm[c] -= JACOBIAN_STEP;
        let fp = homogeneous_rhs5(params, &xp);
        let fm = homogeneous_rhs5(params, &xm);
        for r in 0..5 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * JACOBIAN_STEP);
        }
    }
    let eig = jac.complex_eigenvalues();
    let mut eigenvalues: Vec<Complex64> = eig.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let leading_real = eigenvalues[0].re;
    let band = MARGINAL_BAND * params.kappa;
    let stability = if leading_real < -band {
        Stability::Stable
    } else if leading_real <= band {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    Ok(StabilityReport { stability, leading_real, eigenvalues })
}
