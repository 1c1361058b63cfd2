//! System parameters and the derived dimensionless bundle.
//!
//! All rates are stored in units of the cavity field decay rate, so `kappa`
//! is normally 1. Physical inputs go through [`from_physical`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub n_atoms: u64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_a: f64,
    pub delta_c: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            g: 0.0,
            gamma: 1.0,
            kappa: 1.0,
            n_atoms: 0,
            eta_plus: 0.0,
            eta_minus: 0.0,
            delta_a: 0.0,
            delta_c: 0.0,
        }
    }
}

impl SystemParams {
    /// Parameters with single-atom coupling `g`, decay `gamma` and `n_atoms`
    /// atoms; κ = 1, no pump, zero detunings.
    pub fn new(g: f64, gamma: f64, n_atoms: u64) -> Self {
        SystemParams { g, gamma, n_atoms, ..Default::default() }
    }

    /// Same as [`SystemParams::new`] but from the collective coupling g√N.
    pub fn from_collective(g_n: f64, gamma: f64, n_atoms: u64) -> Self {
        let g = if n_atoms == 0 { 0.0 } else { g_n / (n_atoms as f64).sqrt() };
        Self::new(g, gamma, n_atoms)
    }

    pub fn with_pump_photons(mut self, n_eta: f64) -> Self {
        self.eta_plus = self.kappa * n_eta.max(0.0).sqrt();
        self
    }

    pub fn with_detunings(mut self, delta_a: f64, delta_c: f64) -> Self {
        self.delta_a = delta_a;
        self.delta_c = delta_c;
        self
    }

    /// Collective coupling g√N.
    pub fn g_n(&self) -> f64 {
        self.g * (self.n_atoms as f64).sqrt()
    }

    /// Cavity-atom detuning Δ_ca = Δ_a − Δ_c.
    pub fn delta_ca(&self) -> f64 {
        self.delta_a - self.delta_c
    }

    pub fn n_eta(&self) -> f64 {
        (self.eta_plus / self.kappa).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("g", self.g),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("eta_plus", self.eta_plus),
            ("eta_minus", self.eta_minus),
            ("delta_a", self.delta_a),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.g < 0.0 {
            return Err(Error::param("g", "must be non-negative"));
        }
        if self.gamma <= 0.0 {
            return Err(Error::param("gamma", "must be positive"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        if self.eta_plus < 0.0 {
            return Err(Error::param("eta_plus", "must be non-negative"));
        }
        if self.eta_minus < 0.0 {
            return Err(Error::param("eta_minus", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub upsilon: f64,
    pub s1: f64,
    pub upsilon_n: f64,
    pub n_eta: f64,
    pub s_eta: f64,
    pub omega_eta: f64,
    pub u_gamma: Complex64,
    pub delta_kappa: Complex64,
    pub alpha_eta: f64,
    pub bar_delta_a: f64,
    pub bar_delta_c: f64,
}

pub fn derive(p: &SystemParams) -> Result<DerivedParams> {
    p.validate()?;
    let (g, gamma, kappa) = (p.g, p.gamma, p.kappa);
    let upsilon = 4.0 * g * g / (kappa * gamma);
    let s1 = 8.0 * g * g / (gamma * gamma);
    let n_eta = p.n_eta();
    Ok(DerivedParams {
        upsilon,
        s1,
        upsilon_n: p.n_atoms as f64 * upsilon + 2.0,
        n_eta,
        s_eta: s1 * n_eta,
        omega_eta: 2.0 * g * p.eta_plus / kappa,
        u_gamma: Complex64::new(g * g, 0.0) / Complex64::new(p.delta_a, gamma / 2.0),
        delta_kappa: Complex64::new(p.delta_c, kappa),
        alpha_eta: p.eta_plus / kappa,
        bar_delta_a: 2.0 * p.delta_a / gamma,
        bar_delta_c: p.delta_c / kappa,
    })
}

/// Photon number at which the saturation parameter equals one, 1/s₁.
pub fn saturation_photon_number(p: &SystemParams) -> Result<f64> {
    p.validate()?;
    if p.g == 0.0 {
        return Err(Error::param("g", "uncoupled transition cannot be saturated"));
    }
    Ok(p.gamma * p.gamma / (8.0 * p.g * p.g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateUnit {
    /// Already dimensionless, in units of κ.
    Kappa,
    /// Ordinary frequency ν in Hz (rate = 2πν).
    Hz,
    /// Angular frequency in rad/s.
    RadPerSec,
    /// No unit given. Accepted only when no value carries a physical unit.
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub unit: RateUnit,
}

impl Rate {
    pub fn new(value: f64, unit: RateUnit) -> Self {
        Rate { value, unit }
    }
    pub fn hz(value: f64) -> Self {
        Rate::new(value, RateUnit::Hz)
    }
    pub fn rad_per_sec(value: f64) -> Self {
        Rate::new(value, RateUnit::RadPerSec)
    }
    pub fn kappa(value: f64) -> Self {
        Rate::new(value, RateUnit::Kappa)
    }
    pub fn zero() -> Self {
        Rate::new(0.0, RateUnit::Unspecified)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInput {
    pub g: Rate,
    pub gamma: Rate,
    pub kappa: Rate,
    pub n_atoms: u64,
    pub eta_plus: Rate,
    pub eta_minus: Rate,
    pub delta_a: Rate,
    pub delta_c: Rate,
}

impl PhysicalInput {
    pub fn new(g: Rate, gamma: Rate, kappa: Rate, n_atoms: u64) -> Self {
        PhysicalInput {
            g,
            gamma,
            kappa,
            n_atoms,
            eta_plus: Rate::zero(),
            eta_minus: Rate::zero(),
            delta_a: Rate::zero(),
            delta_c: Rate::zero(),
        }
    }
}

/// Converts rates with explicit units into κ-normalised [`SystemParams`].
///
/// Zero-valued rates may be left unspecified. A nonzero unspecified rate next
/// to physical units is rejected, and κ must carry a physical unit whenever
/// any other rate does. Rates given in κ units pass through unchanged.
pub fn from_physical(input: &PhysicalInput) -> Result<SystemParams> {
    let all = [
        ("g", input.g),
        ("gamma", input.gamma),
        ("kappa", input.kappa),
        ("eta_plus", input.eta_plus),
        ("eta_minus", input.eta_minus),
        ("delta_a", input.delta_a),
        ("delta_c", input.delta_c),
    ];
    for (name, r) in all {
        if !r.value.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    let physical = all
        .iter()
        .any(|(_, r)| matches!(r.unit, RateUnit::Hz | RateUnit::RadPerSec));

    let angular = |r: Rate| match r.unit {
        RateUnit::Hz => 2.0 * PI * r.value,
        _ => r.value,
    };

    let kappa_abs = if physical {
        match input.kappa.unit {
            RateUnit::Hz | RateUnit::RadPerSec => angular(input.kappa),
            _ => {
                return Err(Error::MixedUnits(
                    "kappa must be given in Hz or rad/s when other rates are physical".into(),
                ))
            }
        }
    } else {
        input.kappa.value
    };
    if kappa_abs <= 0.0 {
        return Err(Error::param("kappa", "must be positive"));
    }

    let mut out = [0.0; 7];
    for (i, (name, r)) in all.iter().enumerate() {
        out[i] = match r.unit {
            RateUnit::Hz | RateUnit::RadPerSec => angular(*r) / kappa_abs,
            RateUnit::Kappa => r.value,
            RateUnit::Unspecified => {
                if physical && r.value != 0.0 {
                    return Err(Error::MixedUnits(format!(
                        "`{name}` has no unit while other rates are physical"
                    )));
                }
                r.value / kappa_abs
            }
        };
    }
    let p = SystemParams {
        g: out[0],
        gamma: out[1],
        kappa: 1.0,
        n_atoms: input.n_atoms,
        eta_plus: out[3],
        eta_minus: out[4],
        delta_a: out[5],
        delta_c: out[6],
    };
    p.validate()?;
    Ok(p)
}

/// Parameters of the experiment: g/2π = 9.1 kHz, Γ/2π = 7.5 kHz,
/// κ/2π = 3.4 MHz, in units of κ.
pub fn experimental(n_atoms: u64) -> SystemParams {
    let input = PhysicalInput::new(Rate::hz(9.1e3), Rate::hz(7.5e3), Rate::hz(3.4e6), n_atoms);
    from_physical(&input).expect("constant parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experimental_values() {
        let p = experimental(200_000);
        let d = derive(&p).unwrap();
        assert!((d.s1 / 11.8 - 1.0).abs() < 0.03);
        assert!((d.s1 - 8.0 * (9.1f64 / 7.5).powi(2)).abs() < 1e-12);
        assert!((d.upsilon - 0.013).abs() < 5e-4);
        assert!((p.g - 0.002676).abs() < 1e-6);
        assert!((p.gamma - 0.002206).abs() < 1e-6);
        assert!((saturation_photon_number(&p).unwrap() / 0.087 - 1.0).abs() < 0.03);
    }

    #[test]
    fn decoupled() {
        let d = derive(&SystemParams::new(0.0, 0.5, 10)).unwrap();
        assert_eq!(d.s1, 0.0);
        assert_eq!(d.upsilon, 0.0);
        assert_eq!(d.u_gamma, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pump_arithmetic() {
        let mut p = SystemParams::new(0.1, 0.1 * (8.0f64 / 11.8).sqrt(), 1);
        p.eta_plus = 2.0;
        let d = derive(&p).unwrap();
        assert_eq!(d.n_eta, 4.0);
        assert!((d.s_eta - 47.2).abs() < 1e-9);
    }

    #[test]
    fn saturation_scaling() {
        let g = 0.5f64.sqrt();
        let p = SystemParams::new(g, 2.0, 1);
        assert!((saturation_photon_number(&p).unwrap() - 1.0).abs() < 1e-15);
        let q = SystemParams::new(2.0 * g, 2.0, 1);
        assert!((saturation_photon_number(&q).unwrap() - 0.25).abs() < 1e-15);
        assert!(saturation_photon_number(&SystemParams::new(0.0, 1.0, 1)).is_err());
    }

    #[test]
    fn rejects_zero_rates() {
        assert!(derive(&SystemParams::new(1.0, 0.0, 1)).is_err());
        let mut p = SystemParams::new(1.0, 1.0, 1);
        p.kappa = 0.0;
        assert!(derive(&p).is_err());
    }

    #[test]
    fn dimensionless_identity() {
        let mut input = PhysicalInput::new(Rate::kappa(0.3), Rate::kappa(0.02), Rate::kappa(1.0), 7);
        input.delta_a = Rate::kappa(-0.5);
        let p = from_physical(&input).unwrap();
        assert_eq!(p.g, 0.3);
        assert_eq!(p.gamma, 0.02);
        assert_eq!(p.delta_a, -0.5);
        assert_eq!(p.kappa, 1.0);
    }

    #[test]
    fn collective_coupling() {
        let p = SystemParams::from_collective(1.2, 0.0022, 200_000);
        assert!((p.g - 0.00268).abs() < 5e-6);
        let e = experimental(200_000);
        assert!((p.g / e.g - 1.0).abs() < 0.01);
    }

    #[test]
    fn mixed_units_rejected() {
        let mut input = PhysicalInput::new(Rate::hz(9.1e3), Rate::hz(7.5e3), Rate::hz(3.4e6), 1);
        input.delta_a = Rate::new(5.0, RateUnit::Unspecified);
        assert!(matches!(from_physical(&input), Err(Error::MixedUnits(_))));
        let input = PhysicalInput::new(Rate::hz(9.1e3), Rate::hz(7.5e3), Rate::new(1.0, RateUnit::Unspecified), 1);
        assert!(matches!(from_physical(&input), Err(Error::MixedUnits(_))));
    }

    #[test]
    fn angular_and_ordinary_agree() {
        let a = from_physical(&PhysicalInput::new(Rate::hz(1.0), Rate::hz(2.0), Rate::hz(4.0), 1)).unwrap();
        let b = from_physical(&PhysicalInput::new(
            Rate::rad_per_sec(2.0 * PI),
            Rate::hz(2.0),
            Rate::rad_per_sec(8.0 * PI),
            1,
        ))
        .unwrap();
        assert!((a.g - b.g).abs() < 1e-15 && (a.gamma - b.gamma).abs() < 1e-15);
    }

    #[test]
    fn derive_is_pure() {
        let p = experimental(1000).with_pump_photons(12.0).with_detunings(0.1, -0.2);
        let a = derive(&p).unwrap();
        let b = derive(&p).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.u_gamma.im < 0.0);
    }
}
