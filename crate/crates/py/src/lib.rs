//! Python bindings. Structured results are handed over as plain dicts and
//! lists with the same field names as the JSON output of the CLI.

use bistab_core::dynamics::{self, Controls, MeanFieldState, RampAxis, RampSpec};
use bistab_core::params::{self, PhysicalInput, Rate};
use bistab_core::phases::{self, DiagramOptions};
use bistab_core::spectra::{self, Direction, ScanAxis, ScanOptions, SpectrumBranch, StartHint};
use bistab_core::steadystate::{self, AtomConfiguration};
use bistab_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Model parameters in units of κ.
#[pyclass(name = "SystemParams", module = "bistab")]
struct PySystemParams {
    inner: params::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (g, gamma, n_atoms, *, kappa=1.0, n_eta=0.0, eta_minus=0.0, delta_a=0.0, delta_c=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        g: f64,
        gamma: f64,
        n_atoms: u64,
        kappa: f64,
        n_eta: f64,
        eta_minus: f64,
        delta_a: f64,
        delta_c: f64,
    ) -> PyResult<Self> {
        let mut p = params::SystemParams::new(g, gamma, n_atoms);
        p.kappa = kappa;
        p.eta_minus = eta_minus;
        let p = p.with_pump_photons(n_eta).with_detunings(delta_a, delta_c);
        p.validate().map_err(err)?;
        Ok(PySystemParams { inner: p })
    }

    /// From the collective coupling g√N.
    #[staticmethod]
    #[pyo3(signature = (g_n, gamma, n_atoms, *, n_eta=0.0, delta_a=0.0, delta_c=0.0))]
    fn collective(g_n: f64, gamma: f64, n_atoms: u64, n_eta: f64, delta_a: f64, delta_c: f64) -> PyResult<Self> {
        let p = params::SystemParams::from_collective(g_n, gamma, n_atoms)
            .with_pump_photons(n_eta)
            .with_detunings(delta_a, delta_c);
        p.validate().map_err(err)?;
        Ok(PySystemParams { inner: p })
    }

    /// From rates in Hz; converted to units of κ.
    #[staticmethod]
    #[pyo3(signature = (g_hz, gamma_hz, kappa_hz, n_atoms))]
    fn from_hz(g_hz: f64, gamma_hz: f64, kappa_hz: f64, n_atoms: u64) -> PyResult<Self> {
        let input = PhysicalInput::new(Rate::hz(g_hz), Rate::hz(gamma_hz), Rate::hz(kappa_hz), n_atoms);
        Ok(PySystemParams { inner: params::from_physical(&input).map_err(err)? })
    }

    /// The experimental rates (9.1 kHz, 7.5 kHz, 3.4 MHz).
    #[staticmethod]
    fn experimental(n_atoms: u64) -> Self {
        PySystemParams { inner: params::experimental(n_atoms) }
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn n_atoms(&self) -> u64 {
        self.inner.n_atoms
    }
    #[getter]
    fn g_n(&self) -> f64 {
        self.inner.g_n()
    }
    #[getter]
    fn n_eta(&self) -> f64 {
        self.inner.n_eta()
    }
    #[getter]
    fn delta_a(&self) -> f64 {
        self.inner.delta_a
    }
    #[getter]
    fn delta_c(&self) -> f64 {
        self.inner.delta_c
    }

    /// Copy with a new pump photon number n_η.
    fn with_pump(&self, n_eta: f64) -> Self {
        PySystemParams { inner: self.inner.with_pump_photons(n_eta) }
    }

    fn with_detunings(&self, delta_a: f64, delta_c: f64) -> Self {
        PySystemParams { inner: self.inner.with_detunings(delta_a, delta_c) }
    }

    /// Υ, s₁, Υ_N, n_η, s_η, Ω_η and the complex auxiliaries.
    fn derived(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &params::derive(&self.inner).map_err(err)?)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(g={}, gamma={}, n_atoms={}, kappa={}, n_eta={}, delta_a={}, delta_c={})",
            p.g,
            p.gamma,
            p.n_atoms,
            p.kappa,
            p.n_eta(),
            p.delta_a,
            p.delta_c
        )
    }
}

/// Multi-branch spectrum returned by `scan`.
#[pyclass(name = "Spectrum", module = "bistab")]
struct PySpectrum {
    branches: Vec<SpectrumBranch>,
}

#[pymethods]
impl PySpectrum {
    fn __len__(&self) -> usize {
        self.branches.len()
    }

    /// List of branches, each with `samples` and fold flags.
    fn branches(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.branches)
    }

    /// (x, number of roots) at every sampled x.
    fn root_counts(&self) -> Vec<(f64, usize)> {
        spectra::root_counts(&self.branches)
    }

    /// Quasi-static sweep. `direction` is "up" or "down"; `start` is
    /// "lowest", "highest" or a photon number to start nearest to.
    #[pyo3(signature = (direction, start="lowest".into()))]
    fn follow(&self, py: Python<'_>, direction: &str, start: StartArg) -> PyResult<Py<PyAny>> {
        let direction = match direction {
            "up" => Direction::Up,
            "down" => Direction::Down,
            other => return Err(PyValueError::new_err(format!("direction must be up or down, got {other:?}"))),
        };
        let hint = match start {
            StartArg::Name(s) if s == "lowest" => StartHint::Lowest,
            StartArg::Name(s) if s == "highest" => StartHint::Highest,
            StartArg::Name(s) => return Err(PyValueError::new_err(format!("unknown start {s:?}"))),
            StartArg::Near(n) => StartHint::Nearest(n),
        };
        to_py(py, &spectra::branch_follow(&self.branches, direction, hint))
    }
}

#[derive(FromPyObject)]
enum StartArg {
    Near(f64),
    Name(String),
}

impl From<&str> for StartArg {
    fn from(s: &str) -> Self {
        StartArg::Name(s.to_owned())
    }
}

fn scan_axis(axis: &str, fixed: f64) -> PyResult<ScanAxis> {
    Ok(match axis {
        "delta_a" => ScanAxis::DeltaA { delta_ca: fixed },
        "delta_a_fixed_cavity" => ScanAxis::DeltaAFixedCavity { delta_c: fixed },
        "delta_ca" => ScanAxis::DeltaCa { delta_a: fixed },
        "pump" => ScanAxis::Pump,
        other => return Err(PyValueError::new_err(format!("unknown axis {other:?}"))),
    })
}

/// Non-negative real photon numbers at the given detunings (defaults: those
/// stored in `params`).
#[pyfunction]
#[pyo3(signature = (params, delta_a=None, delta_c=None))]
fn photon_numbers(params: &PySystemParams, delta_a: Option<f64>, delta_c: Option<f64>) -> PyResult<Vec<f64>> {
    let p = &params.inner;
    let set = steadystate::photon_numbers(p, delta_a.unwrap_or(p.delta_a), delta_c.unwrap_or(p.delta_c))
        .map_err(err)?;
    Ok(set.values())
}

/// Full steady states (field, Bloch vector, population) at the stored
/// detunings.
#[pyfunction]
fn steady_states(py: Python<'_>, params: &PySystemParams) -> PyResult<Py<PyAny>> {
    to_py(py, &steadystate::steady_states(&params.inner).map_err(err)?)
}

/// Two-mode steady state for atoms at phases kz_j, started from `guess`
/// (α₊, α₋) given as complex numbers.
#[pyfunction]
#[pyo3(signature = (params, positions, guess=None))]
fn two_mode_steady_state(
    py: Python<'_>,
    params: &PySystemParams,
    positions: Vec<f64>,
    guess: Option<(num_complex::Complex64, num_complex::Complex64)>,
) -> PyResult<Py<PyAny>> {
    let p = &params.inner;
    // Default guess: the empty-cavity fields.
    let empty = |eta: f64| num_complex::Complex64::new(eta, 0.0) / num_complex::Complex64::new(p.kappa, -p.delta_c);
    let guess = guess.unwrap_or_else(|| (empty(p.eta_plus), empty(p.eta_minus)));
    let sol = steadystate::two_mode_solve(p, &AtomConfiguration::Positions(positions), guess).map_err(err)?;
    to_py(py, &sol)
}

/// Scan along `axis` ("delta_a", "delta_a_fixed_cavity", "delta_ca",
/// "pump"); `fixed` is the detuning held constant where applicable.
#[pyfunction]
#[pyo3(signature = (params, axis, grid, fixed=0.0, refine=true, stability=false))]
fn scan(
    py: Python<'_>,
    params: &PySystemParams,
    axis: &str,
    grid: Vec<f64>,
    fixed: f64,
    refine: bool,
    stability: bool,
) -> PyResult<PySpectrum> {
    let axis = scan_axis(axis, fixed)?;
    let opts = ScanOptions { refine, stability, ..ScanOptions::default() };
    let p = params.inner;
    let branches = py.detach(|| spectra::scan_spectrum(&p, axis, &grid, &opts)).map_err(err)?;
    Ok(PySpectrum { branches })
}

/// Solution counts along a pump grid of s₁n_η values at the given detunings.
#[pyfunction]
#[pyo3(signature = (params, pump_grid, delta_a=0.0, delta_c=0.0))]
fn solution_counts(params: &PySystemParams, pump_grid: Vec<f64>, delta_a: f64, delta_c: f64) -> PyResult<Vec<usize>> {
    let counts = spectra::solution_counts(&params.inner, &pump_grid, delta_a, delta_c).map_err(err)?;
    Ok(counts.iter().map(|c| c.total()).collect())
}

/// Zero-phase detuning Δ_ca for a given Δ_a.
#[pyfunction]
fn zero_phase_curve(params: &PySystemParams, delta_a: f64) -> PyResult<f64> {
    spectra::zero_phase_curve(&params.inner, delta_a).map_err(err)
}

#[pyfunction]
fn boundaries(py: Python<'_>, params: &PySystemParams) -> PyResult<Py<PyAny>> {
    to_py(py, &phases::boundaries(&params.inner).map_err(err)?)
}

#[pyfunction]
fn resonant_onset(py: Python<'_>, params: &PySystemParams) -> PyResult<Py<PyAny>> {
    to_py(py, &phases::resonant_onset(&params.inner).map_err(err)?)
}

/// Classification of one spectrum cell at the stored pump (Δ_ca = 0 scan).
#[pyfunction]
#[pyo3(signature = (params, cell_points=2001))]
fn classify(py: Python<'_>, params: &PySystemParams, cell_points: usize) -> PyResult<Py<PyAny>> {
    let opts = DiagramOptions { cell_points, ..DiagramOptions::default() };
    to_py(py, &phases::evaluate_cell(&params.inner, &opts).map_err(err)?)
}

/// Phase diagram over Γ/2κ × n_η. g and N come from `params`.
#[pyfunction]
#[pyo3(signature = (params, gamma_over_2kappa, n_eta, cell_points=2001))]
fn phase_diagram(
    py: Python<'_>,
    params: &PySystemParams,
    gamma_over_2kappa: Vec<f64>,
    n_eta: Vec<f64>,
    cell_points: usize,
) -> PyResult<Py<PyAny>> {
    let opts = DiagramOptions { cell_points, ..DiagramOptions::default() };
    let p = params.inner;
    let d = py.detach(|| phases::phase_diagram(&p, &gamma_over_2kappa, &n_eta, &opts)).map_err(err)?;
    to_py(py, &d)
}

/// Integrates the mean-field equations. `positions` switches from the
/// homogeneous reduction to explicit atoms; `start` is "ground" or the index
/// of a steady state (homogeneous only); `ramp` is (axis, start, stop,
/// duration) with axis "delta_a" or "pump".
#[pyfunction]
#[pyo3(signature = (params, t_end, *, positions=None, start=None, sample_interval=None, rtol=1e-8, atol=1e-12, ramp=None))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    params: &PySystemParams,
    t_end: f64,
    positions: Option<Vec<f64>>,
    start: Option<usize>,
    sample_interval: Option<f64>,
    rtol: f64,
    atol: f64,
    ramp: Option<(String, f64, f64, f64)>,
) -> PyResult<Py<PyAny>> {
    let config = positions.map_or(AtomConfiguration::Homogeneous, AtomConfiguration::Positions);
    let ramp = ramp
        .map(|(axis, start, stop, duration)| {
            let axis = match axis.as_str() {
                "delta_a" => RampAxis::DeltaA,
                "pump" => RampAxis::Pump,
                other => return Err(PyValueError::new_err(format!("unknown ramp axis {other:?}"))),
            };
            Ok(RampSpec { axis, start, stop, duration })
        })
        .transpose()?;
    let p0 = dynamics::params_at(&params.inner, ramp.as_ref(), 0.0);
    let state = match start {
        None => MeanFieldState::ground(&config),
        Some(k) => {
            if !matches!(config, AtomConfiguration::Homogeneous) {
                return Err(PyValueError::new_err("steady-state starts need the homogeneous reduction"));
            }
            let states = steadystate::steady_states(&p0).map_err(err)?;
            let s = states
                .get(k)
                .ok_or_else(|| PyValueError::new_err(format!("only {} steady states", states.len())))?;
            MeanFieldState::from_steady_state(s)
        }
    };
    let controls = Controls { rtol, atol, sample_interval, ..Controls::default() };
    let p = params.inner;
    let tr = py
        .detach(|| dynamics::integrate(&state, &p, &config, ramp.as_ref(), t_end, &controls))
        .map_err(err)?;
    to_py(py, &tr)
}

/// Jacobian eigenvalues of the homogeneous steady state with photon number n.
#[pyfunction]
fn stability(py: Python<'_>, params: &PySystemParams, n: f64) -> PyResult<Py<PyAny>> {
    let sol = steadystate::solution_for(&params.inner, n).map_err(err)?;
    to_py(py, &dynamics::stability(&params.inner, &sol).map_err(err)?)
}

#[pymodule]
fn bistab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(photon_numbers, m)?)?;
    m.add_function(wrap_pyfunction!(steady_states, m)?)?;
    m.add_function(wrap_pyfunction!(two_mode_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(solution_counts, m)?)?;
    m.add_function(wrap_pyfunction!(zero_phase_curve, m)?)?;
    m.add_function(wrap_pyfunction!(boundaries, m)?)?;
    m.add_function(wrap_pyfunction!(resonant_onset, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(phase_diagram, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
