//! Phase boundaries, spectrum classification and phase diagrams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{derive, SystemParams};
use crate::spectra::{max_branch, root_counts, scan_spectrum, ScanAxis, ScanOptions, SpectrumBranch};
use crate::cubic;
use crate::steadystate::{complex_roots, photon_numbers};

/// A dip below this fraction of the lower neighbouring peak makes a spectrum
/// normal-mode shaped.
pub const DIP_FRACTION: f64 = 0.5;
/// Default number of Δ_a points per diagram cell.
pub const DEFAULT_CELL_POINTS: usize = 2001;

const AMBIGUITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    NMU,
    NMBW,
    NMBC,
    NMBWC,
    ECBC,
    ECU,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 6] = [
        PhaseLabel::NMU,
        PhaseLabel::NMBW,
        PhaseLabel::NMBC,
        PhaseLabel::NMBWC,
        PhaseLabel::ECBC,
        PhaseLabel::ECU,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::NMU => "NMU",
            PhaseLabel::NMBW => "NMBW",
            PhaseLabel::NMBC => "NMBC",
            PhaseLabel::NMBWC => "NMBWC",
            PhaseLabel::ECBC => "ECBC",
            PhaseLabel::ECU => "ECU",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PhaseLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn is_bistable(&self) -> bool {
        !matches!(self, PhaseLabel::NMU | PhaseLabel::ECU)
    }

    /// Position along increasing pump; used to break classification ties.
    fn pump_rank(&self) -> u8 {
        match self {
            PhaseLabel::NMU => 0,
            PhaseLabel::NMBW | PhaseLabel::NMBC => 1,
            PhaseLabel::NMBWC => 2,
            PhaseLabel::ECBC => 3,
            PhaseLabel::ECU => 4,
        }
    }
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Analytic phase boundaries. `None` marks a boundary that does not exist
/// for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    /// NΓ(1 + √3/2)/(2κ): lower pump bound of on-resonance bistability.
    pub center_onset_n_eta: Option<f64>,
    /// (4√N/(3√3))(κ + Γ/2)³/(gκ²): onset of off-resonance bistability.
    pub wing_onset_n_eta: Option<f64>,
    /// N(κ + 2Γ)/(2κ), empirical: normal modes merge into an empty-cavity
    /// shaped spectrum.
    pub merge_n_eta: Option<f64>,
    /// N²g²/(8κ²): upper pump bound of three resonant solutions.
    pub max_three_n_eta: Option<f64>,
    /// Υ_N²/8: upper bound of the resonant multi-solution window in s₁n_η.
    pub max_two_s_eta: Option<f64>,
    /// Υ_N(1 + √3/2): lower bound of resonant three-solution window in s₁n_η.
    pub min_center_s_eta: Option<f64>,
    /// Pump photon number at which the zero-phase extrema merge,
    /// (Ng² − Γ²/4)/(2g²).
    pub peak_merge_pump: Option<f64>,
}

fn require_coupled(params: &SystemParams) -> Result<()> {
    params.validate()?;
    if params.n_atoms == 0 {
        return Err(Error::param("n_atoms", "at least one atom is required"));
    }
    if params.g == 0.0 {
        return Err(Error::param("g", "must be positive"));
    }
    Ok(())
}

pub fn boundaries(params: &SystemParams) -> Result<PhaseBoundaries> {
    require_coupled(params)?;
    let d = derive(params)?;
    let n = params.n_atoms as f64;
    let (g, gamma, kappa) = (params.g, params.gamma, params.kappa);
    let half_root3 = 3f64.sqrt() / 2.0;
    let center_possible = d.upsilon_n > 8.0 + 4.0 * 3f64.sqrt();
    let center = |v: f64| if center_possible { Some(v) } else { None };
    let ng2 = n * g * g;
    let merge_rad = ng2 - 0.25 * gamma * gamma;
    Ok(PhaseBoundaries {
        center_onset_n_eta: center(n * gamma * (1.0 + half_root3) / (2.0 * kappa)),
        wing_onset_n_eta: Some(
            4.0 * n.sqrt() / (3.0 * 3f64.sqrt()) * (kappa + gamma / 2.0).powi(3) / (g * kappa * kappa),
        ),
        merge_n_eta: Some(n * (kappa + 2.0 * gamma) / (2.0 * kappa)),
        max_three_n_eta: center(n * n * g * g / (8.0 * kappa * kappa)),
        max_two_s_eta: center(d.upsilon_n * d.upsilon_n / 8.0),
        min_center_s_eta: center(d.upsilon_n * (1.0 + half_root3)),
        peak_merge_pump: if merge_rad > 0.0 { Some(merge_rad / (2.0 * g * g)) } else { None },
    })
}

/// Solutions at Δ_a = Δ_c = 0, counted as in [`crate::spectra::SolutionCount`]:
/// distinct non-negative real roots plus one for a complex pair with
/// positive real part.
pub fn resonant_root_count(params: &SystemParams) -> Result<usize> {
    let real = photon_numbers(params, 0.0, 0.0)?.len();
    let tol = cubic::DEFAULT_TOL;
    let pair = complex_roots(params, 0.0, 0.0)?
        .iter()
        .any(|z| z.im.abs() > tol * (1.0 + z.re.abs()) && z.re > 0.0);
    Ok(real + usize::from(pair))
}

/// The degenerate point at which resonant bistability first appears:
/// NΥ = 16, n_η = 27/s₁, with the triple root at n = 3/s₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantOnset {
    pub n_atoms: f64,
    pub n_eta: f64,
    pub n_triple: f64,
}

pub fn resonant_onset(params: &SystemParams) -> Result<ResonantOnset> {
    params.validate()?;
    if params.g == 0.0 {
        return Err(Error::param("g", "must be positive"));
    }
    let d = derive(params)?;
    Ok(ResonantOnset { n_atoms: 16.0 / d.upsilon, n_eta: 27.0 / d.s1, n_triple: 3.0 / d.s1 })
}

/// Half-width in Δ_a of the on-resonance bistable window at Δ_c = 0,
/// (Γ/4)√(s_η − Υ_N); zero below threshold.
pub fn bistable_width(params: &SystemParams) -> Result<f64> {
    let d = derive(params)?;
    if d.s_eta <= d.upsilon_n {
        return Ok(0.0);
    }
    Ok(0.25 * params.gamma * (d.s_eta - d.upsilon_n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: PhaseLabel,
    /// A decision sat exactly on a classifier threshold.
    pub flagged: bool,
    pub center: bool,
    pub wing: bool,
    pub normal_mode_shape: bool,
}

fn label_of(nm: bool, center: bool, wing: bool) -> (PhaseLabel, bool) {
    match (nm, center, wing) {
        (true, false, false) => (PhaseLabel::NMU, false),
        (true, false, true) => (PhaseLabel::NMBW, false),
        (true, true, false) => (PhaseLabel::NMBC, false),
        (true, true, true) => (PhaseLabel::NMBWC, false),
        (false, true, _) => (PhaseLabel::ECBC, false),
        (false, false, false) => (PhaseLabel::ECU, false),
        // Empty-cavity shape with only off-center bistability has no label
        // of its own.
        (false, false, true) => (PhaseLabel::NMBW, true),
    }
}

/// Smallest ratio y[k]/min(left peak, right peak) over the curve, where the
/// peaks are interior local maxima on either side of k. Infinity if no pair
/// of peaks brackets any point.
fn deepest_dip(y: &[f64]) -> f64 {
    let m = y.len();
    if m < 3 {
        return f64::INFINITY;
    }
    let is_peak = |i: usize| i > 0 && i + 1 < m && y[i] > y[i - 1] && y[i] >= y[i + 1];
    // Highest peak strictly left of i.
    let mut left = vec![f64::NEG_INFINITY; m];
    for i in 1..m {
        left[i] = if is_peak(i - 1) { left[i - 1].max(y[i - 1]) } else { left[i - 1] };
    }
    let mut right = f64::NEG_INFINITY;
    let mut ratio = f64::INFINITY;
    for i in (0..m).rev() {
        let lower = left[i].min(right);
        if lower > 0.0 && lower.is_finite() {
            ratio = ratio.min(y[i] / lower);
        }
        if is_peak(i) {
            right = right.max(y[i]);
        }
    }
    ratio
}

/// Classifies a Δ_a spectrum taken at Δ_ca = 0 on a grid of spacing
/// `grid_step`.
///
/// Center bistability: a multi-root interval contains Δ_a = 0 or comes
/// within one grid step of it. Wing bistability: any other multi-root
/// interval. Normal-mode shape: the maximum-n curve has two local maxima
/// separated by a dip below half the lower one. Decisions that land exactly
/// on a threshold take the lower-pump label and set `flagged`.
pub fn classify_spectrum(branches: &[SpectrumBranch], grid_step: f64) -> Classification {
    let counts = root_counts(branches);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for (i, &(x, c)) in counts.iter().enumerate() {
        if c >= 2 {
            if open.is_none() {
                open = Some(x);
            }
            let last = i + 1 == counts.len() || counts[i + 1].1 < 2;
            if last {
                intervals.push((open.take().expect("interval open"), x));
            }
        }
    }
    // (center, wing) under both readings of intervals sitting exactly one
    // grid step from Δ_a = 0.
    let mut region_options: Vec<(bool, bool)> = Vec::new();
    let mut region_ambiguous = false;
    for ambiguous_as_center in [true, false] {
        let (mut center, mut wing) = (false, false);
        for &(a, b) in &intervals {
            let dist = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
            let ambiguous = (dist - grid_step).abs() <= AMBIGUITY_EPS * grid_step;
            region_ambiguous |= ambiguous;
            let is_center = if ambiguous { ambiguous_as_center } else { dist <= grid_step };
            if is_center {
                center = true;
            } else {
                wing = true;
            }
        }
        if !region_options.contains(&(center, wing)) {
            region_options.push((center, wing));
        }
    }

    let y: Vec<f64> = max_branch(branches).iter().map(|s| s.n).collect();
    let dip = deepest_dip(&y);
    let nm = dip < DIP_FRACTION;
    let shape_ambiguous = (dip - DIP_FRACTION).abs() <= AMBIGUITY_EPS;
    let shape_options = if shape_ambiguous { vec![true, false] } else { vec![nm] };

    let ambiguous = region_ambiguous || shape_ambiguous;
    let mut best: Option<(PhaseLabel, bool, bool, bool, bool)> = None;
    for &s in &shape_options {
        for &(c, w) in &region_options {
            let (l, odd) = label_of(s, c, w);
            if best.map_or(true, |(b, ..)| l.pump_rank() < b.pump_rank()) {
                best = Some((l, odd, s, c, w));
            }
        }
    }
    let (label, odd, s, c, w) = best.expect("at least one candidate");
    Classification { label, flagged: ambiguous || odd, center: c, wing: w, normal_mode_shape: s }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramOptions {
    /// Δ_a points per cell (odd, so that Δ_a = 0 is sampled).
    pub cell_points: usize,
    /// Half-width of the Δ_a scan; `None` means 2g√N + 4(κ + Γ).
    pub half_span: Option<f64>,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions { cell_points: DEFAULT_CELL_POINTS, half_span: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub label: PhaseLabel,
    pub flagged: bool,
    /// Most roots found at any Δ_a.
    pub max_roots: usize,
    /// Number of Δ_a samples (refined ones included) with at least two roots.
    pub multi_root_points: usize,
    /// Max over Δ_a of the excited population on the maximum-n branch.
    pub max_population: f64,
}

/// Cells are stored with the n_η index running fastest:
/// `cells[i * n_eta.len() + j]` belongs to (gamma_over_2kappa[i], n_eta[j]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub g: f64,
    pub n_atoms: u64,
    pub kappa: f64,
    pub gamma_over_2kappa: Vec<f64>,
    pub n_eta: Vec<f64>,
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_gamma: usize, j_eta: usize) -> &PhaseCell {
        &self.cells[i_gamma * self.n_eta.len() + j_eta]
    }
}

/// Parameters of the diagram cell at Γ/2κ = `h` and pump photon number
/// `n_eta`, with g and N from the template.
pub fn cell_params(template: &SystemParams, h: f64, n_eta: f64) -> SystemParams {
    let mut p = *template;
    p.gamma = 2.0 * template.kappa * h;
    p.delta_a = 0.0;
    p.delta_c = 0.0;
    p.with_pump_photons(n_eta)
}

/// Δ_a grid used for one diagram cell.
pub fn cell_grid(params: &SystemParams, opts: &DiagramOptions) -> Vec<f64> {
    let hs = opts
        .half_span
        .unwrap_or(2.0 * params.g_n() + 4.0 * (params.kappa + params.gamma));
    let m = opts.cell_points;
    (0..m).map(|i| -hs + 2.0 * hs * i as f64 / (m - 1) as f64).collect()
}

/// Scans one cell and classifies it.
pub fn evaluate_cell(params: &SystemParams, opts: &DiagramOptions) -> Result<PhaseCell> {
    let grid = cell_grid(params, opts);
    let step = grid[1] - grid[0];
    let scan = ScanOptions { parallel: false, ..ScanOptions::default() };
    let branches = scan_spectrum(params, ScanAxis::DeltaA { delta_ca: 0.0 }, &grid, &scan)?;
    let class = classify_spectrum(&branches, step);
    let counts = root_counts(&branches);
    let max_population = max_branch(&branches).iter().fold(0.0f64, |m, s| m.max(s.p_excited));
    Ok(PhaseCell {
        label: class.label,
        flagged: class.flagged,
        max_roots: counts.iter().map(|c| c.1).max().unwrap_or(0),
        multi_root_points: counts.iter().filter(|c| c.1 >= 2).count(),
        max_population,
    })
}

fn check_axis(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidGrid(format!("{name} values must be positive and finite")));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Classifies every (Γ/2κ, n_η) cell. Cells are evaluated in parallel on the
/// current rayon pool and assembled by index, so the result does not depend
/// on the thread count.
pub fn phase_diagram(
    template: &SystemParams,
    gamma_grid: &[f64],
    pump_grid: &[f64],
    opts: &DiagramOptions,
) -> Result<PhaseDiagram> {
    require_coupled(template)?;
    check_axis("gamma", gamma_grid)?;
    check_axis("pump", pump_grid)?;
    if opts.cell_points < 3 {
        return Err(Error::InvalidGrid("cells need at least three detuning points".into()));
    }
    let m = pump_grid.len();
    let results: Vec<Result<PhaseCell>> = (0..gamma_grid.len() * m)
        .into_par_iter()
        .map(|k| evaluate_cell(&cell_params(template, gamma_grid[k / m], pump_grid[k % m]), opts))
        .collect();
    // First failure by index, so the reported cell does not depend on scheduling.
    let cells = results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| e.at(format!("gamma/2kappa = {}, n_eta = {}", gamma_grid[k / m], pump_grid[k % m])))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        g: template.g,
        n_atoms: template.n_atoms,
        kappa: template.kappa,
        gamma_over_2kappa: gamma_grid.to_vec(),
        n_eta: pump_grid.to_vec(),
        cells,
    })
}

/// Max excited population per cell; `map[i][j]` for
/// (gamma_grid[i], pump_grid[j]).
pub fn max_population_map(
    template: &SystemParams,
    gamma_grid: &[f64],
    pump_grid: &[f64],
    opts: &DiagramOptions,
) -> Result<Vec<Vec<f64>>> {
    let d = phase_diagram(template, gamma_grid, pump_grid, opts)?;
    Ok(d.cells.chunks(pump_grid.len()).map(|row| row.iter().map(|c| c.max_population).collect()).collect())
}

/// `count` points from `start` to `stop`, evenly spaced in log10.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    let (a, b) = (start.log10(), stop.log10());
    (0..count)
        .map(|i| if count == 1 { start } else { 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64) })
        .collect()
}
