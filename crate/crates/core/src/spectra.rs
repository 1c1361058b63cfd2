//! Multi-branch spectra over a detuning or pump grid, the zero-phase curve,
//! and quasi-static hysteresis traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubic::{self, Stability};
use crate::dynamics;
use crate::error::{Error, Result};
use crate::params::{derive, SystemParams};
use crate::steadystate::{complex_roots, excited_population, photon_numbers, solution_for};

/// Relative jump between neighbouring samples of one branch above which the
/// interval is refined and, at the finest level, the branch is split.
const JUMP_REL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    DeltaA,
    DeltaCa,
    Pump,
}

impl AxisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisKind::DeltaA => "delta_a",
            AxisKind::DeltaCa => "delta_ca",
            AxisKind::Pump => "pump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "delta_a" => AxisKind::DeltaA,
            "delta_ca" => AxisKind::DeltaCa,
            "pump" => AxisKind::Pump,
            _ => return None,
        })
    }
}

/// What varies along a scan and what is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// x = Δ_a at fixed Δ_ca (a laser-frequency scan).
    DeltaA { delta_ca: f64 },
    /// x = Δ_a at fixed Δ_c.
    DeltaAFixedCavity { delta_c: f64 },
    /// x = Δ_ca at fixed Δ_a.
    DeltaCa { delta_a: f64 },
    /// x = s₁n_η at the detunings stored in the parameters.
    Pump,
}

impl ScanAxis {
    pub fn kind(&self) -> AxisKind {
        match self {
            ScanAxis::DeltaA { .. } | ScanAxis::DeltaAFixedCavity { .. } => AxisKind::DeltaA,
            ScanAxis::DeltaCa { .. } => AxisKind::DeltaCa,
            ScanAxis::Pump => AxisKind::Pump,
        }
    }

    /// Parameters at grid coordinate `x`.
    pub fn params_at(&self, params: &SystemParams, x: f64) -> Result<SystemParams> {
        let mut p = *params;
        match *self {
            ScanAxis::DeltaA { delta_ca } => {
                p.delta_a = x;
                p.delta_c = x - delta_ca;
            }
            ScanAxis::DeltaAFixedCavity { delta_c } => {
                p.delta_a = x;
                p.delta_c = delta_c;
            }
            ScanAxis::DeltaCa { delta_a } => {
                p.delta_a = delta_a;
                p.delta_c = delta_a - x;
            }
            ScanAxis::Pump => {
                let s1 = derive(params)?.s1;
                if s1 == 0.0 {
                    return Err(Error::param("g", "a pump axis in s1*n_eta needs g > 0"));
                }
                if x < 0.0 {
                    return Err(Error::InvalidGrid("pump values must be non-negative".into()));
                }
                p = p.with_pump_photons(x / s1);
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Refine intervals where the root count changes or a branch jumps.
    pub refine: bool,
    pub max_refine_levels: usize,
    /// Evaluate each sample's linear stability (costly).
    pub stability: bool,
    /// Evaluate base grid points in parallel.
    pub parallel: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { refine: true, max_refine_levels: 3, stability: false, parallel: true }
    }
}

const REFINE_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub x: f64,
    pub n: f64,
    pub transmission: f64,
    pub p_excited: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBranch {
    pub axis: AxisKind,
    pub branch_id: usize,
    pub samples: Vec<SpectrumSample>,
    /// The branch is born in a fold (saddle-node) at its first sample.
    pub fold_at_start: bool,
    /// The branch annihilates in a fold after its last sample.
    pub fold_at_end: bool,
}

#[derive(Debug, Clone)]
struct PointRoots {
    x: f64,
    roots: Vec<f64>,
}

fn eval_point(params: &SystemParams, axis: &ScanAxis, x: f64) -> Result<PointRoots> {
    let p = axis.params_at(params, x)?;
    let set = photon_numbers(&p, p.delta_a, p.delta_c)?;
    Ok(PointRoots { x, roots: set.values() })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn jumps(a: &PointRoots, b: &PointRoots) -> bool {
    a.roots.iter().zip(&b.roots).any(|(u, v)| rel_gap(*u, *v) > JUMP_REL)
}

fn needs_refinement(a: &PointRoots, b: &PointRoots) -> bool {
    a.roots.len() != b.roots.len() || jumps(a, b)
}

fn refine(
    params: &SystemParams,
    axis: &ScanAxis,
    a: &PointRoots,
    b: &PointRoots,
    level: usize,
    max_level: usize,
    out: &mut Vec<PointRoots>,
) -> Result<()> {
    if level >= max_level || !needs_refinement(a, b) {
        return Ok(());
    }
    let mut seq = Vec::with_capacity(REFINE_FACTOR + 1);
    seq.push(a.clone());
    for k in 1..REFINE_FACTOR {
        let x = a.x + (b.x - a.x) * k as f64 / REFINE_FACTOR as f64;
        if x > a.x && x < b.x {
            seq.push(eval_point(params, axis, x)?);
        }
    }
    seq.push(b.clone());
    for w in 0..seq.len() - 1 {
        refine(params, axis, &seq[w], &seq[w + 1], level + 1, max_level, out)?;
        if w + 1 < seq.len() - 1 {
            out.push(seq[w + 1].clone());
        }
    }
    Ok(())
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("at least two points are required".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("grid values must be finite".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn evaluate(params: &SystemParams, axis: &ScanAxis, grid: &[f64], opts: &ScanOptions) -> Result<Vec<PointRoots>> {
    let base: Vec<PointRoots> = if opts.parallel {
        grid.par_iter().map(|&x| eval_point(params, axis, x)).collect::<Result<_>>()?
    } else {
        grid.iter().map(|&x| eval_point(params, axis, x)).collect::<Result<_>>()?
    };
    if !opts.refine {
        return Ok(base);
    }
    let mut out = Vec::with_capacity(base.len());
    out.push(base[0].clone());
    for w in base.windows(2) {
        refine(params, axis, &w[0], &w[1], 0, opts.max_refine_levels, &mut out)?;
        out.push(w[1].clone());
    }
    Ok(out)
}

/// Order-preserving matching between `prev` and `next` of size
/// min(len) minimising the summed relative gap. Returns (i_prev, i_next) pairs.
fn match_roots(prev: &[f64], next: &[f64]) -> Vec<(usize, usize)> {
    let (short, long, flipped) = if prev.len() <= next.len() { (prev, next, false) } else { (next, prev, true) };
    let k = short.len();
    let m = long.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    // Choose k of m indices of the longer list, in order.
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let cost: f64 = idx.iter().enumerate().map(|(s, &l)| rel_gap(short[s], long[l])).sum();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, idx.clone()));
        }
        // Next combination.
        let mut i = k;
        loop {
            if i == 0 {
                let chosen = best.map(|(_, v)| v).unwrap_or_default();
                return chosen
                    .into_iter()
                    .enumerate()
                    .map(|(s, l)| if flipped { (l, s) } else { (s, l) })
                    .collect();
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn stitch(points: &[PointRoots], kind: AxisKind) -> Vec<(SpectrumBranch, Vec<f64>)> {
    // Branch samples are filled with observables later; here only (x, n).
    let mut branches: Vec<(SpectrumBranch, Vec<f64>)> = Vec::new();
    let new_branch = |branches: &mut Vec<(SpectrumBranch, Vec<f64>)>, fold: bool| -> usize {
        let id = branches.len();
        branches.push((
            SpectrumBranch { axis: kind, branch_id: id, samples: Vec::new(), fold_at_start: fold, fold_at_end: false },
            Vec::new(),
        ));
        id
    };
    let push = |branches: &mut Vec<(SpectrumBranch, Vec<f64>)>, id: usize, x: f64, n: f64| {
        branches[id].1.push(x);
        branches[id].0.samples.push(SpectrumSample {
            x,
            n,
            transmission: 0.0,
            p_excited: 0.0,
            stability: Stability::Unknown,
        });
    };

    let mut active: Vec<usize> = Vec::new();
    for (pi, pt) in points.iter().enumerate() {
        if pi == 0 {
            for &r in &pt.roots {
                let id = new_branch(&mut branches, false);
                push(&mut branches, id, pt.x, r);
                active.push(id);
            }
            continue;
        }
        let prev = &points[pi - 1];
        let mut next_active = vec![usize::MAX; pt.roots.len()];
        if prev.roots.len() == pt.roots.len() {
            for (i, (&u, &v)) in prev.roots.iter().zip(&pt.roots).enumerate() {
                if pt.roots.len() > 1 && rel_gap(u, v) > JUMP_REL {
                    // Unresolved jump at the finest level: split. A lone
                    // root has nowhere else to go and stays one branch.
                    let id = new_branch(&mut branches, false);
                    next_active[i] = id;
                } else {
                    next_active[i] = active[i];
                }
            }
        } else {
            let pairs = match_roots(&prev.roots, &pt.roots);
            let mut continued = vec![false; prev.roots.len()];
            for &(i, j) in &pairs {
                next_active[j] = active[i];
                continued[i] = true;
            }
            for (i, c) in continued.iter().enumerate() {
                if !c {
                    branches[active[i]].0.fold_at_end = true;
                }
            }
            for slot in next_active.iter_mut() {
                if *slot == usize::MAX {
                    *slot = new_branch(&mut branches, true);
                }
            }
        }
        for (j, &r) in pt.roots.iter().enumerate() {
            push(&mut branches, next_active[j], pt.x, r);
        }
        active = next_active;
    }
    branches
}

/// Multi-branch spectrum over `grid`.
///
/// Each grid point is solved independently. Where the number of roots
/// changes, or a root jumps by more than half its value, the interval is
/// refined ×8 up to `max_refine_levels` times before roots are stitched into
/// branches by order-preserving nearest matching. Roots that vanish end their
/// branch in a fold; new roots start a branch at a fold.
pub fn scan_spectrum(
    params: &SystemParams,
    axis: ScanAxis,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<Vec<SpectrumBranch>> {
    params.validate()?;
    validate_grid(grid)?;
    let points = evaluate(params, &axis, grid, opts)?;
    let stitched = stitch(&points, axis.kind());
    let mut out = Vec::with_capacity(stitched.len());
    for (mut b, _) in stitched {
        if b.samples.is_empty() {
            continue;
        }
        for s in &mut b.samples {
            let p = axis.params_at(params, s.x)?;
            let n_eta = p.n_eta();
            s.transmission = if n_eta > 0.0 { s.n / n_eta } else { 0.0 };
            s.p_excited = excited_population(&p, s.n)?;
            if opts.stability {
                let sol = solution_for(&p, s.n)?;
                s.stability = match dynamics::stability(&p, &sol) {
                    Ok(r) => r.stability,
                    Err(Error::NotStationary { .. }) => Stability::Unknown,
                    Err(e) => return Err(e),
                };
            }
        }
        out.push(b);
    }
    for (i, b) in out.iter_mut().enumerate() {
        b.branch_id = i;
    }
    Ok(out)
}

/// All x values of a spectrum (refined points included), sorted, with the
/// number of roots present at each.
pub fn root_counts(branches: &[SpectrumBranch]) -> Vec<(f64, usize)> {
    let mut xs: Vec<f64> = branches.iter().flat_map(|b| b.samples.iter().map(|s| s.x)).collect();
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in xs {
        match out.last_mut() {
            Some((lx, c)) if *lx == x => *c += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// The largest photon number at each x of a spectrum, with the sample it
/// came from.
pub fn max_branch(branches: &[SpectrumBranch]) -> Vec<SpectrumSample> {
    let mut all: Vec<SpectrumSample> = branches.iter().flat_map(|b| b.samples.iter().copied()).collect();
    all.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.n.total_cmp(&a.n)));
    all.dedup_by(|a, b| a.x == b.x);
    all
}

/// Detuning Δ_ca of zero round-trip phase for given Δ_a:
/// Δ_ca = Δ_a − Ng²Δ_a/(Δ_a² + Γ²/4 + Ω_η²/2).
pub fn zero_phase_curve(params: &SystemParams, delta_a: f64) -> Result<f64> {
    let d = derive(params)?;
    let ng2 = params.n_atoms as f64 * params.g * params.g;
    let den = delta_a * delta_a + 0.25 * params.gamma * params.gamma + 0.5 * d.omega_eta * d.omega_eta;
    Ok(delta_a - ng2 * delta_a / den)
}

/// Positive Δ_a at which the zero-phase curve crosses Δ_ca = 0, i.e.
/// √(Ng² − Γ²/4 − Ω_η²/2); `None` when the radicand is not positive.
pub fn zero_phase_crossing(params: &SystemParams) -> Result<Option<f64>> {
    let d = derive(params)?;
    let ng2 = params.n_atoms as f64 * params.g * params.g;
    // Compared before subtracting so that rounding cannot contradict
    // Ng² ≤ Γ²/4 + Ω_η²/2.
    let width = 0.25 * params.gamma * params.gamma + 0.5 * d.omega_eta * d.omega_eta;
    Ok(if ng2 > width { Some((ng2 - width).sqrt()) } else { None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Root chosen at the first point of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StartHint {
    Lowest,
    Highest,
    Nearest(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisTrace {
    pub direction: Direction,
    /// (x, n) pairs sorted by increasing x regardless of direction.
    pub samples: Vec<(f64, f64)>,
    /// x at which the followed branch had disappeared, in scan order.
    pub jump_points: Vec<f64>,
}

impl HysteresisTrace {
    pub fn n_at(&self, x: f64) -> Option<f64> {
        self.samples
            .binary_search_by(|(sx, _)| sx.total_cmp(&x))
            .ok()
            .map(|i| self.samples[i].1)
    }
}

/// Quasi-static scan along the branches: stay on the followed branch while it
/// exists; when it ends in a fold, jump to the nearest root and record the
/// jump. Branch splits (unresolved steep sections) are crossed without
/// recording a jump.
pub fn branch_follow(branches: &[SpectrumBranch], direction: Direction, start: StartHint) -> HysteresisTrace {
    // (x, branch index, n) sorted by x.
    let mut all: Vec<(f64, usize, f64)> = branches
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| b.samples.iter().map(move |s| (s.x, bi, s.n)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.total_cmp(&b.2)));
    let mut groups: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    for (x, bi, n) in all {
        match groups.last_mut() {
            Some((gx, v)) if *gx == x => v.push((bi, n)),
            _ => groups.push((x, vec![(bi, n)])),
        }
    }
    if direction == Direction::Down {
        groups.reverse();
    }
    let mut samples = Vec::with_capacity(groups.len());
    let mut jump_points = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    for (x, roots) in &groups {
        let chosen = match current {
            None => match start {
                StartHint::Lowest => roots[0],
                StartHint::Highest => *roots.last().expect("non-empty group"),
                StartHint::Nearest(n0) => nearest(roots, n0),
            },
            Some((bi, n_prev)) => {
                if let Some(&hit) = roots.iter().find(|(b, _)| *b == bi) {
                    hit
                } else {
                    let b = &branches[bi];
                    let fold = match direction {
                        Direction::Up => b.fold_at_end,
                        Direction::Down => b.fold_at_start,
                    };
                    if fold {
                        jump_points.push(*x);
                    }
                    nearest(roots, n_prev)
                }
            }
        };
        current = Some(chosen);
        samples.push((*x, chosen.1));
    }
    if direction == Direction::Down {
        samples.reverse();
    }
    HysteresisTrace { direction, samples, jump_points }
}

fn nearest(roots: &[(usize, f64)], n: f64) -> (usize, f64) {
    *roots
        .iter()
        .min_by(|a, b| rel_gap(a.1, n).total_cmp(&rel_gap(b.1, n)))
        .expect("non-empty group")
}

/// S-curve of photon number against s₁n_η at fixed detunings.
pub fn pump_bifurcation(
    params: &SystemParams,
    pump_grid: &[f64],
    delta_a: f64,
    delta_c: f64,
) -> Result<Vec<SpectrumBranch>> {
    let p = params.with_detunings(delta_a, delta_c);
    scan_spectrum(&p, ScanAxis::Pump, pump_grid, &ScanOptions::default())
}

/// Number of solutions at one pump value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCount {
    /// Distinct non-negative real roots.
    pub real: usize,
    /// A complex-conjugate root pair with positive real part is present.
    pub complex_pair: bool,
}

impl SolutionCount {
    /// Real solutions plus one for a complex pair in the right half plane.
    /// Along the resonant S-curve this gives 1 → 2 → 3 → 2 → 1.
    pub fn total(&self) -> usize {
        self.real + usize::from(self.complex_pair)
    }
}

/// Solution counts along a pump grid (values of s₁n_η).
pub fn solution_counts(
    params: &SystemParams,
    pump_grid: &[f64],
    delta_a: f64,
    delta_c: f64,
) -> Result<Vec<SolutionCount>> {
    validate_grid(pump_grid)?;
    let base = params.with_detunings(delta_a, delta_c);
    pump_grid
        .par_iter()
        .map(|&x| {
            let p = ScanAxis::Pump.params_at(&base, x)?;
            let roots = complex_roots(&p, delta_a, delta_c)?;
            let tol = cubic::DEFAULT_TOL;
            let real = cubic::positive_real_roots(&roots, tol).len();
            let complex_pair = roots.iter().any(|z| z.im.abs() > tol * (1.0 + z.re.abs()) && z.re > 0.0);
            Ok(SolutionCount { real, complex_pair })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountTransition {
    /// Midpoint (geometric for positive neighbours) of the two grid points
    /// between which the count changed.
    pub x: f64,
    pub from: usize,
    pub to: usize,
}

pub fn count_transitions(grid: &[f64], counts: &[usize]) -> Vec<CountTransition> {
    grid.windows(2)
        .zip(counts.windows(2))
        .filter(|(_, c)| c[0] != c[1])
        .map(|(x, c)| CountTransition {
            x: if x[0] > 0.0 && x[1] > 0.0 { (x[0] * x[1]).sqrt() } else { 0.5 * (x[0] + x[1]) },
            from: c[0],
            to: c[1],
        })
        .collect()
}
