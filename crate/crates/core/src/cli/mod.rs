//! Command-line front end of the `bistab` binary.
//!
//! Parameters come from flags and, optionally, a flat `key = value` file
//! (`--config`) whose keys are the long flag names. Flags win over file
//! values. Sweeps run on a rayon pool sized by `--threads` (or
//! `BISTAB_THREADS`); results are assembled by grid index, so output files do
//! not depend on the thread count.

pub mod io;

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::dynamics::{self, Controls, MeanFieldState, RampAxis, RampSpec};
use crate::params::{self, PhysicalInput, Rate, RateUnit, SystemParams};
use crate::phases::{self, DiagramOptions};
use crate::spectra::{self, Direction, ScanAxis, ScanOptions, StartHint};
use crate::steadystate::{self, AtomConfiguration};

pub use io::{Document, Format, Metadata, Output, PopulationMap};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] io::FormatError),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_config() => 3,
            _ => 2,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Units {
    /// Rates in units of κ.
    #[default]
    Kappa,
    Hz,
    RadPerSec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(name = "delta_a")]
    DeltaA,
    #[value(name = "delta_ca")]
    DeltaCa,
    Pump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RampArg {
    #[value(name = "delta_a")]
    DeltaA,
    Pump,
}

/// `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:stop:count, got `{s}`"));
        }
        let f = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
        let count = parts[2].trim().parse::<usize>().map_err(|e| format!("`{}`: {e}", parts[2]))?;
        Ok(Range { start: f(parts[0])?, stop: f(parts[1])?, count })
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub range: Range,
    pub scale: Scale,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let Range { start, stop, count } = self.range;
        if count < 2 {
            return Err(config_err(format!("grid {} needs at least two points", self.range)));
        }
        if !(start.is_finite() && stop.is_finite() && stop > start) {
            return Err(config_err(format!("grid {} must be finite and increasing", self.range)));
        }
        Ok(match self.scale {
            Scale::Linear => (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect(),
            Scale::Log => {
                if start <= 0.0 {
                    return Err(config_err(format!("log grid {} must be positive", self.range)));
                }
                phases::log_grid(start, stop, count)
            }
        })
    }

    fn describe(&self) -> String {
        let s = match self.scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        };
        format!("{} {s}", self.range)
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Single-atom coupling g.
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Collective coupling g√N (needs --natoms).
    #[arg(long = "gN", conflicts_with = "g", allow_negative_numbers = true)]
    pub g_n: Option<f64>,
    /// Atomic polarization decay rate Γ.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Cavity field decay rate κ (must be given with physical units).
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub natoms: Option<u64>,
    /// Pump rate η₊.
    #[arg(long, conflicts_with_all = ["neta", "seta"], allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Pump as empty-cavity photon number n_η = η₊²/κ².
    #[arg(long, conflicts_with = "seta", allow_negative_numbers = true)]
    pub neta: Option<f64>,
    /// Pump as saturation s₁n_η.
    #[arg(long, allow_negative_numbers = true)]
    pub seta: Option<f64>,
    /// Pump rate of the counter-propagating mode.
    #[arg(long = "eta-minus", allow_negative_numbers = true)]
    pub eta_minus: Option<f64>,
    /// Laser-atom detuning Δ_a.
    #[arg(long = "delta-a", allow_negative_numbers = true)]
    pub delta_a: Option<f64>,
    /// Laser-cavity detuning Δ_c.
    #[arg(long = "delta-c", conflicts_with = "delta_ca", allow_negative_numbers = true)]
    pub delta_c: Option<f64>,
    /// Cavity-atom detuning Δ_ca = Δ_a − Δ_c (default 0).
    #[arg(long = "delta-ca", allow_negative_numbers = true)]
    pub delta_ca: Option<f64>,
    /// Unit of all rates and detunings.
    #[arg(long, value_enum, default_value = "kappa")]
    pub units: Units,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; standard output if absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format; inferred from the file extension if absent.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "BISTAB_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Flat `key = value` file of long-flag values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value = "delta_a")]
    pub axis: AxisArg,
    /// Grid as start:stop:count (s₁n_η for the pump axis).
    #[arg(long, allow_hyphen_values = true)]
    pub range: Range,
    /// Default: log for the pump axis, linear otherwise.
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Classify each sample by linear stability.
    #[arg(long)]
    pub stability: bool,
    /// Disable local grid refinement near folds.
    #[arg(long = "no-refine")]
    pub no_refine: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BifurcationArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// s₁n_η grid as start:stop:count.
    #[arg(long, allow_hyphen_values = true, default_value = "100:1e7:2000")]
    pub range: Range,
    #[arg(long, value_enum, default_value = "log")]
    pub scale: Scale,
    #[arg(long)]
    pub stability: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct HysteresisArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value = "delta_a")]
    pub axis: AxisArg,
    #[arg(long, allow_hyphen_values = true)]
    pub range: Range,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    #[arg(long, value_enum, default_value = "both")]
    pub direction: DirectionArg,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DiagramArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Γ/2κ grid.
    #[arg(long = "gamma-range", default_value = "1e-3:1e2:50")]
    pub gamma_range: Range,
    #[arg(long = "gamma-scale", value_enum, default_value = "log")]
    pub gamma_scale: Scale,
    /// n_η grid.
    #[arg(long = "neta-range", default_value = "1:1e7:50")]
    pub neta_range: Range,
    #[arg(long = "neta-scale", value_enum, default_value = "log")]
    pub neta_scale: Scale,
    /// Δ_a samples per cell.
    #[arg(long = "cell-points", default_value_t = phases::DEFAULT_CELL_POINTS)]
    pub cell_points: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BoundariesArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Integration time in 1/κ.
    #[arg(long = "t-end")]
    pub t_end: f64,
    #[arg(long = "sample-interval")]
    pub sample_interval: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Stop once |d/dt| falls below this (after any ramp).
    #[arg(long = "stationary-tol")]
    pub stationary_tol: Option<f64>,
    /// Start from the k-th steady state (ascending n) instead of the ground state.
    #[arg(long = "from-steady-state")]
    pub from_steady_state: Option<usize>,
    #[arg(long = "ramp-axis", value_enum, requires_all = ["ramp_start", "ramp_stop", "ramp_duration"])]
    pub ramp_axis: Option<RampArg>,
    #[arg(long = "ramp-start", allow_negative_numbers = true)]
    pub ramp_start: Option<f64>,
    #[arg(long = "ramp-stop", allow_negative_numbers = true)]
    pub ramp_stop: Option<f64>,
    #[arg(long = "ramp-duration")]
    pub ramp_duration: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Subcommand, Debug, Clone)]
pub enum CommandArgs {
    /// Photon number and transmission along a detuning or pump axis.
    Spectrum(SpectrumArgs),
    /// S-curve of photon number against s₁n_η, with solution-count transitions.
    Bifurcation(BifurcationArgs),
    /// Quasi-static up and down sweeps along the steady-state branches.
    Hysteresis(HysteresisArgs),
    /// Phase labels over (Γ/2κ, n_η).
    PhaseDiagram(DiagramArgs),
    /// Maximum excited population over (Γ/2κ, n_η).
    PopulationMap(DiagramArgs),
    /// Analytic phase boundaries.
    Boundaries(BoundariesArgs),
    /// Time evolution of the homogeneous mean-field equations.
    Dynamics(DynamicsArgs),
}

#[derive(Parser, Debug, Clone)]
#[command(name = "bistab", version, about = "Optical bistability of atoms in a driven ring cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

/// Groups of flags that set the same quantity; a flag from the command line
/// suppresses every file value of its group.
const FLAG_GROUPS: [&[&str]; 3] = [&["g", "gN"], &["eta", "neta", "seta"], &["delta-c", "delta-ca"]];

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(k, _)| k))
}

/// Reads a flat `key = value` file. `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Inserts config-file values as flags right after the subcommand, skipping
/// any key already set (directly or through its group) on the command line.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    if strs.len() < 2 {
        return Ok(args);
    }
    let entries = read_config_file(Path::new(&path))?;

    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(&strs[1])
        .ok_or_else(|| config_err(format!("unknown command `{}`", strs[1])))?;
    let known: BTreeMap<String, bool> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .collect();
    let any_known: HashSet<String> = cmd
        .get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect::<Vec<_>>())
        .collect();
    let given: HashSet<&str> = strs[2..].iter().filter_map(|a| flag_name(a)).collect();
    let group_given = |k: &str| {
        given.contains(k)
            || FLAG_GROUPS
                .iter()
                .any(|g| g.contains(&k) && g.iter().any(|m| given.contains(m)))
    };

    let mut injected = Vec::new();
    for (k, v) in entries {
        if k == "config" {
            return Err(config_err("config files cannot include other config files"));
        }
        let Some(&takes_value) = known.get(&k) else {
            if any_known.contains(&k) {
                continue;
            }
            return Err(config_err(format!("{path}: unknown key `{k}`")));
        };
        if group_given(&k) {
            continue;
        }
        if takes_value {
            injected.push(OsString::from(format!("--{k}={v}")));
        } else {
            match v.as_str() {
                "true" | "yes" | "1" => injected.push(OsString::from(format!("--{k}"))),
                "false" | "no" | "0" => {}
                _ => return Err(config_err(format!("{path}: `{k}` takes true or false"))),
            }
        }
    }
    let mut merged = args[..2].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[2..]);
    Ok(merged)
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: SystemParams,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Spectrum { axis: AxisArg, grid: GridSpec, stability: bool, refine: bool },
    Bifurcation { grid: GridSpec, stability: bool },
    Hysteresis { axis: AxisArg, grid: GridSpec, direction: DirectionArg },
    PhaseDiagram { gamma: GridSpec, n_eta: GridSpec, cell_points: usize },
    PopulationMap { gamma: GridSpec, n_eta: GridSpec, cell_points: usize },
    Boundaries,
    Dynamics {
        t_end: f64,
        controls: Controls,
        ramp: Option<RampSpec>,
        from_steady_state: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Bifurcation { .. } => "bifurcation",
            Command::Hysteresis { .. } => "hysteresis",
            Command::PhaseDiagram { .. } => "phase-diagram",
            Command::PopulationMap { .. } => "population-map",
            Command::Boundaries => "boundaries",
            Command::Dynamics { .. } => "dynamics",
        }
    }
}

impl ParamArgs {
    /// Resolves the flags into κ-normalised parameters.
    pub fn to_params(&self) -> Result<SystemParams, CliError> {
        let n_atoms = self.natoms.unwrap_or(0);
        let g = match (self.g, self.g_n) {
            (Some(g), _) => g,
            (None, Some(gn)) => {
                if n_atoms == 0 {
                    return Err(config_err("--gN needs --natoms so that g and N are both known"));
                }
                gn / (n_atoms as f64).sqrt()
            }
            (None, None) => 0.0,
        };
        let delta_a = self.delta_a.unwrap_or(0.0);
        let delta_c = match self.delta_c {
            Some(dc) => dc,
            None => delta_a - self.delta_ca.unwrap_or(0.0),
        };
        let eta = self.eta.unwrap_or(0.0);
        let mut p = match self.units {
            Units::Kappa => {
                if self.kappa.is_some_and(|k| k != 1.0) {
                    return Err(config_err("with --units kappa the cavity decay rate is 1 by definition"));
                }
                SystemParams {
                    g,
                    gamma: self.gamma.unwrap_or(1.0),
                    kappa: 1.0,
                    n_atoms,
                    eta_plus: eta,
                    eta_minus: self.eta_minus.unwrap_or(0.0),
                    delta_a,
                    delta_c,
                }
            }
            Units::Hz | Units::RadPerSec => {
                let unit = if self.units == Units::Hz { RateUnit::Hz } else { RateUnit::RadPerSec };
                let r = |v: f64| Rate::new(v, unit);
                let kappa = self.kappa.ok_or_else(|| config_err("physical units need --kappa"))?;
                let gamma = self.gamma.ok_or_else(|| config_err("physical units need --gamma"))?;
                params::from_physical(&PhysicalInput {
                    g: r(g),
                    gamma: r(gamma),
                    kappa: r(kappa),
                    n_atoms,
                    eta_plus: r(eta),
                    eta_minus: r(self.eta_minus.unwrap_or(0.0)),
                    delta_a: r(delta_a),
                    delta_c: r(delta_c),
                })?
            }
        };
        if let Some(n) = self.neta {
            if n < 0.0 {
                return Err(config_err("--neta must be non-negative"));
            }
            p = p.with_pump_photons(n);
        }
        if let Some(s) = self.seta {
            let s1 = params::derive(&p)?.s1;
            if s1 == 0.0 || s < 0.0 {
                return Err(config_err("--seta needs g > 0 and a non-negative value"));
            }
            p = p.with_pump_photons(s / s1);
        }
        p.validate()?;
        Ok(p)
    }
}

fn resolve_format(out: &OutputArgs, default: Format) -> Format {
    out.format.unwrap_or_else(|| {
        match out.output.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            _ => default,
        }
    })
}

fn default_scale(axis: AxisArg, scale: Option<Scale>) -> Scale {
    scale.unwrap_or(if axis == AxisArg::Pump { Scale::Log } else { Scale::Linear })
}

impl RunConfig {
    /// Parses a full argument vector (program name first), merging any
    /// `--config` file.
    pub fn from_args<I, T>(args: I) -> Result<RunConfig, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
        let cli = Cli::try_parse_from(merge_config(args)?).map_err(|e| config_err(e.to_string()))?;
        RunConfig::from_cli(cli)
    }

    pub fn from_cli(cli: Cli) -> Result<RunConfig, CliError> {
        let is_diagram = matches!(cli.command, CommandArgs::PhaseDiagram(_));
        let (command, pa, out, default_format) = match cli.command {
            CommandArgs::Spectrum(a) => {
                let grid = GridSpec { range: a.range, scale: default_scale(a.axis, a.scale) };
                let c = Command::Spectrum { axis: a.axis, grid, stability: a.stability, refine: !a.no_refine };
                (c, a.params, a.out, Format::Csv)
            }
            CommandArgs::Bifurcation(a) => {
                let grid = GridSpec { range: a.range, scale: a.scale };
                (Command::Bifurcation { grid, stability: a.stability }, a.params, a.out, Format::Csv)
            }
            CommandArgs::Hysteresis(a) => {
                let grid = GridSpec { range: a.range, scale: default_scale(a.axis, a.scale) };
                let c = Command::Hysteresis { axis: a.axis, grid, direction: a.direction };
                (c, a.params, a.out, Format::Csv)
            }
            CommandArgs::PhaseDiagram(a) | CommandArgs::PopulationMap(a) => {
                let gamma = GridSpec { range: a.gamma_range, scale: a.gamma_scale };
                let n_eta = GridSpec { range: a.neta_range, scale: a.neta_scale };
                if a.params.natoms.is_none() || (a.params.g.is_none() && a.params.g_n.is_none()) {
                    return Err(config_err("phase diagrams need the atom number and a coupling (--g or --gN)"));
                }
                let c = if is_diagram {
                    Command::PhaseDiagram { gamma, n_eta, cell_points: a.cell_points }
                } else {
                    Command::PopulationMap { gamma, n_eta, cell_points: a.cell_points }
                };
                (c, a.params, a.out, Format::Csv)
            }
            CommandArgs::Boundaries(a) => {
                if a.params.natoms.is_none() {
                    return Err(config_err("boundaries need --natoms"));
                }
                (Command::Boundaries, a.params, a.out, Format::Json)
            }
            CommandArgs::Dynamics(a) => {
                let ramp = match a.ramp_axis {
                    None => None,
                    Some(axis) => Some(RampSpec {
                        axis: match axis {
                            RampArg::DeltaA => RampAxis::DeltaA,
                            RampArg::Pump => RampAxis::Pump,
                        },
                        start: a.ramp_start.unwrap_or_default(),
                        stop: a.ramp_stop.unwrap_or_default(),
                        duration: a.ramp_duration.unwrap_or_default(),
                    }),
                };
                let controls = Controls {
                    rtol: a.rtol,
                    atol: a.atol,
                    sample_interval: a.sample_interval,
                    stationary_tol: a.stationary_tol,
                    ..Controls::default()
                };
                let c = Command::Dynamics { t_end: a.t_end, controls, ramp, from_steady_state: a.from_steady_state };
                (c, a.params, a.out, Format::Csv)
            }
        };
        let params = pa.to_params()?;
        Ok(RunConfig {
            command,
            params,
            format: resolve_format(&out, default_format),
            output: out.output,
            threads: out.threads,
        })
    }
}

fn scan_axis(axis: AxisArg, p: &SystemParams) -> ScanAxis {
    match axis {
        AxisArg::DeltaA => ScanAxis::DeltaA { delta_ca: p.delta_ca() },
        AxisArg::DeltaCa => ScanAxis::DeltaCa { delta_a: p.delta_a },
        AxisArg::Pump => ScanAxis::Pump,
    }
}

/// Computes the document for a configuration on the current rayon pool.
pub fn compute(config: &RunConfig) -> Result<Document, CliError> {
    let p = &config.params;
    let mut settings = BTreeMap::new();
    let output = match &config.command {
        Command::Spectrum { axis, grid, stability, refine } => {
            let ax = scan_axis(*axis, p);
            settings.insert("axis".into(), ax.kind().as_str().into());
            settings.insert("grid".into(), grid.describe());
            settings.insert("refine".into(), refine.to_string());
            let opts = ScanOptions { refine: *refine, stability: *stability, ..ScanOptions::default() };
            Output::Spectrum(spectra::scan_spectrum(p, ax, &grid.points()?, &opts)?)
        }
        Command::Bifurcation { grid, stability } => {
            let points = grid.points()?;
            settings.insert("axis".into(), "pump".into());
            settings.insert("grid".into(), grid.describe());
            let counts = spectra::solution_counts(p, &points, p.delta_a, p.delta_c)?;
            let totals: Vec<usize> = counts.iter().map(|c| c.total()).collect();
            let transitions = spectra::count_transitions(&points, &totals)
                .iter()
                .map(|t| format!("{}->{}@{:e}", t.from, t.to, t.x))
                .collect::<Vec<_>>();
            settings.insert("transitions".into(), transitions.join(" "));
            let opts = ScanOptions { stability: *stability, ..ScanOptions::default() };
            Output::Spectrum(spectra::scan_spectrum(p, ScanAxis::Pump, &points, &opts)?)
        }
        Command::Hysteresis { axis, grid, direction } => {
            let ax = scan_axis(*axis, p);
            settings.insert("axis".into(), ax.kind().as_str().into());
            settings.insert("grid".into(), grid.describe());
            let branches = spectra::scan_spectrum(p, ax, &grid.points()?, &ScanOptions::default())?;
            let mut traces = Vec::new();
            if *direction != DirectionArg::Down {
                traces.push(spectra::branch_follow(&branches, Direction::Up, StartHint::Lowest));
            }
            if *direction != DirectionArg::Up {
                traces.push(spectra::branch_follow(&branches, Direction::Down, StartHint::Lowest));
            }
            Output::Hysteresis(traces)
        }
        Command::PhaseDiagram { gamma, n_eta, cell_points } | Command::PopulationMap { gamma, n_eta, cell_points } => {
            settings.insert("gamma_over_2kappa".into(), gamma.describe());
            settings.insert("n_eta".into(), n_eta.describe());
            settings.insert("cell_points".into(), cell_points.to_string());
            let opts = DiagramOptions { cell_points: *cell_points, ..DiagramOptions::default() };
            let (hs, es) = (gamma.points()?, n_eta.points()?);
            let d = phases::phase_diagram(p, &hs, &es, &opts)?;
            if matches!(config.command, Command::PhaseDiagram { .. }) {
                Output::PhaseDiagram(d)
            } else {
                let values = d.cells.chunks(es.len()).map(|r| r.iter().map(|c| c.max_population).collect()).collect();
                Output::PopulationMap(PopulationMap { gamma_over_2kappa: hs, n_eta: es, values })
            }
        }
        Command::Boundaries => Output::Boundaries(phases::boundaries(p)?),
        Command::Dynamics { t_end, controls, ramp, from_steady_state } => {
            let config = AtomConfiguration::Homogeneous;
            let start = match from_steady_state {
                None => MeanFieldState::ground(&config),
                Some(k) => {
                    let start_params = dynamics::params_at(p, ramp.as_ref(), 0.0);
                    let states = steadystate::steady_states(&start_params)?;
                    let s = states
                        .get(*k)
                        .ok_or_else(|| config_err(format!("only {} steady states exist", states.len())))?;
                    MeanFieldState::from_steady_state(s)
                }
            };
            settings.insert("t_end".into(), t_end.to_string());
            if let Some(r) = ramp {
                settings.insert("ramp".into(), serde_json::to_string(r).expect("plain data"));
            }
            settings.insert("controls".into(), serde_json::to_string(controls).expect("plain data"));
            Output::Trajectory(dynamics::integrate(&start, p, &config, ramp.as_ref(), *t_end, controls)?)
        }
    };
    let meta = Metadata {
        tool: "bistab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: config.command.name().into(),
        params: *p,
        derived: params::derive(p).ok(),
        settings,
    };
    Ok(Document { meta, output })
}

/// Reads a document back from disk.
pub fn read_output(path: &Path) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), source: e })?;
    Ok(io::parse(&text)?)
}

/// Runs a configuration: computes on a pool of `threads` workers and writes
/// the output. Timing goes to `<output>.run.json` so the data file itself
/// stays reproducible.
pub fn run(config: &RunConfig) -> Result<Document, CliError> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    let doc = pool.install(|| compute(config))?;
    let text = io::render(&doc, config.format)?;
    let wall = started.elapsed().as_secs_f64();
    match &config.output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            let mut side = path.clone().into_os_string();
            side.push(".run.json");
            let info = serde_json::json!({
                "command": config.command.name(),
                "threads": pool.current_num_threads(),
                "wall_seconds": wall,
            });
            let side = PathBuf::from(side);
            std::fs::write(&side, info.to_string() + "\n").map_err(|e| CliError::Io { path: side, source: e })?;
        }
        None => {
            print!("{text}");
            eprintln!("{}: {:.3} s, threads = {}", config.command.name(), wall, pool.current_num_threads());
        }
    }
    Ok(doc)
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // Help and version requests are not errors.
    if let Err(e) = Cli::try_parse_from(&args) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            let _ = e.print();
            return 0;
        }
    }
    let result = RunConfig::from_args(args).and_then(|c| run(&c));
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("bistab: {e}");
            e.exit_code()
        }
    }
}
