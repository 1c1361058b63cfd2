//! Output documents: a `#`-prefixed metadata header followed by one result
//! table (CSV), or the same content as a single JSON object.
//!
//! Floats are written with 17 significant digits so that every file parses
//! back to bit-identical values.

use std::collections::BTreeMap;

use clap::ValueEnum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cubic::Stability;
use crate::dynamics::{MeanFieldState, Trajectory};
use crate::params::{DerivedParams, SystemParams};
use crate::phases::{PhaseBoundaries, PhaseCell, PhaseDiagram, PhaseLabel};
use crate::spectra::{AxisKind, Direction, HysteresisTrace, SpectrumBranch, SpectrumSample};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed file: {0}")]
    Malformed(String),
}

type Result<T> = std::result::Result<T, FormatError>;

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything needed to reproduce a run. Wall time is deliberately absent so
/// that identical runs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: SystemParams,
    pub derived: Option<DerivedParams>,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

/// Max excited population per diagram cell, `values[i][j]` for
/// (gamma_over_2kappa[i], n_eta[j]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMap {
    pub gamma_over_2kappa: Vec<f64>,
    pub n_eta: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Output {
    Spectrum(Vec<SpectrumBranch>),
    Hysteresis(Vec<HysteresisTrace>),
    PhaseDiagram(PhaseDiagram),
    PopulationMap(PopulationMap),
    Boundaries(PhaseBoundaries),
    Trajectory(Trajectory),
}

impl Output {
    pub fn kind(&self) -> &'static str {
        match self {
            Output::Spectrum(_) => "spectrum",
            Output::Hysteresis(_) => "hysteresis",
            Output::PhaseDiagram(_) => "phase_diagram",
            Output::PopulationMap(_) => "population_map",
            Output::Boundaries(_) => "boundaries",
            Output::Trajectory(_) => "trajectory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub meta: Metadata,
    pub output: Output,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => out.push((prefix.to_string(), v.to_string())),
    }
}

fn unflatten(pairs: &[(String, Value)]) -> Value {
    let mut root = Map::new();
    for (key, v) in pairs {
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("metadata keys form a tree");
        }
        node.insert(parts[parts.len() - 1].to_string(), v.clone());
    }
    Value::Object(root)
}

pub fn render(doc: &Document, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(doc)? + "\n"),
        Format::Csv => render_csv(doc),
    }
}

fn render_csv(doc: &Document) -> Result<String> {
    let mut head = vec![("kind".to_string(), Value::from(doc.output.kind()).to_string())];
    flatten("", &serde_json::to_value(&doc.meta)?, &mut head);
    if let Output::Trajectory(t) = &doc.output {
        let extra = serde_json::json!({
            "stationary_at": t.stationary_at,
            "steps": t.steps,
            "rejected": t.rejected,
        });
        flatten("result", &extra, &mut head);
    }
    let mut text = String::new();
    for (k, v) in head {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    match &doc.output {
        Output::Spectrum(branches) => {
            w.write_record([
                "x",
                "branch_id",
                "n",
                "T",
                "p_excited",
                "stability",
                "fold_at_start",
                "fold_at_end",
            ])?;
            for b in branches {
                for s in &b.samples {
                    w.write_record([
                        num(s.x),
                        b.branch_id.to_string(),
                        num(s.n),
                        num(s.transmission),
                        num(s.p_excited),
                        s.stability.as_str().to_string(),
                        b.fold_at_start.to_string(),
                        b.fold_at_end.to_string(),
                    ])?;
                }
            }
        }
        Output::Hysteresis(traces) => {
            w.write_record(["trace", "direction", "record", "x", "n"])?;
            for (i, t) in traces.iter().enumerate() {
                let d = t.direction.as_str();
                for &(x, n) in &t.samples {
                    w.write_record([i.to_string(), d.into(), "sample".into(), num(x), num(n)])?;
                }
                for &x in &t.jump_points {
                    w.write_record([i.to_string(), d.into(), "jump".into(), num(x), String::new()])?;
                }
            }
        }
        Output::PhaseDiagram(d) => {
            w.write_record([
                "gamma_over_2kappa",
                "n_eta",
                "phase",
                "max_population",
                "flagged",
                "max_roots",
                "multi_root_points",
            ])?;
            for (i, &h) in d.gamma_over_2kappa.iter().enumerate() {
                for (j, &e) in d.n_eta.iter().enumerate() {
                    let c = d.cell(i, j);
                    w.write_record([
                        num(h),
                        num(e),
                        c.label.as_str().to_string(),
                        num(c.max_population),
                        c.flagged.to_string(),
                        c.max_roots.to_string(),
                        c.multi_root_points.to_string(),
                    ])?;
                }
            }
        }
        Output::PopulationMap(m) => {
            w.write_record(["gamma_over_2kappa", "n_eta", "max_population"])?;
            for (i, &h) in m.gamma_over_2kappa.iter().enumerate() {
                for (j, &e) in m.n_eta.iter().enumerate() {
                    w.write_record([num(h), num(e), num(m.values[i][j])])?;
                }
            }
        }
        Output::Boundaries(b) => {
            w.write_record(["name", "value"])?;
            if let Value::Object(m) = serde_json::to_value(b)? {
                for (k, v) in m {
                    let v = v.as_f64().map(num).unwrap_or_default();
                    w.write_record([k, v])?;
                }
            }
        }
        Output::Trajectory(t) => {
            w.write_record([
                "t",
                "re_sigma_minus",
                "im_sigma_minus",
                "sigma_z",
                "re_alpha_plus",
                "im_alpha_plus",
                "re_alpha_minus",
                "im_alpha_minus",
                "n",
                "p_excited",
            ])?;
            for (&time, s) in t.times.iter().zip(&t.states) {
                if s.sigma_minus.len() != 1 || s.sigma_z.len() != 1 {
                    return Err(bad("CSV trajectories hold one collective atom; use JSON"));
                }
                w.write_record([
                    num(time),
                    num(s.sigma_minus[0].re),
                    num(s.sigma_minus[0].im),
                    num(s.sigma_z[0]),
                    num(s.alpha_plus.re),
                    num(s.alpha_plus.im),
                    num(s.alpha_minus.re),
                    num(s.alpha_minus.im),
                    num(s.photon_number()),
                    num(s.p_excited()),
                ])?;
            }
        }
    }
    let body = w.into_inner().map_err(|e| bad(e.to_string()))?;
    text.push_str(&String::from_utf8(body).map_err(|e| bad(e.to_string()))?);
    Ok(text)
}

/// Parses a document written by [`render`] in either format.
pub fn parse(text: &str) -> Result<Document> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        parse_csv(text)
    }
}

fn field<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Result<T> {
    let s = r.get(i).ok_or_else(|| bad(format!("missing column {i}")))?;
    s.parse().map_err(|_| bad(format!("cannot parse `{s}` in column {i}")))
}

fn parse_bool(r: &csv::StringRecord, i: usize) -> Result<bool> {
    field(r, i)
}

fn parse_csv(text: &str) -> Result<Document> {
    let mut meta_pairs = Vec::new();
    let mut result = Map::new();
    let mut kind = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let (k, v) = line[1..]
            .trim()
            .split_once(" = ")
            .ok_or_else(|| bad(format!("bad header line `{line}`")))?;
        let v: Value = serde_json::from_str(v)?;
        if k == "kind" {
            kind = v.as_str().map(str::to_string);
        } else if let Some(r) = k.strip_prefix("result.") {
            result.insert(r.to_string(), v);
        } else {
            meta_pairs.push((k.to_string(), v));
        }
    }
    let meta: Metadata = serde_json::from_value(unflatten(&meta_pairs))?;
    let kind = kind.ok_or_else(|| bad("header lacks `kind`"))?;

    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().collect::<std::result::Result<_, _>>()?;

    let output = match kind.as_str() {
        "spectrum" => {
            let axis = meta
                .settings
                .get("axis")
                .and_then(|a| AxisKind::parse(a))
                .ok_or_else(|| bad("spectrum header lacks a valid `settings.axis`"))?;
            let mut branches: Vec<SpectrumBranch> = Vec::new();
            for r in &rows {
                let id: usize = field(r, 1)?;
                if branches.last().map_or(true, |b| b.branch_id != id) {
                    branches.push(SpectrumBranch {
                        axis,
                        branch_id: id,
                        samples: Vec::new(),
                        fold_at_start: parse_bool(r, 6)?,
                        fold_at_end: parse_bool(r, 7)?,
                    });
                }
                let stability = r.get(5).and_then(Stability::parse).ok_or_else(|| bad("bad stability"))?;
                branches.last_mut().expect("pushed above").samples.push(SpectrumSample {
                    x: field(r, 0)?,
                    n: field(r, 2)?,
                    transmission: field(r, 3)?,
                    p_excited: field(r, 4)?,
                    stability,
                });
            }
            Output::Spectrum(branches)
        }
        "hysteresis" => {
            let mut traces: Vec<HysteresisTrace> = Vec::new();
            let mut ids: Vec<usize> = Vec::new();
            for r in &rows {
                let id: usize = field(r, 0)?;
                if ids.last() != Some(&id) {
                    let direction = match r.get(1) {
                        Some("up") => Direction::Up,
                        Some("down") => Direction::Down,
                        _ => return Err(bad("bad direction")),
                    };
                    traces.push(HysteresisTrace { direction, samples: Vec::new(), jump_points: Vec::new() });
                    ids.push(id);
                }
                let t = traces.last_mut().expect("pushed above");
                match r.get(2) {
                    Some("sample") => t.samples.push((field(r, 3)?, field(r, 4)?)),
                    Some("jump") => t.jump_points.push(field(r, 3)?),
                    _ => return Err(bad("bad record type")),
                }
            }
            Output::Hysteresis(traces)
        }
        "phase_diagram" | "population_map" => {
            let mut gammas: Vec<f64> = Vec::new();
            let mut etas: Vec<f64> = Vec::new();
            for r in &rows {
                let h: f64 = field(r, 0)?;
                if gammas.last() != Some(&h) {
                    gammas.push(h);
                }
                if gammas.len() == 1 {
                    etas.push(field(r, 1)?);
                }
            }
            if gammas.len() * etas.len() != rows.len() {
                return Err(bad("grid rows do not form a rectangle"));
            }
            if kind == "phase_diagram" {
                let cells = rows
                    .iter()
                    .map(|r| {
                        Ok(PhaseCell {
                            label: r.get(2).and_then(PhaseLabel::parse).ok_or_else(|| bad("bad phase label"))?,
                            max_population: field(r, 3)?,
                            flagged: parse_bool(r, 4)?,
                            max_roots: field(r, 5)?,
                            multi_root_points: field(r, 6)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Output::PhaseDiagram(PhaseDiagram {
                    g: meta.params.g,
                    n_atoms: meta.params.n_atoms,
                    kappa: meta.params.kappa,
                    gamma_over_2kappa: gammas,
                    n_eta: etas,
                    cells,
                })
            } else {
                let flat = rows.iter().map(|r| field(r, 2)).collect::<Result<Vec<f64>>>()?;
                let values = flat.chunks(etas.len().max(1)).map(<[f64]>::to_vec).collect();
                Output::PopulationMap(PopulationMap { gamma_over_2kappa: gammas, n_eta: etas, values })
            }
        }
        "boundaries" => {
            let mut m = Map::new();
            for r in &rows {
                let name = r.get(0).ok_or_else(|| bad("missing name"))?.to_string();
                let v = match r.get(1) {
                    Some("") | None => Value::Null,
                    Some(_) => Value::from(field::<f64>(r, 1)?),
                };
                m.insert(name, v);
            }
            Output::Boundaries(serde_json::from_value(Value::Object(m))?)
        }
        "trajectory" => {
            let mut times = Vec::with_capacity(rows.len());
            let mut states = Vec::with_capacity(rows.len());
            for r in &rows {
                times.push(field(r, 0)?);
                states.push(MeanFieldState {
                    sigma_minus: vec![Complex64::new(field(r, 1)?, field(r, 2)?)],
                    sigma_z: vec![field(r, 3)?],
                    alpha_plus: Complex64::new(field(r, 4)?, field(r, 5)?),
                    alpha_minus: Complex64::new(field(r, 6)?, field(r, 7)?),
                });
            }
            let get = |k: &str| result.get(k).cloned().unwrap_or(Value::Null);
            Output::Trajectory(Trajectory {
                times,
                states,
                stationary_at: serde_json::from_value(get("stationary_at"))?,
                steps: serde_json::from_value(get("steps"))?,
                rejected: serde_json::from_value(get("rejected"))?,
            })
        }
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    Ok(Document { meta, output })
}
