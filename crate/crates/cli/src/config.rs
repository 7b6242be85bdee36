//! `RunConfig`: the JSON document every config-driven subcommand reads.
//!
//! Parsing never stops at the first problem. Each top-level section is
//! deserialized on its own; unknown keys are reported with the closest known
//! key and stripped so the rest of the section can still be checked.

use std::path::{Path, PathBuf};

use collapse::crystal::CrystalModel;
use collapse::ensemble::{ParamPoint, RunLength, TimeStepping};
use collapse::propagator::{NoiseKind, Scheme};
use collapse::{Grid, PhysicalParams, StateKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u64 = 1;

/// Ratio of the default noise refresh time to the reduction time at the
/// sweep midpoint.
pub const DEFAULT_TAU_FRACTION: f64 = 1.0 / 50.0;

const TOP_LEVEL: &[&str] = &[
    "schema_version",
    "seed",
    "grid",
    "physical_params",
    "initial_state",
    "noise",
    "propagator",
    "sweep",
    "ensemble",
    "crystal",
    "spectrum",
    "limits",
    "output",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema_version: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical_params: Option<PhysicalParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateKind>,
    pub noise: NoiseSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crystal: Option<CrystalModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsSection>,
    pub output: OutputSection,
}

/// Noise of `ξ(t)`. For the piecewise kind, a missing `sigma` defaults to
/// the distance between the outermost components and a missing `tau` to
/// 1/50 of the reduction time at the sweep midpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSection {
    #[default]
    Zero,
    PiecewiseConstantGaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    /// s; defaults to `dt_fraction` times the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
    /// Exactly one of `n_steps` and `duration` (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub record_stride: u64,
    #[serde(default = "yes")]
    pub renormalize: bool,
    #[serde(default = "yes")]
    pub kinetic: bool,
    /// Centres whose Voronoi weights are recorded; defaults to the initial components.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_centers: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub points: Vec<ParamPoint>,
    #[serde(default = "default_sweep_stepping")]
    pub stepping: TimeStepping,
    #[serde(default = "default_records")]
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub points: Vec<ParamPoint>,
    #[serde(default = "default_runs")]
    pub runs_per_point: u64,
    #[serde(default = "default_threshold")]
    pub dominance_threshold: f64,
    #[serde(default = "default_ensemble_stepping")]
    pub stepping: TimeStepping,
    #[serde(default = "yes")]
    pub stop_at_dominance: bool,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// Wavenumbers sampled evenly on `(0, π/a]`.
    #[serde(default = "default_n_k")]
    pub n_k: usize,
    /// Thin-spectrum levels `n = 0..=thin_levels`.
    #[serde(default = "default_thin_levels")]
    pub thin_levels: u64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            n_k: default_n_k(),
            thin_levels: default_thin_levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub n_atoms: Vec<u64>,
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
        }
    }
}

fn default_dt_fraction() -> f64 {
    0.9
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

fn default_sweep_stepping() -> TimeStepping {
    TimeStepping::new(RunLength::SlowTimes(8.0))
}

fn default_records() -> u64 {
    2000
}

fn default_runs() -> u64 {
    2000
}

fn default_threshold() -> f64 {
    0.95
}

fn default_ensemble_stepping() -> TimeStepping {
    TimeStepping::new(RunLength::ReductionTimes(400.0))
}

fn default_bins() -> usize {
    40
}

fn default_n_k() -> usize {
    64
}

fn default_thin_levels() -> u64 {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::validation(format!("not valid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(CliError::validation("the configuration must be a JSON object"));
        };
        let mut errors = Vec::new();
        for key in map.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                errors.push(unknown_key_message(key, key, TOP_LEVEL.iter().copied()));
            }
        }
        let mut config = RunConfig::default();
        match map.remove("schema_version") {
            None => errors.push(format!(
                "schema_version: missing (this build reads version {SCHEMA_VERSION})"
            )),
            Some(v) => match v.as_u64() {
                Some(SCHEMA_VERSION) => config.schema_version = SCHEMA_VERSION,
                _ => errors.push(format!(
                    "schema_version: unsupported value {v} (this build reads version {SCHEMA_VERSION})"
                )),
            },
        }
        config.seed = section(&mut map, "seed", &mut errors).unwrap_or(0);
        config.grid = section(&mut map, "grid", &mut errors);
        config.physical_params = section(&mut map, "physical_params", &mut errors);
        config.initial_state = section(&mut map, "initial_state", &mut errors);
        config.noise = section(&mut map, "noise", &mut errors).unwrap_or_default();
        config.propagator = section(&mut map, "propagator", &mut errors);
        config.sweep = section(&mut map, "sweep", &mut errors);
        config.ensemble = section(&mut map, "ensemble", &mut errors);
        config.crystal = section(&mut map, "crystal", &mut errors);
        config.spectrum = section(&mut map, "spectrum", &mut errors);
        config.limits = section(&mut map, "limits", &mut errors);
        config.output = section(&mut map, "output", &mut errors).unwrap_or_default();
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(CliError::Validation(errors))
        }
    }
}

/// Deserializes `map[key]`, collecting every unknown key and the first
/// structural error.
fn section<T: DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
    errors: &mut Vec<String>,
) -> Option<T> {
    let mut value = map.remove(key)?;
    loop {
        match serde_path_to_error::deserialize::<_, T>(value.clone()) {
            Ok(parsed) => return Some(parsed),
            Err(err) => {
                let path = join_path(key, &err.path().to_string());
                let message = err.inner().to_string();
                if let Some((field, expected)) = parse_unknown(&message, "unknown field") {
                    errors.push(unknown_key_message(
                        &path,
                        &field,
                        expected.iter().map(String::as_str),
                    ));
                    if remove_key(&mut value, err.path(), &field) {
                        continue;
                    }
                    return None;
                }
                if let Some((variant, expected)) = parse_unknown(&message, "unknown variant") {
                    errors.push(unknown_key_message(
                        &path,
                        &variant,
                        expected.iter().map(String::as_str),
                    ));
                    return None;
                }
                errors.push(format!("{path}: {}", strip_position(&message)));
                return None;
            }
        }
    }
}

fn join_path(section: &str, inner: &str) -> String {
    if inner.is_empty() || inner == "." {
        section.to_string()
    } else {
        format!("{section}.{inner}")
    }
}

fn strip_position(message: &str) -> &str {
    match message.find(" at line ") {
        Some(i) => &message[..i],
        None => message,
    }
}

/// Splits serde's "unknown field `x`, expected one of `a`, `b`" message.
fn parse_unknown(message: &str, prefix: &str) -> Option<(String, Vec<String>)> {
    if !message.starts_with(prefix) {
        return None;
    }
    let mut quoted = message.split('`').skip(1).step_by(2).map(str::to_string);
    let name = quoted.next()?;
    Some((name, quoted.collect()))
}

fn unknown_key_message<'a>(
    path: &str,
    name: &str,
    candidates: impl Iterator<Item = &'a str>,
) -> String {
    let best = candidates
        .map(|c| (strsim::jaro_winkler(name, c), c))
        .filter(|(score, _)| *score >= 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, c)) => format!("{path}: unknown key `{name}` (did you mean `{c}`?)"),
        None => format!("{path}: unknown key `{name}`"),
    }
}

/// Removes `field` from the object at `path` (or from the object that holds
/// it, depending on whether the path already names the key).
fn remove_key(value: &mut Value, path: &serde_path_to_error::Path, field: &str) -> bool {
    use serde_path_to_error::Segment;
    let mut node = value;
    for segment in path.iter() {
        node = match segment {
            Segment::Map { key } if key != field && node.get(key.as_str()).is_some() => {
                &mut node[key.as_str()]
            }
            Segment::Seq { index } if node.get(*index).is_some() => &mut node[*index],
            Segment::Seq { .. } => return false,
            _ => node,
        };
    }
    match node {
        Value::Object(map) => map.remove(field).is_some(),
        _ => false,
    }
}

/// Noise kind with defaults resolved against the initial state and the
/// parameter points of a sweep.
pub fn resolve_noise(
    noise: &NoiseSection,
    centers: &[f64],
    points: &[ParamPoint],
    hbar: f64,
) -> Result<NoiseKind, String> {
    match *noise {
        NoiseSection::Zero => Ok(NoiseKind::Zero),
        NoiseSection::PiecewiseConstantGaussian { sigma, tau } => {
            let separation = collapse::ensemble::separation(centers);
            let sigma = match sigma.or(separation) {
                Some(s) => s,
                None => {
                    return Err("noise.sigma: required when the initial state has fewer than \
                                two components"
                        .into())
                }
            };
            let tau = match tau {
                Some(t) => t,
                None => {
                    let x_ref = separation.ok_or(
                        "noise.tau: required when the initial state has fewer than two components",
                    )?;
                    let mid = midpoint(points).ok_or("noise.tau: required without sweep points")?;
                    let params = PhysicalParams::with_hbar(mid.total_mass, mid.omega, hbar)
                        .map_err(|e| format!("noise.tau: {e}"))?;
                    DEFAULT_TAU_FRACTION * params.tau_reduction(x_ref)
                }
            };
            Ok(NoiseKind::PiecewiseConstantGaussian { sigma, tau })
        }
    }
}

/// Centre of the `(Nm, ω)` box spanned by `points`.
pub fn midpoint(points: &[ParamPoint]) -> Option<ParamPoint> {
    if points.is_empty() {
        return None;
    }
    let span = |f: fn(&ParamPoint) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    Some(ParamPoint::new(span(|p| p.total_mass), span(|p| p.omega)))
}

impl From<NoiseKind> for NoiseSection {
    fn from(kind: NoiseKind) -> Self {
        match kind {
            NoiseKind::Zero => NoiseSection::Zero,
            NoiseKind::PiecewiseConstantGaussian { sigma, tau } => {
                NoiseSection::PiecewiseConstantGaussian {
                    sigma: Some(sigma),
                    tau: Some(tau),
                }
            }
        }
    }
}
