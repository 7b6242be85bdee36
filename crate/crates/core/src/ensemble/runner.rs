use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{dominant_component, half_time_series};
use super::stats::{histogram, percentile_sorted, scaling_fit, Histogram, ScalingFit};
use crate::propagator::{
    EffectiveHamiltonian, NoiseKind, NoiseProcess, Propagator, PropagatorConfig, StabilityBounds,
    BOUNDARY_CELLS, BOUNDARY_MASS_LIMIT,
};
use crate::wavefunction::VoronoiCells;
use crate::{Error, Grid, PhysicalParams, Result, StateKind, WaveFunction, HBAR};

/// Largest tolerated fraction of runs that blow up.
pub const MAX_BLOW_UP_FRACTION: f64 = 0.01;

/// One `(Nm, ω)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamPoint {
    /// kg
    pub total_mass: f64,
    /// s⁻¹
    pub omega: f64,
}

impl ParamPoint {
    pub fn new(total_mass: f64, omega: f64) -> Self {
        ParamPoint { total_mass, omega }
    }

    pub fn params(&self, hbar: f64) -> Result<PhysicalParams> {
        PhysicalParams::with_hbar(self.total_mass, self.omega, hbar)
    }

    /// `Nm·ω²`
    pub fn coupling(&self) -> f64 {
        self.total_mass * self.omega * self.omega
    }

    pub(crate) fn wrap_error(&self, index: usize, source: Error) -> Error {
        Error::AtPoint {
            index,
            total_mass: self.total_mass,
            omega: self.omega,
            source: Box::new(source),
        }
    }
}

/// Run length, either absolute or in units that follow the parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunLength {
    Seconds(f64),
    /// Multiples of `1/ω`.
    SlowTimes(f64),
    /// Multiples of `ħ/(Nmω²·x_ref²)`, `x_ref` the distance between the
    /// outermost component centres.
    ReductionTimes(f64),
}

/// How each parameter point picks its step and run length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepping {
    /// `dt` as a fraction of the tighter stability bound.
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
    pub duration: RunLength,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
}

fn default_dt_fraction() -> f64 {
    0.9
}

fn default_stride() -> u64 {
    1
}

impl TimeStepping {
    pub fn new(duration: RunLength) -> Self {
        TimeStepping {
            dt_fraction: default_dt_fraction(),
            duration,
            record_stride: default_stride(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_fraction > 0.0 && self.dt_fraction <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "dt_fraction",
                reason: format!("must lie in (0, 1], got {}", self.dt_fraction),
            });
        }
        let length = match self.duration {
            RunLength::Seconds(v) | RunLength::SlowTimes(v) | RunLength::ReductionTimes(v) => v,
        };
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("must be positive, got {length}"),
            });
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Step and step count for one parameter point. With a refresh time
    /// `noise_tau` the step divides it exactly, so no step straddles a jump
    /// of `ξ`.
    pub fn resolve(
        &self,
        grid: &Grid,
        params: &PhysicalParams,
        noise_tau: Option<f64>,
        x_ref: Option<f64>,
    ) -> Result<PropagatorConfig> {
        self.validate()?;
        let bound = StabilityBounds::new(grid, params, true).max_dt();
        let mut dt = self.dt_fraction * bound;
        if let Some(tau) = noise_tau {
            dt = tau / (tau / dt).ceil();
        }
        let duration = match self.duration {
            RunLength::Seconds(v) => v,
            RunLength::SlowTimes(v) => v * params.tau_slow(),
            RunLength::ReductionTimes(v) => {
                let x_ref = x_ref.ok_or(Error::InvalidParameter {
                    name: "duration",
                    reason: "reduction_times needs at least two component centres".into(),
                })?;
                v * params.tau_reduction(x_ref)
            }
        };
        if !duration.is_finite() {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: "run length is infinite for omega = 0; give it in seconds".into(),
            });
        }
        let n_steps = (duration / dt).ceil().max(1.0) as u64;
        Ok(PropagatorConfig::new(dt, n_steps).with_stride(self.record_stride))
    }
}

/// Distance between the outermost centres, if there are at least two.
pub fn separation(centers: &[f64]) -> Option<f64> {
    if centers.len() < 2 {
        return None;
    }
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(hi - lo)
}

/// Monte Carlo ensemble over parameter points and noise realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub points: Vec<ParamPoint>,
    pub runs_per_point: u64,
    pub master_seed: u64,
    pub grid: Grid,
    /// Shared by every run; its component centres are the tracked outcomes.
    pub initial: StateKind,
    pub noise: NoiseKind,
    #[serde(default = "default_threshold")]
    pub dominance_threshold: f64,
    pub stepping: TimeStepping,
    /// End a run as soon as a component dominates.
    #[serde(default = "default_true")]
    pub stop_at_dominance: bool,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

fn default_threshold() -> f64 {
    0.95
}

fn default_true() -> bool {
    true
}

fn default_bins() -> usize {
    40
}

fn default_hbar() -> f64 {
    HBAR
}

impl SweepSpec {
    pub fn new(
        points: Vec<ParamPoint>,
        runs_per_point: u64,
        master_seed: u64,
        grid: Grid,
        initial: StateKind,
        noise: NoiseKind,
        stepping: TimeStepping,
    ) -> Self {
        SweepSpec {
            points,
            runs_per_point,
            master_seed,
            grid,
            initial,
            noise,
            dominance_threshold: default_threshold(),
            stepping,
            stop_at_dominance: true,
            histogram_bins: default_bins(),
            hbar: HBAR,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.initial.centers()
    }

    pub fn total_runs(&self) -> usize {
        self.points.len() * self.runs_per_point as usize
    }

    /// Checks everything that does not need a run, including the stability
    /// bound at every point.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyInput("sweep without parameter points"));
        }
        if self.runs_per_point == 0 {
            return Err(Error::InvalidParameter {
                name: "runs_per_point",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.dominance_threshold > 0.5 && self.dominance_threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "dominance_threshold",
                reason: format!("must lie in (0.5, 1), got {}", self.dominance_threshold),
            });
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidParameter {
                name: "histogram_bins",
                reason: "must be at least 1".into(),
            });
        }
        let centers = self.centers();
        if centers.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "initial",
                reason: "an ensemble needs at least two components to track".into(),
            });
        }
        VoronoiCells::new(&centers)?;
        NoiseProcess::new(self.noise, 0)?;
        WaveFunction::new(self.grid, &self.initial)?;
        for (i, point) in self.points.iter().enumerate() {
            self.config_for(point)
                .and_then(|(params, config)| {
                    let ham = EffectiveHamiltonian::noiseless(params);
                    config.validate(&self.grid, &ham)
                })
                .map_err(|e| point.wrap_error(i, e))?;
        }
        Ok(())
    }

    fn config_for(&self, point: &ParamPoint) -> Result<(PhysicalParams, PropagatorConfig)> {
        let params = point.params(self.hbar)?;
        let tau = NoiseProcess::new(self.noise, 0)?.tau();
        let config = self
            .stepping
            .resolve(&self.grid, &params, tau, separation(&self.centers()))?;
        Ok((params, config))
    }
}

/// splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise seed of run `index` (counted across all points) of an ensemble.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub point: usize,
    /// Index within the point.
    pub run: u64,
    pub seed: u64,
    pub total_mass: f64,
    pub omega: f64,
    /// s
    pub dominance_time: Option<f64>,
    pub winner: Option<usize>,
    /// Present only for runs that went the full length and settled.
    pub half_time: Option<f64>,
    /// Component weights at the last record.
    pub final_weights: Vec<f64>,
    pub steps: u64,
    /// s
    pub end_time: f64,
    pub boundary_violation: bool,
    pub blow_up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub total_mass: f64,
    pub omega: f64,
    /// `Nm·ω²`
    pub coupling: f64,
    /// Reduction-time estimate at the component separation, s.
    pub tau_red: f64,
    pub dt: f64,
    pub n_steps: u64,
    pub runs: u64,
    pub dominated: u64,
    /// Runs that ended without a dominant component.
    pub censored: u64,
    pub blow_ups: u64,
    pub boundary_violations: u64,
    /// 5th percentile of the dominance time (censored runs count as infinite).
    pub onset: Option<f64>,
    pub p10: Option<f64>,
    pub median: Option<f64>,
    pub p90: Option<f64>,
    /// `p90 − p10`
    pub width: Option<f64>,
    pub winner_counts: Vec<u64>,
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub records: Vec<RunRecord>,
    pub points: Vec<PointSummary>,
    /// Onset vs `Nm·ω²`, when at least three points have a finite onset.
    pub onset_fit: Option<ScalingFit>,
    /// Width vs `Nm·ω²`, when at least three points have a finite width.
    pub width_fit: Option<ScalingFit>,
    pub total_runs: usize,
    pub blow_ups: usize,
}

impl EnsembleResult {
    pub fn records_at(&self, point: usize) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.point == point)
    }
}

/// Runs every `(point, run)` pair on a pool of `threads` workers (all cores
/// when `None`). Results are assembled in run order, so the output does not
/// depend on the worker count.
pub fn run_ensemble(spec: &SweepSpec, threads: Option<usize>) -> Result<EnsembleResult> {
    run_ensemble_with_progress(spec, threads, &|_, _| {})
}

/// [`run_ensemble`] reporting `(finished, total)` after each run.
pub fn run_ensemble_with_progress(
    spec: &SweepSpec,
    threads: Option<usize>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<EnsembleResult> {
    spec.validate()?;
    let configs = spec
        .points
        .iter()
        .map(|p| spec.config_for(p))
        .collect::<Result<Vec<_>>>()?;
    let total = spec.total_runs();
    let finished = AtomicUsize::new(0);
    let job = |index: usize| -> Result<RunRecord> {
        let point = index / spec.runs_per_point as usize;
        let run = (index % spec.runs_per_point as usize) as u64;
        let (params, config) = configs[point];
        let record = run_one(spec, point, run, index as u64, params, config);
        progress(finished.fetch_add(1, Ordering::Relaxed) + 1, total);
        record
    };
    let records = with_pool(threads, || {
        (0..total).into_par_iter().map(job).collect::<Result<Vec<_>>>()
    })??;

    let blow_ups = records.iter().filter(|r| r.blow_up).count();
    if blow_ups as f64 >= MAX_BLOW_UP_FRACTION * total as f64 && blow_ups > 0 {
        return Err(Error::EnsembleBlowUps {
            failed: blow_ups,
            total,
        });
    }
    let x_ref = separation(&spec.centers()).unwrap_or(0.0);
    let points = spec
        .points
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let (params, config) = configs[i];
            summarize(
                point,
                params.tau_reduction(x_ref),
                &config,
                records.iter().filter(|r| r.point == i),
                spec.centers().len(),
                spec.histogram_bins,
            )
        })
        .collect::<Vec<_>>();
    let fit = |get: fn(&PointSummary) -> Option<f64>| {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| get(p).map(|v| (p.coupling, v)))
            .collect();
        scaling_fit(&pts).ok()
    };
    Ok(EnsembleResult {
        onset_fit: fit(|p| p.onset),
        width_fit: fit(|p| p.width),
        records,
        points,
        total_runs: total,
        blow_ups,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "threads",
            reason: e.to_string(),
        })?;
    Ok(pool.install(f))
}

fn run_one(
    spec: &SweepSpec,
    point: usize,
    run: u64,
    index: u64,
    params: PhysicalParams,
    config: PropagatorConfig,
) -> Result<RunRecord> {
    let seed = run_seed(spec.master_seed, index);
    let noise = NoiseProcess::new(spec.noise, seed)?;
    let centers = spec.centers();
    let cells = VoronoiCells::new(&centers)?;
    let mut psi = WaveFunction::new(spec.grid, &spec.initial)?;
    let mut propagator =
        Propagator::new(spec.grid, EffectiveHamiltonian::new(params, noise), config)?;

    let mut record = RunRecord {
        point,
        run,
        seed,
        total_mass: params.total_mass,
        omega: params.omega,
        dominance_time: None,
        winner: None,
        half_time: None,
        final_weights: vec![0.0; centers.len()],
        steps: 0,
        end_time: 0.0,
        boundary_violation: false,
        blow_up: false,
    };
    let mut times = Vec::new();
    let mut spread = Vec::new();
    let mut weights = vec![0.0; centers.len()];
    let outcome = propagator.run(&mut psi, |sample| {
        weights.iter_mut().for_each(|w| *w = 0.0);
        cells.accumulate(sample.psi.grid(), sample.psi.density(), &mut weights);
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        if !spec.stop_at_dominance {
            times.push(sample.time);
            spread.push(sample.psi.observables().mean_x2);
        }
        if record.dominance_time.is_none() {
            if let Some(winner) = dominant_component(&weights, spec.dominance_threshold) {
                record.dominance_time = Some(sample.time);
                record.winner = Some(winner);
                if spec.stop_at_dominance {
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    });
    match outcome {
        Ok(end) => {
            record.steps = end.steps;
            record.end_time = end.time;
            record.final_weights.copy_from_slice(&weights);
            let edge = psi.boundary_mass(BOUNDARY_CELLS) / psi.norm();
            record.boundary_violation = edge > BOUNDARY_MASS_LIMIT;
            if !end.stopped_early {
                record.half_time = half_time_series(&times, &spread).ok();
            }
        }
        Err(Error::BlowUp { step, time, .. }) => {
            record.steps = step;
            record.end_time = time;
            record.blow_up = true;
            record.dominance_time = None;
            record.winner = None;
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn summarize<'a>(
    point: &ParamPoint,
    tau_red: f64,
    config: &PropagatorConfig,
    records: impl Iterator<Item = &'a RunRecord>,
    n_components: usize,
    bins: usize,
) -> PointSummary {
    let mut summary = PointSummary {
        total_mass: point.total_mass,
        omega: point.omega,
        coupling: point.coupling(),
        tau_red,
        dt: config.dt,
        n_steps: config.n_steps,
        runs: 0,
        dominated: 0,
        censored: 0,
        blow_ups: 0,
        boundary_violations: 0,
        onset: None,
        p10: None,
        median: None,
        p90: None,
        width: None,
        winner_counts: vec![0; n_components],
        histogram: None,
    };
    let mut times = Vec::new();
    for r in records {
        summary.runs += 1;
        if r.blow_up {
            summary.blow_ups += 1;
            continue;
        }
        summary.boundary_violations += r.boundary_violation as u64;
        match (r.dominance_time, r.winner) {
            (Some(t), Some(w)) => {
                summary.dominated += 1;
                summary.winner_counts[w] += 1;
                times.push(t);
            }
            _ => {
                summary.censored += 1;
                times.push(f64::INFINITY);
            }
        }
    }
    times.sort_by(f64::total_cmp);
    let finite = |q: f64| percentile_sorted(&times, q).filter(|v| v.is_finite());
    summary.onset = finite(0.05);
    summary.p10 = finite(0.10);
    summary.median = finite(0.50);
    summary.p90 = finite(0.90);
    summary.width = summary.p90.zip(summary.p10).map(|(hi, lo)| hi - lo);
    summary.histogram = histogram(&times, bins).ok();
    summary
}
