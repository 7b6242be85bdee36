use serde::{Deserialize, Serialize};

use super::measure::half_time;
use super::runner::{with_pool, ParamPoint, RunLength, TimeStepping};
use super::stats::{scaling_fit, ScalingFit};
use crate::propagator::{evolve, EffectiveHamiltonian, Trajectory};
use crate::{Grid, Result, StateKind, WaveFunction, HBAR};
use rayon::prelude::*;

/// Noise-free relaxation runs from a fixed grid and initial state, one per
/// parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfTimeSweep {
    pub points: Vec<ParamPoint>,
    pub grid: Grid,
    pub initial: StateKind,
    #[serde(default = "default_stepping")]
    pub stepping: TimeStepping,
    /// Records kept per stored trajectory; overrides `stepping.record_stride`
    /// when set. Half-times and plateaus are always measured on every step.
    #[serde(default)]
    pub records: Option<u64>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

fn default_stepping() -> TimeStepping {
    TimeStepping::new(RunLength::SlowTimes(8.0))
}

fn default_hbar() -> f64 {
    HBAR
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfTimePoint {
    pub total_mass: f64,
    pub omega: f64,
    /// `Nm·ω²`
    pub coupling: f64,
    pub dt: f64,
    pub n_steps: u64,
    /// s
    pub half_time: f64,
    /// `t½·Nm·ω²`
    pub scaled_half_time: f64,
    /// Mean `<x²>` over the last 5% of records, m².
    pub plateau_x2: f64,
    /// `ħ/(Nm·ω)`, m².
    pub spread_scale: f64,
    pub boundary_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfTimeResult {
    pub points: Vec<HalfTimePoint>,
    /// Half-time vs `Nm·ω²`.
    pub half_time_fit: Option<ScalingFit>,
    /// Plateau `<x²>` vs `Nm·ω`.
    pub spread_fit: Option<ScalingFit>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

impl HalfTimeSweep {
    pub fn new(points: Vec<ParamPoint>, grid: Grid, initial: StateKind) -> Self {
        HalfTimeSweep {
            points,
            grid,
            initial,
            stepping: default_stepping(),
            records: None,
            hbar: HBAR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(crate::Error::EmptyInput("sweep without parameter points"));
        }
        WaveFunction::new(self.grid, &self.initial)?;
        for (i, point) in self.points.iter().enumerate() {
            self.config(point)
                .and_then(|(params, config)| {
                    config.validate(&self.grid, &EffectiveHamiltonian::noiseless(params))
                })
                .map_err(|e| point.wrap_error(i, e))?;
        }
        Ok(())
    }

    fn config(
        &self,
        point: &ParamPoint,
    ) -> Result<(crate::PhysicalParams, crate::propagator::PropagatorConfig)> {
        let params = point.params(self.hbar)?;
        let x_ref = super::runner::separation(&self.initial.centers());
        let mut config = self.stepping.resolve(&self.grid, &params, None, x_ref)?;
        if let Some(records) = self.records {
            config.record_stride = (config.n_steps / records.max(1)).max(1);
        }
        Ok((params, config))
    }

    /// Runs every point (in parallel on `threads` workers) and fits the
    /// half-times and plateaus.
    pub fn run(&self, threads: Option<usize>) -> Result<HalfTimeResult> {
        self.validate()?;
        let psi0 = WaveFunction::new(self.grid, &self.initial)?;
        let outcomes = with_pool(threads, || {
            self.points
                .par_iter()
                .enumerate()
                .map(|(i, point)| {
                    self.run_point(&psi0, point)
                        .map_err(|e| point.wrap_error(i, e))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let (points, trajectories): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
        let half_time_fit = scaling_fit(
            &points
                .iter()
                .map(|p: &HalfTimePoint| (p.coupling, p.half_time))
                .collect::<Vec<_>>(),
        )
        .ok();
        let spread_fit = scaling_fit(
            &points
                .iter()
                .map(|p| (p.total_mass * p.omega, p.plateau_x2))
                .collect::<Vec<_>>(),
        )
        .ok();
        Ok(HalfTimeResult {
            points,
            half_time_fit,
            spread_fit,
            trajectories,
        })
    }

    fn run_point(
        &self,
        psi0: &WaveFunction,
        point: &ParamPoint,
    ) -> Result<(HalfTimePoint, Trajectory)> {
        let (params, config) = self.config(point)?;
        // half-times can be a small fraction of 1/ω, so measure on every step
        let full = evolve(
            psi0,
            EffectiveHamiltonian::noiseless(params),
            config.with_stride(1),
            &[],
        )?;
        let traj = full.thinned(config.record_stride as usize);
        let half = half_time(&full)?;
        let n = full.len();
        let window = super::measure::plateau_window(n).ok_or(crate::Error::NoPlateau)?;
        let plateau = full.mean_x2[n - window..].iter().sum::<f64>() / window as f64;
        Ok((
            HalfTimePoint {
                total_mass: params.total_mass,
                omega: params.omega,
                coupling: params.coupling(),
                dt: config.dt,
                n_steps: config.n_steps,
                half_time: half,
                scaled_half_time: half * params.coupling(),
                plateau_x2: plateau,
                spread_scale: params.spread_scale(),
                boundary_violation: traj.boundary_violation,
            },
            traj,
        ))
    }
}
