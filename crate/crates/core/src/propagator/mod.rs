//! Time evolution under `H_eff = p²/(2Nm) − (i/2)Nmω²(x − ξ(t))²`.
//!
//! The state is renormalized after every step; the norm the step would have
//! left behind is reported as the raw norm factor.

mod crank_nicolson;
mod noise;
mod oracle;
mod scales;
mod split_step;
mod trajectory;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

pub use noise::{NoiseKind, NoiseProcess};
pub use oracle::gaussian_oracle;
pub use scales::{gravity_omega, timescale_estimates, TimescaleEstimates};
pub use trajectory::Trajectory;

use crate::{Error, Grid, PhysicalParams, Result, WaveFunction};
use crank_nicolson::CrankNicolson;
use split_step::SplitStep;

/// Mass within this many grid cells of either end counts as boundary mass.
pub const BOUNDARY_CELLS: usize = 8;

/// Largest boundary mass tolerated at the end of a run.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// Non-Hermitian generator with a stochastic centre.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub params: PhysicalParams,
    pub noise: NoiseProcess,
    /// `false` drops `p²/(2Nm)`, the infinite-mass limit.
    pub kinetic: bool,
}

impl EffectiveHamiltonian {
    pub fn new(params: PhysicalParams, noise: NoiseProcess) -> Self {
        EffectiveHamiltonian {
            params,
            noise,
            kinetic: true,
        }
    }

    pub fn noiseless(params: PhysicalParams) -> Self {
        Self::new(params, NoiseProcess::zero())
    }

    pub fn without_kinetic(mut self) -> Self {
        self.kinetic = false;
        self
    }

    /// The generator is Hermitian (and the evolution unitary) exactly when ω = 0.
    pub fn is_hermitian(&self) -> bool {
        self.params.omega == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SplitStepSpectral,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    /// s
    pub dt: f64,
    pub n_steps: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default = "default_renormalize")]
    pub renormalize: bool,
}

fn default_stride() -> u64 {
    1
}

fn default_renormalize() -> bool {
    true
}

/// Largest admissible time steps for a grid and parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBounds {
    /// `dt·max|V_im|/ħ ≤ 0.1` with `max|V_im| = (1/2)Nmω²x_edge²`.
    pub damping: f64,
    /// `dt·ħk_max²/(2Nm) ≤ 0.5`.
    pub kinetic: f64,
}

impl StabilityBounds {
    pub fn new(grid: &Grid, params: &PhysicalParams, kinetic: bool) -> Self {
        let edge = grid.edge_distance();
        let v_max = 0.5 * params.coupling() * edge * edge;
        let k_max = grid.k_max();
        StabilityBounds {
            damping: if v_max > 0.0 {
                0.1 * params.hbar / v_max
            } else {
                f64::INFINITY
            },
            kinetic: if kinetic {
                0.5 * 2.0 * params.total_mass / (params.hbar * k_max * k_max)
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn max_dt(&self) -> f64 {
        self.damping.min(self.kinetic)
    }

    pub fn check(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        if dt > self.damping {
            return Err(Error::Stability {
                what: "damping",
                dt,
                bound: self.damping,
            });
        }
        if dt > self.kinetic {
            return Err(Error::Stability {
                what: "kinetic phase",
                dt,
                bound: self.kinetic,
            });
        }
        Ok(())
    }
}

impl PropagatorConfig {
    pub fn new(dt: f64, n_steps: u64) -> Self {
        PropagatorConfig {
            dt,
            n_steps,
            scheme: Scheme::SplitStepSpectral,
            record_stride: 1,
            renormalize: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, record_stride: u64) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn validate(&self, grid: &Grid, hamiltonian: &EffectiveHamiltonian) -> Result<()> {
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        StabilityBounds::new(grid, &hamiltonian.params, hamiltonian.kinetic).check(self.dt)
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// State handed to a run observer after each recorded step.
pub struct Sample<'a> {
    pub step: u64,
    pub time: f64,
    pub psi: &'a WaveFunction,
    /// Norm left by the most recent step before renormalization (1 at t = 0).
    pub raw_norm: f64,
    /// `ξ` used by the most recent step.
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunEnd {
    pub steps: u64,
    pub time: f64,
    pub stopped_early: bool,
}

enum Engine {
    Split(SplitStep),
    CrankNicolson(CrankNicolson),
}

/// Single-trajectory propagator. Owns its transform workspace; not shared.
pub struct Propagator {
    grid: Grid,
    hamiltonian: EffectiveHamiltonian,
    config: PropagatorConfig,
    engine: Engine,
}

impl Propagator {
    pub fn new(
        grid: Grid,
        hamiltonian: EffectiveHamiltonian,
        config: PropagatorConfig,
    ) -> Result<Self> {
        hamiltonian.params.validate()?;
        config.validate(&grid, &hamiltonian)?;
        let engine = match config.scheme {
            Scheme::SplitStepSpectral => Engine::Split(SplitStep::new(
                &grid,
                &hamiltonian.params,
                config.dt,
                hamiltonian.kinetic,
            )),
            Scheme::CrankNicolson => Engine::CrankNicolson(CrankNicolson::new(
                &grid,
                &hamiltonian.params,
                config.dt,
                hamiltonian.kinetic,
            )),
        };
        Ok(Propagator {
            grid,
            hamiltonian,
            config,
            engine,
        })
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn hamiltonian(&self) -> &EffectiveHamiltonian {
        &self.hamiltonian
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// One full step from time `t`; returns the pre-normalization norm factor.
    pub fn step(&mut self, psi: &mut WaveFunction, t: f64) -> Result<f64> {
        let dt = self.config.dt;
        let xi = self.hamiltonian.noise.sample(t + 0.5 * dt);
        let before = if self.config.renormalize { 1.0 } else { psi.norm() };
        let amplitudes = psi.amplitudes_mut();
        match &mut self.engine {
            Engine::Split(split) => {
                split.half_kinetic(amplitudes);
                split.potential(amplitudes, xi);
                split.half_kinetic(amplitudes);
            }
            Engine::CrankNicolson(cn) => cn.step(amplitudes, xi),
        }
        self.finish_step(psi, before, 0, t + dt)
    }

    fn finish_step(
        &self,
        psi: &mut WaveFunction,
        before: f64,
        step: u64,
        time: f64,
    ) -> Result<f64> {
        let after = if self.config.renormalize {
            psi.normalize()
        } else {
            psi.norm()
        };
        if !after.is_finite() || after <= f64::MIN_POSITIVE {
            return Err(Error::BlowUp {
                step,
                time,
                norm: after,
            });
        }
        Ok(after / before)
    }

    /// Runs `config.n_steps` steps, calling `observe` at t = 0 and after every
    /// `record_stride` steps (and after the last one). Returning
    /// `ControlFlow::Break` stops the run.
    ///
    /// Consecutive half kinetic steps between records are fused into one
    /// spectral multiplication; the kinetic factor is unitary, so the norm
    /// measured after the potential factor is the norm of the full step.
    pub fn run<F>(&mut self, psi: &mut WaveFunction, mut observe: F) -> Result<RunEnd>
    where
        F: FnMut(&Sample<'_>) -> ControlFlow<()>,
    {
        let dt = self.config.dt;
        let stride = self.config.record_stride;
        let n_steps = self.config.n_steps;
        let start = Sample {
            step: 0,
            time: 0.0,
            psi,
            raw_norm: 1.0,
            xi: self.hamiltonian.noise.sample(0.0),
        };
        if observe(&start).is_break() {
            return Ok(RunEnd {
                steps: 0,
                time: 0.0,
                stopped_early: true,
            });
        }
        let mut pending_half = false;
        for step in 0..n_steps {
            let t = step as f64 * dt;
            let xi = self.hamiltonian.noise.sample(t + 0.5 * dt);
            let before = if self.config.renormalize { 1.0 } else { psi.norm() };
            let done = step + 1;
            let record = done % stride == 0 || done == n_steps;
            let amplitudes = psi.amplitudes_mut();
            match &mut self.engine {
                Engine::Split(split) => {
                    if pending_half {
                        split.full_kinetic(amplitudes);
                    } else {
                        split.half_kinetic(amplitudes);
                    }
                    split.potential(amplitudes, xi);
                    pending_half = true;
                }
                Engine::CrankNicolson(cn) => cn.step(amplitudes, xi),
            }
            let time = done as f64 * dt;
            let raw_norm = self.finish_step(psi, before, done, time)?;
            if record {
                if let Engine::Split(split) = &mut self.engine {
                    split.half_kinetic(psi.amplitudes_mut());
                    pending_half = false;
                }
                let sample = Sample {
                    step: done,
                    time,
                    psi,
                    raw_norm,
                    xi,
                };
                if observe(&sample).is_break() {
                    return Ok(RunEnd {
                        steps: done,
                        time,
                        stopped_early: true,
                    });
                }
            }
        }
        Ok(RunEnd {
            steps: n_steps,
            time: n_steps as f64 * dt,
            stopped_early: false,
        })
    }

    /// Evolves a copy of `psi0` and records observables and Voronoi weights of
    /// `centers` every `record_stride` steps.
    pub fn evolve(&mut self, psi0: &WaveFunction, centers: &[f64]) -> Result<Trajectory> {
        let mut psi = psi0.clone();
        let mut trajectory = Trajectory::new(centers)?;
        self.run(&mut psi, |sample| {
            trajectory.record_sample(sample);
            ControlFlow::Continue(())
        })?;
        trajectory.finish(&psi);
        Ok(trajectory)
    }
}

/// Convenience wrapper: build a propagator and evolve `psi0`.
pub fn evolve(
    psi0: &WaveFunction,
    hamiltonian: EffectiveHamiltonian,
    config: PropagatorConfig,
    centers: &[f64],
) -> Result<Trajectory> {
    Propagator::new(*psi0.grid(), hamiltonian, config)?.evolve(psi0, centers)
}

#[cfg(test)]
mod tests;
