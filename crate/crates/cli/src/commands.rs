//! The subcommands. Each resolves its inputs from the [`RunConfig`], collects
//! every validation problem before running anything, echoes the effective
//! config and writes its artifacts.

use std::path::PathBuf;

use collapse::crystal::{sb_ground_state, singular_limit_table, CrystalModel};
use collapse::ensemble::{
    born_statistics, dominance, drift_time_series, half_time, run_ensemble_with_progress,
    EnsembleResult, HalfTimeSweep, ParamPoint, SweepSpec,
};
use collapse::propagator::{
    evolve, gaussian_oracle, gravity_omega, timescale_estimates, EffectiveHamiltonian, NoiseKind,
    NoiseProcess, PropagatorConfig, StabilityBounds, TimescaleEstimates, Trajectory,
};
use collapse::{Complex64, Grid, PhysicalParams, StateKind, WaveFunction, HBAR};
use serde::Serialize;

use crate::config::{resolve_noise, EnsembleSection, RunConfig, SpectrumSection};
use crate::error::CliError;
use crate::output::{float, opt_float, Csv, OutDir};

/// Component weight a run must reach to count as reduced.
pub const SIMULATE_DOMINANCE_THRESHOLD: f64 = 0.95;

/// `<x>` drift time: first time `|<x>|` falls to this fraction of its start.
pub const DRIFT_FRACTION: f64 = 0.5;

/// Grid-vs-oracle agreement required of a noise-free Gaussian run.
pub const ORACLE_TOLERANCE: f64 = 1e-4;

pub struct Context {
    pub config: RunConfig,
    pub threads: Option<usize>,
    pub quiet: bool,
}

impl Context {
    fn progress(&self, message: &str) {
        if !self.quiet {
            eprintln!("{message}");
        }
    }

    fn out_dir(&self) -> Result<OutDir, CliError> {
        OutDir::create(&self.config.output.dir)
    }
}

/// Validation problems gathered before a command starts.
#[derive(Default)]
struct Problems(Vec<String>);

impl Problems {
    fn need<'a, T>(&mut self, value: &'a Option<T>, section: &str, command: &str) -> Option<&'a T> {
        if value.is_none() {
            self.0.push(format!("{section}: required by `{command}`"));
        }
        value.as_ref()
    }

    fn check<T>(&mut self, context: &str, result: collapse::Result<T>) -> Option<T> {
        result.map_err(|e| self.0.push(format!("{context}: {e}"))).ok()
    }

    fn push(&mut self, message: impl Into<String>) {
        self.0.push(message.into());
    }

    fn finish(self) -> Result<(), CliError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(self.0))
        }
    }
}

fn hbar(config: &RunConfig) -> f64 {
    config.physical_params.map_or(HBAR, |p| p.hbar)
}

pub fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let model = problems.need(&ctx.config.crystal, "crystal", "spectrum").copied();
    let section = ctx.config.spectrum.clone().unwrap_or_default();
    if section.n_k == 0 {
        problems.push("spectrum.n_k: must be at least 1");
    }
    if let Some(m) = &model {
        problems.check("crystal", m.validate());
    }
    problems.finish()?;
    let model = model.expect("checked above");

    #[derive(Serialize)]
    struct Summary {
        n_k: usize,
        energy_unit: f64,
        /// Largest `|E_qp − E_k|/E_k` over the sampled k.
        max_dispersion_residual: f64,
        /// Largest relative off-diagonal remainder after the rotation.
        max_off_diagonal_relative: f64,
        thin_levels: u64,
        thin_spacing_unit: f64,
    }

    let mut csv = Csv::new(&["k", "E_k", "A_k", "B_k", "u_k"]);
    let mut max_dispersion_residual: f64 = 0.0;
    let mut max_off_diagonal: f64 = 0.0;
    // quasiparticle energies come in units of ħ·sqrt(κ/(2m))
    let qp_unit = model.energy_unit() / 2f64.sqrt();
    for k in wavenumbers(&model, &section) {
        let energy = model.dispersion(k)?;
        let coeffs = model.bogoliubov(k)?;
        let qp = coeffs.quasiparticle_energy() * qp_unit;
        max_dispersion_residual = max_dispersion_residual.max((qp - energy).abs() / energy);
        max_off_diagonal = max_off_diagonal.max(coeffs.off_diagonal_relative());
        csv.row(&[
            float(k),
            float(energy),
            float(coeffs.a_k),
            float(coeffs.b_k),
            float(coeffs.rapidity),
        ]);
    }
    let mut thin = Csv::new(&["n", "E_n"]);
    for (n, e) in model
        .thin_spectrum_energies(section.thin_levels)
        .into_iter()
        .enumerate()
    {
        thin.row(&[n.to_string(), float(e)]);
    }
    let thin_spacing_unit = model.thin_spectrum_energies(1)[1];

    let mut out = ctx.out_dir()?;
    echo(&mut out, &ctx.config)?;
    out.write_csv("spectrum.csv", &csv)?;
    out.write_csv("thin_spectrum.csv", &thin)?;
    out.write_json(
        "spectrum.json",
        &Summary {
            n_k: section.n_k,
            energy_unit: model.energy_unit(),
            max_dispersion_residual,
            max_off_diagonal_relative: max_off_diagonal,
            thin_levels: section.thin_levels,
            thin_spacing_unit,
        },
    )?;
    report(ctx, &out);
    Ok(())
}

/// `n_k` wavenumbers evenly spaced on `(0, π/a]`.
fn wavenumbers(model: &CrystalModel, section: &SpectrumSection) -> Vec<f64> {
    let k_max = std::f64::consts::PI / model.lattice_const;
    (1..=section.n_k)
        .map(|j| k_max * j as f64 / section.n_k as f64)
        .collect()
}

pub fn limits(ctx: &Context) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let model = problems.need(&ctx.config.crystal, "crystal", "limits");
    let limits = problems.need(&ctx.config.limits, "limits", "limits");
    problems.finish()?;
    let (model, limits) = (model.expect("checked"), limits.expect("checked"));
    let table = singular_limit_table(model, &limits.n_atoms, &limits.omegas)?;

    let mut csv = Csv::new(&["n_atoms", "omega", "x_c", "width"]);
    for e in &table.entries {
        csv.row(&[e.n_atoms.to_string(), float(e.omega), float(e.x_c), float(e.width)]);
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        box_length: f64,
        delocalized_width: f64,
        field_first: &'a [collapse::crystal::LimitEntry],
        size_first: &'a [collapse::crystal::LimitEntry],
    }
    let mut out = ctx.out_dir()?;
    echo(&mut out, &ctx.config)?;
    out.write_csv("limits.csv", &csv)?;
    out.write_json(
        "limits.json",
        &Summary {
            box_length: table.box_length,
            delocalized_width: table.delocalized_width(),
            field_first: &table.field_first,
            size_first: &table.size_first,
        },
    )?;
    report(ctx, &out);
    Ok(())
}

pub fn groundstate(ctx: &Context) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let grid = problems.need(&ctx.config.grid, "grid", "groundstate");
    let params = problems.need(&ctx.config.physical_params, "physical_params", "groundstate");
    problems.finish()?;
    let (grid, params) = (*grid.expect("checked"), params.expect("checked"));
    let psi = sb_ground_state(grid, params)?;

    let mut csv = Csv::new(&["x", "re", "im", "density"]);
    for ((x, a), d) in grid.positions().zip(psi.amplitudes()).zip(psi.density()) {
        csv.row(&[float(x), float(a.re), float(a.im), float(d)]);
    }
    let obs = psi.observables();
    #[derive(Serialize)]
    struct Summary {
        x_c: Option<f64>,
        norm: f64,
        mean_x: f64,
        mean_x2: f64,
        variance: f64,
        /// `x_c²/2`, the variance of the exact ground state.
        expected_variance: Option<f64>,
    }
    let mut out = ctx.out_dir()?;
    echo(&mut out, &ctx.config)?;
    out.write_csv("groundstate.csv", &csv)?;
    out.write_json(
        "groundstate.json",
        &Summary {
            x_c: params.x_c(),
            norm: obs.norm,
            mean_x: obs.mean_x,
            mean_x2: obs.mean_x2,
            variance: obs.variance(),
            expected_variance: params.x_c().map(|x| 0.5 * x * x),
        },
    )?;
    report(ctx, &out);
    Ok(())
}

/// Everything `simulate` needs, resolved from the config.
struct SimulatePlan {
    grid: Grid,
    params: PhysicalParams,
    initial: StateKind,
    centers: Vec<f64>,
    noise: NoiseKind,
    kinetic: bool,
    bounds: StabilityBounds,
    config: PropagatorConfig,
}

fn plan_simulate(config: &RunConfig) -> Result<SimulatePlan, CliError> {
    let mut problems = Problems::default();
    let grid = problems.need(&config.grid, "grid", "simulate");
    let params = problems.need(&config.physical_params, "physical_params", "simulate");
    let initial = problems.need(&config.initial_state, "initial_state", "simulate");
    let prop = problems.need(&config.propagator, "propagator", "simulate");
    let (Some(&grid), Some(&params), Some(initial), Some(prop)) = (grid, params, initial, prop)
    else {
        return problems.finish().map(|_| unreachable!());
    };
    problems.check("physical_params", params.validate());
    problems.check("initial_state", WaveFunction::new(grid, initial));
    let noise = resolve_noise(
        &config.noise,
        &initial.centers(),
        &[ParamPoint::new(params.total_mass, params.omega)],
        params.hbar,
    )
    .map_err(|e| problems.push(e))
    .ok();
    if let Some(kind) = noise {
        problems.check("noise", NoiseProcess::new(kind, config.seed));
    }
    let bounds = StabilityBounds::new(&grid, &params, prop.kinetic);
    let dt = match prop.dt {
        Some(dt) => problems.check("propagator.dt", bounds.check(dt).map(|_| dt)),
        None if !(prop.dt_fraction > 0.0 && prop.dt_fraction <= 1.0) => {
            problems.push(format!(
                "propagator.dt_fraction: must lie in (0, 1], got {}",
                prop.dt_fraction
            ));
            None
        }
        None => {
            let mut dt = prop.dt_fraction * bounds.max_dt();
            if let Some(NoiseKind::PiecewiseConstantGaussian { tau, .. }) = noise {
                if tau > 0.0 && tau.is_finite() {
                    dt = tau / (tau / dt).ceil();
                }
            }
            Some(dt)
        }
    };
    let n_steps = match (prop.n_steps, prop.duration, dt) {
        (Some(n), None, _) if n > 0 => Some(n),
        (None, Some(d), Some(dt)) if d > 0.0 && d.is_finite() => {
            Some(((d / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64)
        }
        (None, Some(_), None) => None,
        (Some(_), None, _) => {
            problems.push("propagator.n_steps: must be at least 1");
            None
        }
        (None, Some(d), _) => {
            problems.push(format!("propagator.duration: must be positive, got {d}"));
            None
        }
        _ => {
            problems.push("propagator: give exactly one of `n_steps` and `duration`");
            None
        }
    };
    if prop.record_stride == 0 {
        problems.push("propagator.record_stride: must be at least 1");
    }
    let centers = prop
        .track_centers
        .clone()
        .unwrap_or_else(|| initial.centers());
    problems.finish()?;
    let (Some(noise), Some(dt), Some(n_steps)) = (noise, dt, n_steps) else {
        unreachable!("every missing value was reported");
    };
    Ok(SimulatePlan {
        grid,
        params,
        initial: initial.clone(),
        centers,
        noise,
        kinetic: prop.kinetic,
        bounds,
        config: PropagatorConfig {
            dt,
            n_steps,
            scheme: prop.scheme,
            record_stride: prop.record_stride,
            renormalize: prop.renormalize,
        },
    })
}

/// Grid run against the Gaussian-parameter ODE at the recorded times.
#[derive(Serialize)]
struct OracleComparison {
    /// `max|Δ<x>| / sqrt(max <x²>_oracle)`
    mean_x_deviation: f64,
    /// `max|Δ<x²>| / max <x²>_oracle`
    mean_x2_deviation: f64,
    tolerance: f64,
    agrees: bool,
}

fn compare_with_oracle(
    plan: &SimulatePlan,
    traj: &Trajectory,
) -> Result<Option<OracleComparison>, CliError> {
    let gaussian = match &plan.initial {
        StateKind::Gaussian { .. } => true,
        StateKind::Superposition { components } => components.len() == 1,
        StateKind::Uniform => false,
    };
    if !gaussian
        || plan.noise != NoiseKind::Zero
        || !plan.kinetic
        || !plan.config.renormalize
    {
        return Ok(None);
    }
    let oracle = gaussian_oracle(&plan.params, &plan.initial, &traj.times)?;
    let scale_x2 = oracle.mean_x2.iter().copied().fold(0.0, f64::max);
    let scale_x = scale_x2.sqrt();
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let mean_x_deviation = max_diff(&traj.mean_x, &oracle.mean_x) / scale_x;
    let mean_x2_deviation = max_diff(&traj.mean_x2, &oracle.mean_x2) / scale_x2;
    Ok(Some(OracleComparison {
        mean_x_deviation,
        mean_x2_deviation,
        tolerance: ORACLE_TOLERANCE,
        agrees: mean_x_deviation <= ORACLE_TOLERANCE && mean_x2_deviation <= ORACLE_TOLERANCE,
    }))
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let plan = plan_simulate(&ctx.config)?;
    let mut effective = ctx.config.clone();
    effective.noise = plan.noise.into();
    if let Some(prop) = effective.propagator.as_mut() {
        prop.dt = Some(plan.config.dt);
        prop.n_steps = Some(plan.config.n_steps);
        prop.duration = None;
    }
    let mut out = ctx.out_dir()?;
    echo(&mut out, &effective)?;

    ctx.progress(&format!(
        "simulate: {} steps of {:e} s",
        plan.config.n_steps, plan.config.dt
    ));
    let psi0 = WaveFunction::new(plan.grid, &plan.initial)?;
    let mut hamiltonian =
        EffectiveHamiltonian::new(plan.params, NoiseProcess::new(plan.noise, ctx.config.seed)?);
    if !plan.kinetic {
        hamiltonian = hamiltonian.without_kinetic();
    }
    let traj = evolve(&psi0, hamiltonian, plan.config, &plan.centers)?;

    let mut header: Vec<String> = ["t", "mean_x", "mean_x2", "raw_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..plan.centers.len()).map(|i| format!("w_{i}")));
    header.push("xi".into());
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..traj.len() {
        let mut row = vec![
            float(traj.times[i]),
            float(traj.mean_x[i]),
            float(traj.mean_x2[i]),
            float(traj.raw_norm[i]),
        ];
        if let Some(weights) = traj.component_weights.get(i) {
            row.extend(weights.iter().map(|&w| float(w)));
        }
        row.push(float(traj.xi_trace[i]));
        csv.row(&row);
    }

    #[derive(Serialize)]
    struct Summary {
        dt: f64,
        n_steps: u64,
        duration: f64,
        stability: StabilityBounds,
        records: usize,
        half_time: Option<f64>,
        half_time_error: Option<String>,
        dominance_threshold: f64,
        dominance_time: Option<f64>,
        winner: Option<usize>,
        drift_time: Option<f64>,
        drift_time_after_dominance: Option<f64>,
        final_mean_x: f64,
        final_mean_x2: f64,
        final_variance: f64,
        spread_scale: f64,
        min_raw_norm: f64,
        timescales: Option<TimescaleEstimates>,
        peak_boundary_mass: f64,
        final_boundary_mass: f64,
        boundary_violation: bool,
        oracle: Option<OracleComparison>,
    }

    let last = traj.len() - 1;
    let (half, half_err) = match half_time(&traj) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let dom = dominance(&traj, SIMULATE_DOMINANCE_THRESHOLD);
    let drift_after = dom.and_then(|(t_dom, _)| {
        let start = traj.times.iter().position(|&t| t >= t_dom)?;
        drift_time_series(&traj.times[start..], &traj.mean_x[start..], DRIFT_FRACTION)
            .map(|t| t - t_dom)
    });
    let summary = Summary {
        dt: plan.config.dt,
        n_steps: plan.config.n_steps,
        duration: plan.config.duration(),
        stability: plan.bounds,
        records: traj.len(),
        half_time: half,
        half_time_error: half_err,
        dominance_threshold: SIMULATE_DOMINANCE_THRESHOLD,
        dominance_time: dom.map(|d| d.0),
        winner: dom.map(|d| d.1),
        drift_time: drift_time_series(&traj.times, &traj.mean_x, DRIFT_FRACTION),
        drift_time_after_dominance: drift_after,
        final_mean_x: traj.mean_x[last],
        final_mean_x2: traj.mean_x2[last],
        final_variance: traj.variance(last),
        spread_scale: plan.params.spread_scale(),
        min_raw_norm: traj.raw_norm.iter().copied().fold(f64::INFINITY, f64::min),
        timescales: collapse::ensemble::separation(&plan.centers)
            .map(|x| timescale_estimates(&plan.params, x)),
        peak_boundary_mass: traj.peak_boundary_mass,
        final_boundary_mass: traj.final_boundary_mass,
        boundary_violation: traj.boundary_violation,
        oracle: compare_with_oracle(&plan, &traj)?,
    };
    if traj.boundary_violation {
        eprintln!(
            "warning: {:e} of the probability ends within the boundary cells; widen the grid",
            traj.final_boundary_mass
        );
    }
    out.write_csv("trajectory.csv", &csv)?;
    out.write_json("summary.json", &summary)?;
    report(ctx, &out);
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let mut problems = Problems::default();
    let grid = problems.need(&config.grid, "grid", "sweep");
    let initial = problems.need(&config.initial_state, "initial_state", "sweep");
    let section = problems.need(&config.sweep, "sweep", "sweep");
    if config.noise != Default::default() {
        problems.push("noise: `sweep` runs are noise-free; set noise.kind to \"zero\"");
    }
    let (Some(&grid), Some(initial), Some(section)) = (grid, initial, section) else {
        return problems.finish();
    };
    let mut spec = HalfTimeSweep::new(section.points.clone(), grid, initial.clone());
    spec.stepping = section.stepping;
    spec.records = Some(section.records);
    spec.hbar = hbar(config);
    problems.check("sweep.stepping", section.stepping.validate());
    if section.records == 0 {
        problems.push("sweep.records: must be at least 1");
    }
    problems.check("sweep", spec.validate());
    problems.finish()?;

    let mut out = ctx.out_dir()?;
    echo(&mut out, config)?;
    ctx.progress(&format!("sweep: {} parameter points", spec.points.len()));
    let result = spec.run(ctx.threads)?;

    let mut csv = Csv::new(&[
        "total_mass",
        "omega",
        "coupling",
        "dt",
        "n_steps",
        "half_time",
        "scaled_half_time",
        "plateau_x2",
        "spread_scale",
        "boundary_violation",
    ]);
    for p in &result.points {
        csv.row(&[
            float(p.total_mass),
            float(p.omega),
            float(p.coupling),
            float(p.dt),
            p.n_steps.to_string(),
            float(p.half_time),
            float(p.scaled_half_time),
            float(p.plateau_x2),
            float(p.spread_scale),
            p.boundary_violation.to_string(),
        ]);
    }
    let mut series = Csv::new(&["point", "t", "mean_x", "mean_x2"]);
    for (i, traj) in result.trajectories.iter().enumerate() {
        for j in 0..traj.len() {
            series.row(&[
                i.to_string(),
                float(traj.times[j]),
                float(traj.mean_x[j]),
                float(traj.mean_x2[j]),
            ]);
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        result: &'a collapse::ensemble::HalfTimeResult,
        /// Half-time slope within −1 ± 0.2.
        half_time_slope_ok: Option<bool>,
        /// Plateau slope within −1 ± 0.05.
        spread_slope_ok: Option<bool>,
    }
    out.write_csv("sweep.csv", &csv)?;
    out.write_csv("sweep_trajectories.csv", &series)?;
    out.write_json(
        "sweep.json",
        &Summary {
            result: &result,
            half_time_slope_ok: result
                .half_time_fit
                .as_ref()
                .map(|f| (f.slope + 1.0).abs() <= 0.2),
            spread_slope_ok: result
                .spread_fit
                .as_ref()
                .map(|f| (f.slope + 1.0).abs() <= 0.05),
        },
    )?;
    let violations = result.points.iter().filter(|p| p.boundary_violation).count();
    if violations > 0 {
        eprintln!("warning: {violations} sweep point(s) end with probability in the boundary cells");
    }
    report(ctx, &out);
    Ok(())
}

/// Builds the ensemble spec shared by `ensemble` and `born`, returning it
/// with the config echo that reproduces it.
fn plan_ensemble(config: &RunConfig, command: &str) -> Result<(SweepSpec, RunConfig), CliError> {
    let mut problems = Problems::default();
    let grid = problems.need(&config.grid, "grid", command);
    let initial = problems.need(&config.initial_state, "initial_state", command);
    let section = problems.need(&config.ensemble, "ensemble", command);
    let (Some(&grid), Some(initial), Some(section)) = (grid, initial, section) else {
        return problems.finish().map(|_| unreachable!());
    };
    let hbar = hbar(config);
    let noise = resolve_noise(&config.noise, &initial.centers(), &section.points, hbar)
        .map_err(|e| problems.push(e))
        .ok();
    problems.finish()?;
    let noise = noise.expect("checked");
    let EnsembleSection {
        points,
        runs_per_point,
        dominance_threshold,
        stepping,
        stop_at_dominance,
        histogram_bins,
    } = section.clone();
    let mut spec = SweepSpec::new(
        points,
        runs_per_point,
        config.seed,
        grid,
        initial.clone(),
        noise,
        stepping,
    );
    spec.dominance_threshold = dominance_threshold;
    spec.stop_at_dominance = stop_at_dominance;
    spec.histogram_bins = histogram_bins;
    spec.hbar = hbar;
    let mut problems = Problems::default();
    if runs_per_point == 0 {
        problems.push("ensemble.runs_per_point: must be at least 1");
    }
    if histogram_bins == 0 {
        problems.push("ensemble.histogram_bins: must be at least 1");
    }
    problems.check("ensemble", spec.validate());
    problems.finish()?;
    let mut effective = config.clone();
    effective.noise = noise.into();
    Ok((spec, effective))
}

fn run_with_progress(ctx: &Context, spec: &SweepSpec) -> Result<EnsembleResult, CliError> {
    let total = spec.total_runs();
    ctx.progress(&format!(
        "ensemble: {} points x {} runs",
        spec.points.len(),
        spec.runs_per_point
    ));
    let step = (total / 10).max(1);
    let quiet = ctx.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet && (done.is_multiple_of(step) || done == total) {
            eprintln!("  {done}/{total} runs");
        }
    };
    Ok(run_ensemble_with_progress(spec, ctx.threads, &progress)?)
}

fn runs_csv(result: &EnsembleResult, components: usize) -> Csv {
    let mut header: Vec<String> = [
        "point",
        "run",
        "seed",
        "total_mass",
        "omega",
        "dominance_time",
        "winner",
        "half_time",
        "steps",
        "end_time",
        "boundary_violation",
        "blow_up",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..components).map(|i| format!("w_{i}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for r in &result.records {
        let mut row = vec![
            r.point.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            float(r.total_mass),
            float(r.omega),
            opt_float(r.dominance_time),
            r.winner.map(|w| w.to_string()).unwrap_or_default(),
            opt_float(r.half_time),
            r.steps.to_string(),
            float(r.end_time),
            r.boundary_violation.to_string(),
            r.blow_up.to_string(),
        ];
        row.extend((0..components).map(|i| opt_float(r.final_weights.get(i).copied())));
        csv.row(&row);
    }
    csv
}

pub fn ensemble(ctx: &Context) -> Result<(), CliError> {
    let (spec, effective) = plan_ensemble(&ctx.config, "ensemble")?;
    let mut out = ctx.out_dir()?;
    echo(&mut out, &effective)?;
    let result = run_with_progress(ctx, &spec)?;

    let mut points = Csv::new(&[
        "point",
        "total_mass",
        "omega",
        "coupling",
        "tau_red",
        "dt",
        "n_steps",
        "runs",
        "dominated",
        "censored",
        "blow_ups",
        "boundary_violations",
        "onset",
        "p10",
        "median",
        "p90",
        "width",
    ]);
    let mut hist = Csv::new(&["point", "bin_lo", "bin_hi", "density", "count"]);
    for (i, p) in result.points.iter().enumerate() {
        points.row(&[
            i.to_string(),
            float(p.total_mass),
            float(p.omega),
            float(p.coupling),
            float(p.tau_red),
            float(p.dt),
            p.n_steps.to_string(),
            p.runs.to_string(),
            p.dominated.to_string(),
            p.censored.to_string(),
            p.blow_ups.to_string(),
            p.boundary_violations.to_string(),
            opt_float(p.onset),
            opt_float(p.p10),
            opt_float(p.median),
            opt_float(p.p90),
            opt_float(p.width),
        ]);
        if let Some(h) = &p.histogram {
            for (b, (&d, &c)) in h.density.iter().zip(&h.counts).enumerate() {
                let lo = h.lo + b as f64 * h.bin_width;
                hist.row(&[
                    i.to_string(),
                    float(lo),
                    float(lo + h.bin_width),
                    float(d),
                    c.to_string(),
                ]);
            }
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        points: &'a [collapse::ensemble::PointSummary],
        onset_fit: &'a Option<collapse::ensemble::ScalingFit>,
        width_fit: &'a Option<collapse::ensemble::ScalingFit>,
        total_runs: usize,
        blow_ups: usize,
        /// Onset slope within −1 ± 0.25.
        onset_slope_ok: Option<bool>,
        /// Width slope within −2 ± 0.4.
        width_slope_ok: Option<bool>,
    }
    out.write_csv("runs.csv", &runs_csv(&result, spec.centers().len()))?;
    out.write_csv("points.csv", &points)?;
    out.write_csv("histograms.csv", &hist)?;
    out.write_json(
        "ensemble.json",
        &Summary {
            points: &result.points,
            onset_fit: &result.onset_fit,
            width_fit: &result.width_fit,
            total_runs: result.total_runs,
            blow_ups: result.blow_ups,
            onset_slope_ok: result
                .onset_fit
                .as_ref()
                .map(|f| (f.slope + 1.0).abs() <= 0.25),
            width_slope_ok: result
                .width_fit
                .as_ref()
                .map(|f| (f.slope + 2.0).abs() <= 0.4),
        },
    )?;
    report(ctx, &out);
    Ok(())
}

pub fn born(ctx: &Context) -> Result<(), CliError> {
    let (spec, effective) = plan_ensemble(&ctx.config, "born")?;
    let weights: Vec<Complex64> = match &spec.initial {
        StateKind::Superposition { components } => components.iter().map(|c| c.weight).collect(),
        _ => {
            return Err(CliError::validation(
                "initial_state: `born` needs a superposition",
            ))
        }
    };
    let mut out = ctx.out_dir()?;
    echo(&mut out, &effective)?;
    let result = run_with_progress(ctx, &spec)?;

    #[derive(Serialize)]
    struct PointReport {
        total_mass: f64,
        omega: f64,
        #[serde(flatten)]
        report: collapse::ensemble::BornReport,
    }
    let mut reports = Vec::new();
    let mut csv = Csv::new(&[
        "point",
        "component",
        "center",
        "weight_re",
        "weight_im",
        "expected",
        "count",
        "frequency",
        "ci_lo",
        "ci_hi",
        "z",
    ]);
    let centers = spec.centers();
    for (i, p) in spec.points.iter().enumerate() {
        let subset = EnsembleResult {
            records: result.records_at(i).cloned().collect(),
            points: Vec::new(),
            onset_fit: None,
            width_fit: None,
            total_runs: spec.runs_per_point as usize,
            blow_ups: 0,
        };
        let report = born_statistics(&subset, &weights).map_err(|e| {
            CliError::from(collapse::Error::AtPoint {
                index: i,
                total_mass: p.total_mass,
                omega: p.omega,
                source: Box::new(e),
            })
        })?;
        for c in 0..weights.len() {
            csv.row(&[
                i.to_string(),
                c.to_string(),
                float(centers[c]),
                float(weights[c].re),
                float(weights[c].im),
                float(report.expected[c]),
                report.counts[c].to_string(),
                float(report.frequencies[c]),
                float(report.intervals[c].0),
                float(report.intervals[c].1),
                float(report.z_scores[c]),
            ]);
        }
        reports.push(PointReport {
            total_mass: p.total_mass,
            omega: p.omega,
            report,
        });
    }
    #[derive(Serialize)]
    struct Summary {
        points: Vec<PointReport>,
        /// Every point within 3σ of the Born weights.
        born_consistent: bool,
    }
    out.write_csv("runs.csv", &runs_csv(&result, centers.len()))?;
    out.write_csv("born.csv", &csv)?;
    out.write_json(
        "born.json",
        &Summary {
            born_consistent: reports.iter().all(|r| r.report.within_3_sigma),
            points: reports,
        },
    )?;
    report(ctx, &out);
    Ok(())
}

/// `estimate` output: the field frequency of a body and the two timescales.
#[derive(Debug, Serialize)]
pub struct Estimate {
    /// kg
    pub mass: f64,
    /// m
    pub size: f64,
    /// `sqrt(G·M/L³)`, s⁻¹
    pub omega: f64,
    /// m
    pub x_ref: f64,
    /// `sqrt(ħ/(Mω))`, m
    pub x_c: f64,
    #[serde(flatten)]
    pub timescales: TimescaleEstimates,
}

pub fn estimate(mass: f64, size: f64, x_ref: Option<f64>) -> Result<Estimate, CliError> {
    let mut problems = Problems::default();
    if !(mass > 0.0 && mass.is_finite()) {
        problems.push(format!("--mass: must be positive, got {mass}"));
    }
    if !(size > 0.0 && size.is_finite()) {
        problems.push(format!("--size: must be positive, got {size}"));
    }
    if let Some(x) = x_ref {
        if !(x > 0.0 && x.is_finite()) {
            problems.push(format!("--x-ref: must be positive, got {x}"));
        }
    }
    problems.finish()?;
    let omega = gravity_omega(mass, size);
    let params = PhysicalParams::new(mass, omega)?;
    let x_c = params.x_c().expect("omega is positive");
    let x_ref = x_ref.unwrap_or(x_c);
    Ok(Estimate {
        mass,
        size,
        omega,
        x_ref,
        x_c,
        timescales: timescale_estimates(&params, x_ref),
    })
}

fn echo(out: &mut OutDir, config: &RunConfig) -> Result<(), CliError> {
    out.write_json("effective_config.json", config)
}

fn report(ctx: &Context, out: &OutDir) {
    let files: Vec<PathBuf> = out.written().to_vec();
    for f in files {
        ctx.progress(&format!("wrote {}", f.display()));
    }
}
