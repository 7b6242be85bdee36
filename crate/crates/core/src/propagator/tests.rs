use std::ops::ControlFlow;

use rustfft::FftPlanner;

use super::*;
use crate::{Complex64, StateKind, HBAR};

const MASS: f64 = 1.0e-11;
const OMEGA: f64 = 1.0e3;

fn params() -> PhysicalParams {
    PhysicalParams::new(MASS, OMEGA).unwrap()
}

fn x_c() -> f64 {
    params().x_c().unwrap()
}

fn grid(half: f64, n: usize) -> Grid {
    Grid::symmetric(half, n).unwrap()
}

fn bound(grid: &Grid, params: &PhysicalParams, kinetic: bool) -> f64 {
    StabilityBounds::new(grid, params, kinetic).max_dt()
}

/// `Σ|ψ̂_k|² k²` normalized by the norm, i.e. `<p²>/ħ²`.
fn mean_k2(psi: &WaveFunction) -> f64 {
    let mut buf = psi.amplitudes().to_vec();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    let k = psi.grid().wavenumbers();
    let (mut num, mut den) = (0.0, 0.0);
    for (a, k) in buf.iter().zip(&k) {
        num += a.norm_sqr() * k * k;
        den += a.norm_sqr();
    }
    num / den
}

#[test]
fn unitary_limit_conserves_norm_and_energy() {
    let params = PhysicalParams::new(MASS, 0.0).unwrap();
    let sigma = 1.0e-13;
    let grid = grid(40.0 * sigma, 512);
    let psi0 = WaveFunction::new(
        grid,
        &StateKind::Gaussian {
            center: 3.0 * sigma,
            width: sigma,
        },
    )
    .unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let mut config = PropagatorConfig::new(dt, 10_000);
    config.renormalize = false;
    let mut prop = Propagator::new(grid, EffectiveHamiltonian::noiseless(params), config).unwrap();
    let mut psi = psi0.clone();
    for step in 0..10_000 {
        let factor = prop.step(&mut psi, step as f64 * dt).unwrap();
        assert!((factor - 1.0).abs() < 1e-12, "step {step}: {factor}");
    }
    assert!((psi.norm() - 1.0).abs() < 1e-10);
    let before = mean_k2(&psi0);
    assert!((mean_k2(&psi) / before - 1.0).abs() < 1e-8);
}

#[test]
fn damping_law_without_kinetic_term() {
    let params = params();
    let half = 10.0 * x_c();
    let grid = grid(half, 256);
    let psi0 = WaveFunction::new(
        grid,
        &StateKind::Gaussian {
            center: 0.5 * x_c(),
            width: 2.0 * x_c(),
        },
    )
    .unwrap();
    let hamiltonian = EffectiveHamiltonian::noiseless(params).without_kinetic();
    let dt = 0.5 * bound(&grid, &params, false);
    let n_steps = 400;
    let traj_end = {
        let mut prop = Propagator::new(grid, hamiltonian, PropagatorConfig::new(dt, n_steps)).unwrap();
        let mut psi = psi0.clone();
        prop.run(&mut psi, |_| ControlFlow::Continue(())).unwrap();
        psi
    };
    let t = dt * n_steps as f64;
    let (ia, ib) = (100, 140);
    let (a, b) = (grid.x(ia), grid.x(ib));
    let ratio = |psi: &WaveFunction| psi.amplitudes()[ib].norm_sqr() / psi.amplitudes()[ia].norm_sqr();
    let expected = ratio(&psi0) * (-params.damping_rate() * (b * b - a * a) * t).exp();
    assert!((ratio(&traj_end) / expected - 1.0).abs() < 1e-8);
}

#[test]
fn parity_is_preserved() {
    let params = params();
    let grid = grid(24.0 * x_c(), 512);
    let psi0 = WaveFunction::new(
        grid,
        &StateKind::equal_superposition(&[-6.0 * x_c(), 6.0 * x_c()], x_c()),
    )
    .unwrap();
    let dt = 0.9 * bound(&grid, &params, true);
    let config = PropagatorConfig::new(dt, 2000).with_stride(10);
    let traj = evolve(&psi0, EffectiveHamiltonian::noiseless(params), config, &[]).unwrap();
    for m in &traj.mean_x {
        assert!(m.abs() < 1e-9 * x_c());
    }
}

#[test]
fn fused_run_matches_single_steps() {
    let params = params();
    let grid = grid(16.0 * x_c(), 256);
    let psi0 = WaveFunction::new(
        grid,
        &StateKind::Gaussian {
            center: 2.0 * x_c(),
            width: x_c(),
        },
    )
    .unwrap();
    let noise = NoiseProcess::new(
        NoiseKind::PiecewiseConstantGaussian {
            sigma: x_c(),
            tau: 0.01 / OMEGA,
        },
        7,
    )
    .unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let config = PropagatorConfig::new(dt, 300).with_stride(37);
    let hamiltonian = EffectiveHamiltonian::new(params, noise);

    let mut fused = psi0.clone();
    let mut norms = Vec::new();
    Propagator::new(grid, hamiltonian.clone(), config)
        .unwrap()
        .run(&mut fused, |s| {
            norms.push(s.raw_norm);
            ControlFlow::Continue(())
        })
        .unwrap();

    let mut stepped = psi0.clone();
    let mut prop = Propagator::new(grid, hamiltonian, config).unwrap();
    let mut last = 1.0;
    for step in 0..300 {
        last = prop.step(&mut stepped, step as f64 * dt).unwrap();
    }
    for (a, b) in fused.amplitudes().iter().zip(stepped.amplitudes()) {
        assert!((a - b).norm() < 1e-10 * fused.amplitudes().iter().map(|a| a.norm()).fold(0.0, f64::max));
    }
    assert!((norms.last().unwrap() / last - 1.0).abs() < 1e-12);
}

#[test]
fn schemes_agree_at_half_the_bound() {
    let params = params();
    let grid = grid(16.0 * x_c(), 1024);
    let psi0 = WaveFunction::new(
        grid,
        &StateKind::Gaussian {
            center: 3.0 * x_c(),
            width: 1.5 * x_c(),
        },
    )
    .unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let n_steps = (3.0 / OMEGA / dt).ceil() as u64;
    let config = PropagatorConfig::new(dt, n_steps).with_stride(n_steps / 20);
    let split = evolve(&psi0, EffectiveHamiltonian::noiseless(params), config, &[]).unwrap();
    let cn = evolve(
        &psi0,
        EffectiveHamiltonian::noiseless(params),
        config.with_scheme(Scheme::CrankNicolson),
        &[],
    )
    .unwrap();
    let scale_x = split.mean_x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale_x2 = split.mean_x2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..split.len() {
        assert!((split.mean_x[i] - cn.mean_x[i]).abs() < 1e-3 * scale_x);
        assert!((split.mean_x2[i] - cn.mean_x2[i]).abs() < 1e-3 * scale_x2);
    }
}

#[test]
fn matches_the_gaussian_oracle() {
    let params = params();
    let grid = grid(16.0 * x_c(), 512);
    let kind = StateKind::Gaussian {
        center: 4.0 * x_c(),
        width: 0.7 * x_c(),
    };
    let psi0 = WaveFunction::new(grid, &kind).unwrap();
    let dt = 0.25 * bound(&grid, &params, true);
    let n_steps = (4.0 / OMEGA / dt).ceil() as u64;
    let config = PropagatorConfig::new(dt, n_steps).with_stride(n_steps / 40);
    let traj = evolve(&psi0, EffectiveHamiltonian::noiseless(params), config, &[]).unwrap();
    let oracle = gaussian_oracle(&params, &kind, &traj.times).unwrap();
    let scale_x = 4.0 * x_c();
    let scale_x2 = traj.mean_x2[0];
    for i in 0..traj.len() {
        assert!((traj.mean_x[i] - oracle.mean_x[i]).abs() < 1e-4 * scale_x, "record {i}");
        assert!((traj.mean_x2[i] - oracle.mean_x2[i]).abs() < 1e-4 * scale_x2, "record {i}");
    }
}

#[test]
fn stability_violation_names_the_bound() {
    let params = params();
    let grid = grid(16.0 * x_c(), 256);
    let bounds = StabilityBounds::new(&grid, &params, true);
    let err = Propagator::new(
        grid,
        EffectiveHamiltonian::noiseless(params),
        PropagatorConfig::new(2.0 * bounds.max_dt(), 10),
    )
    .err()
    .unwrap();
    match err {
        Error::Stability { bound, .. } => assert_eq!(bound, bounds.max_dt()),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains(&format!("{:e}", bounds.max_dt())) || err.to_string().contains("bound"));
}

#[test]
fn identical_seeds_are_bit_identical() {
    let params = params();
    let grid = grid(16.0 * x_c(), 256);
    let centers = [-3.0 * x_c(), 3.0 * x_c()];
    let psi0 = WaveFunction::new(grid, &StateKind::equal_superposition(&centers, x_c())).unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let run = |seed| {
        let noise = NoiseProcess::new(
            NoiseKind::PiecewiseConstantGaussian {
                sigma: 2.0 * x_c(),
                tau: 0.05 / OMEGA,
            },
            seed,
        )
        .unwrap();
        evolve(
            &psi0,
            EffectiveHamiltonian::new(params, noise),
            PropagatorConfig::new(dt, 500).with_stride(5),
            &centers,
        )
        .unwrap()
    };
    let a = run(11);
    assert_eq!(a, run(11));
    assert_ne!(a.xi_trace, run(12).xi_trace);
    for row in &a.component_weights {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn vanishing_state_is_a_blow_up() {
    let params = params();
    let grid = grid(16.0 * x_c(), 64);
    let mut psi = WaveFunction::from_amplitudes(grid, vec![Complex64::default(); 64]).unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let mut prop = Propagator::new(
        grid,
        EffectiveHamiltonian::noiseless(params),
        PropagatorConfig::new(dt, 5),
    )
    .unwrap();
    match prop.run(&mut psi, |_| ControlFlow::Continue(())) {
        Err(Error::BlowUp { step, .. }) => assert_eq!(step, 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn spreading_into_the_edges_is_flagged() {
    let params = PhysicalParams::new(MASS, 0.0).unwrap();
    let sigma = 1.0e-13;
    let grid = grid(10.0 * sigma, 256);
    let psi0 = WaveFunction::new(grid, &StateKind::Gaussian { center: 0.0, width: sigma }).unwrap();
    let dt = 0.5 * bound(&grid, &params, true);
    let spread = 2.0 * MASS * sigma * sigma / HBAR;
    let n_steps = (20.0 * spread / dt) as u64;
    let traj = evolve(
        &psi0,
        EffectiveHamiltonian::noiseless(params),
        PropagatorConfig::new(dt, n_steps).with_stride(n_steps),
        &[],
    )
    .unwrap();
    assert!(traj.boundary_violation);

    let confined = evolve(
        &psi0,
        EffectiveHamiltonian::noiseless(params),
        PropagatorConfig::new(dt, 10),
        &[],
    )
    .unwrap();
    assert!(!confined.boundary_violation);
}

#[test]
fn hermitian_only_without_coupling() {
    assert!(EffectiveHamiltonian::noiseless(PhysicalParams::new(MASS, 0.0).unwrap()).is_hermitian());
    assert!(!EffectiveHamiltonian::noiseless(params()).is_hermitian());
}
