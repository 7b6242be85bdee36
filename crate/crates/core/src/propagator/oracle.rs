//! Closed Gaussian dynamics for `ξ = 0`.
//!
//! `ψ = exp(−a x²/2 + b x + c)` stays Gaussian under
//! `iħ∂ψ/∂t = [p²/(2Nm) − (i/2)Nmω²x²]ψ`, with
//!
//! ```text
//! ȧ = −i(ħ/Nm)a² + Nmω²/ħ
//! ḃ = −i(ħ/Nm)ab
//! ċ = i(ħ/2Nm)(b² − a)
//! ```
//!
//! These are integrated in units of the initial width `σ` and `Nmσ²/ħ` with an
//! adaptive Dormand–Prince 5(4) scheme. Nothing here touches the grid.

use super::Trajectory;
use crate::{Complex64, Error, PhysicalParams, Result, StateKind};

const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-12;
const MAX_STEPS: usize = 10_000_000;

type State = [Complex64; 3];

/// Evolves a single Gaussian without a grid and returns the same observables
/// as [`super::Propagator::evolve`] at the times `t_grid`.
///
/// `raw_norm` holds the norm of the unnormalized evolution relative to t = 0.
/// No component weights are recorded.
pub fn gaussian_oracle(
    params: &PhysicalParams,
    initial: &StateKind,
    t_grid: &[f64],
) -> Result<Trajectory> {
    params.validate()?;
    let (center, width) = match initial {
        StateKind::Gaussian { center, width } => (*center, *width),
        StateKind::Superposition { components } if components.len() == 1 => {
            (components[0].center, components[0].width)
        }
        _ => return Err(Error::NotGaussian),
    };
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "width",
            reason: format!("must be positive, got {width}"),
        });
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            reason: "times must be non-negative and sorted".into(),
        });
    }

    let length = width;
    let time_unit = params.total_mass * length * length / params.hbar;
    let lambda = (params.total_mass * params.omega * length * length / params.hbar).powi(2);
    let rhs = move |y: &State| -> State {
        let [a, b, _] = *y;
        let i = Complex64::i();
        [-i * a * a + lambda, -i * a * b, 0.5 * i * (b * b - a)]
    };

    let u0 = center / length;
    let mut y: State = [
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5 * u0, 0.0),
        Complex64::new(-0.25 * u0 * u0, 0.0),
    ];
    let log_norm0 = log_norm(&y);

    let mut trajectory = Trajectory::new(&[])?;
    let mut s = 0.0;
    let mut h = 1e-3 / (1.0 + lambda.sqrt());
    for &t in t_grid {
        let target = t / time_unit;
        if target > s {
            h = integrate(&rhs, &mut y, s, target, h)?;
            s = target;
        }
        let (a_r, b_r) = (y[0].re, y[1].re);
        if !(a_r > 0.0) {
            return Err(Error::Integration(format!(
                "Gaussian lost normalizability at t = {t:e} s"
            )));
        }
        let mean = b_r / a_r;
        let variance = 0.5 / a_r;
        trajectory.push(
            t,
            mean * length,
            (variance + mean * mean) * length * length,
            (log_norm(&y) - log_norm0).exp(),
            0.0,
        );
    }
    Ok(trajectory)
}

/// `ln ∫|ψ|² du` for the scaled Gaussian.
fn log_norm(y: &State) -> f64 {
    let (a_r, b_r, c_r) = (y[0].re, y[1].re, y[2].re);
    0.5 * (std::f64::consts::PI / a_r).ln() + 2.0 * c_r + b_r * b_r / a_r
}

// Dormand–Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (coeff, k) in terms {
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += ki * (coeff * h);
        }
    }
    out
}

/// Advances `y` from `s` to `end`, landing exactly on `end`. Returns the last
/// accepted step size as a hint for the next call.
fn integrate<F>(f: &F, y: &mut State, mut s: f64, end: f64, mut h: f64) -> Result<f64>
where
    F: Fn(&State) -> State,
{
    let mut steps = 0;
    let mut k1 = f(y);
    while s < end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Integration("step budget exhausted".into()));
        }
        let last = s + h >= end;
        let step = if last { end - s } else { h };
        let k2 = f(&combine(y, &[(A21, &k1)], step));
        let k3 = f(&combine(y, &[(A31, &k1), (A32, &k2)], step));
        let k4 = f(&combine(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step));
        let k5 = f(&combine(
            y,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            step,
        ));
        let k6 = f(&combine(
            y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            step,
        ));
        let next = combine(
            y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            step,
        );
        let k7 = f(&next);
        let err_vec = combine(
            &[Complex64::default(); 3],
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
            step,
        );
        let mut sum = 0.0;
        for ((e, old), new) in err_vec.iter().zip(y.iter()).zip(next.iter()) {
            let scale_re = ATOL + RTOL * old.re.abs().max(new.re.abs());
            let scale_im = ATOL + RTOL * old.im.abs().max(new.im.abs());
            sum += (e.re / scale_re).powi(2) + (e.im / scale_im).powi(2);
        }
        let err = (sum / 6.0).sqrt();
        if !err.is_finite() {
            return Err(Error::Integration("non-finite error estimate".into()));
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            *y = next;
            k1 = k7;
            s = if last { end } else { s + step };
            if !last {
                h = step * factor;
            }
        } else {
            h = step * factor.min(1.0);
            if h < 1e-14 * end.abs().max(1.0) {
                return Err(Error::Integration("step size underflow".into()));
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::HBAR;

    #[test]
    fn free_spreading() {
        let params = PhysicalParams::new(1.0e-11, 0.0).unwrap();
        let sigma = 1.0e-13;
        let kind = StateKind::Gaussian {
            center: 2.0e-13,
            width: sigma,
        };
        let spreading = 2.0 * params.total_mass * sigma * sigma / HBAR;
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25 * spreading).collect();
        let traj = gaussian_oracle(&params, &kind, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let expected = sigma * sigma + (HBAR * t / (2.0 * params.total_mass * sigma)).powi(2);
            assert!((traj.variance(i) / expected - 1.0).abs() < 1e-8, "t = {t}");
            assert!((traj.mean_x[i] / 2.0e-13 - 1.0).abs() < 1e-9);
            assert!((traj.raw_norm[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn steady_spread_is_hbar_over_mass_omega() {
        let params = PhysicalParams::new(1.0e-11, 1.0e3).unwrap();
        let x_c = params.x_c().unwrap();
        let kind = StateKind::Gaussian {
            center: 0.0,
            width: 3.0 * x_c,
        };
        let traj = gaussian_oracle(&params, &kind, &[0.0, 40.0 / params.omega]).unwrap();
        // stationary a = e^{-iπ/4}/x_c², so <x²> = x_c²/(2 cos(π/4))
        let expected = params.spread_scale() / 2f64.sqrt();
        assert!((traj.mean_x2[1] / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn drift_rate_is_independent_of_mass() {
        // Same initial state measured in x_c, two masses: <x>(tω)/x₀ coincide.
        let run = |mass: f64| {
            let params = PhysicalParams::new(mass, 1.0e3).unwrap();
            let x_c = params.x_c().unwrap();
            let kind = StateKind::Gaussian {
                center: 5.0 * x_c,
                width: 0.5 * x_c,
            };
            let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1 / params.omega).collect();
            let traj = gaussian_oracle(&params, &kind, &times).unwrap();
            traj.mean_x.iter().map(|m| m / (5.0 * x_c)).collect::<Vec<_>>()
        };
        let light = run(1.0e-11);
        let heavy = run(1.0e-10);
        for (a, b) in light.iter().zip(&heavy) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(light.last().unwrap().abs() < 0.1);
    }

    #[test]
    fn rejects_non_gaussian_states() {
        let params = PhysicalParams::new(1.0e-11, 1.0e3).unwrap();
        assert_eq!(
            gaussian_oracle(&params, &StateKind::Uniform, &[0.0]).unwrap_err(),
            Error::NotGaussian
        );
        let pair = StateKind::equal_superposition(&[-1e-12, 1e-12], 1e-13);
        assert_eq!(
            gaussian_oracle(&params, &pair, &[0.0]).unwrap_err(),
            Error::NotGaussian
        );
    }
}
