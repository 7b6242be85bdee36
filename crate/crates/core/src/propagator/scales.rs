use serde::Serialize;

use crate::{PhysicalParams, G};

/// Order-parameter frequency of a body of mass `M` (kg) and size `L` (m):
/// `ω = sqrt(G·M/L³)` in rad/s. Both arguments must be positive.
pub fn gravity_omega(mass: f64, size: f64) -> f64 {
    (G * mass / size.powi(3)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimescaleEstimates {
    /// `ħ/(Nmω²x_ref²)`, s
    pub tau_red: f64,
    /// `1/ω`, s
    pub tau_slow: f64,
}

/// Order-of-magnitude reduction and relaxation times. `x_ref` is the spatial
/// scale of the superposition; the reduction time carries its `1/x_ref²`.
pub fn timescale_estimates(params: &PhysicalParams, x_ref: f64) -> TimescaleEstimates {
    TimescaleEstimates {
        tau_red: params.tau_reduction(x_ref),
        tau_slow: params.tau_slow(),
    }
}
