use serde::{Deserialize, Serialize};

use crate::{Error, Result, HBAR};

/// Total mass, order-parameter field strength and ħ of one collective coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// `Nm`, kg.
    pub total_mass: f64,
    /// `ω`, s⁻¹.
    pub omega: f64,
    /// J·s.
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

fn default_hbar() -> f64 {
    HBAR
}

impl PhysicalParams {
    pub fn new(total_mass: f64, omega: f64) -> Result<Self> {
        Self::with_hbar(total_mass, omega, HBAR)
    }

    pub fn with_hbar(total_mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        let params = PhysicalParams {
            total_mass,
            omega,
            hbar,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_mass.is_finite() && self.total_mass > 0.0) {
            return Err(Error::InvalidParameter {
                name: "total_mass",
                reason: format!("must be positive, got {}", self.total_mass),
            });
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be non-negative, got {}", self.omega),
            });
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hbar",
                reason: format!("must be positive, got {}", self.hbar),
            });
        }
        Ok(())
    }

    /// `sqrt(ħ/(Nm·ω))`, the width scale of the localized states. `None` when ω = 0.
    pub fn x_c(&self) -> Option<f64> {
        (self.omega > 0.0).then(|| (self.hbar / (self.total_mass * self.omega)).sqrt())
    }

    /// `Nm·ω²/ħ` in m⁻²·s⁻¹: the density `|ψ(x)|²` decays as `exp(−rate·x²·t)`
    /// under the imaginary potential alone.
    pub fn damping_rate(&self) -> f64 {
        self.total_mass * self.omega * self.omega / self.hbar
    }

    /// `Nm·ω²`, the collapse variable of the reduction timescale.
    pub fn coupling(&self) -> f64 {
        self.total_mass * self.omega * self.omega
    }

    /// `1/ω`. Infinite for ω = 0.
    pub fn tau_slow(&self) -> f64 {
        1.0 / self.omega
    }

    /// `ħ/(Nm·ω²·x_ref²)`, the reduction time of a superposition of spatial scale `x_ref`.
    pub fn tau_reduction(&self, x_ref: f64) -> f64 {
        self.hbar / (self.coupling() * x_ref * x_ref)
    }

    /// `ħ/(Nm·ω)`, the steady-state `<x²>` scale.
    pub fn spread_scale(&self) -> f64 {
        self.hbar / (self.total_mass * self.omega)
    }
}
