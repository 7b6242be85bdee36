use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::{Complex64, Grid, PhysicalParams};

/// Strang splitting `K/2 · V · K/2` with a spectral kinetic factor and a
/// pointwise real damping factor.
pub(crate) struct SplitStep {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// `exp(−iħk²dt/(4Nm))/n`, FFT normalization folded in.
    half_kinetic: Vec<Complex64>,
    /// `exp(−iħk²dt/(2Nm))/n`, two consecutive half steps fused.
    full_kinetic: Vec<Complex64>,
    kinetic: bool,
    positions: Vec<f64>,
    /// `Nm·ω²·dt/(2ħ)`
    damping_coeff: f64,
    damping: Vec<f64>,
    cached_xi: Option<f64>,
}

impl SplitStep {
    pub(crate) fn new(grid: &Grid, params: &PhysicalParams, dt: f64, kinetic: bool) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        let inv_n = 1.0 / n as f64;
        let phase = params.hbar * dt / (2.0 * params.total_mass);
        let wavenumbers = grid.wavenumbers();
        let factor = |fraction: f64| -> Vec<Complex64> {
            wavenumbers
                .iter()
                .map(|k| Complex64::from_polar(inv_n, -fraction * phase * k * k))
                .collect()
        };
        SplitStep {
            fft,
            ifft,
            scratch: vec![Complex64::default(); scratch_len],
            half_kinetic: factor(0.5),
            full_kinetic: factor(1.0),
            kinetic,
            positions: grid.positions().collect(),
            damping_coeff: params.coupling() * dt / (2.0 * params.hbar),
            damping: vec![1.0; n],
            cached_xi: None,
        }
    }

    pub(crate) fn half_kinetic(&mut self, psi: &mut [Complex64]) {
        if self.kinetic {
            let factors = std::mem::take(&mut self.half_kinetic);
            self.apply_kinetic(psi, &factors);
            self.half_kinetic = factors;
        }
    }

    pub(crate) fn full_kinetic(&mut self, psi: &mut [Complex64]) {
        if self.kinetic {
            let factors = std::mem::take(&mut self.full_kinetic);
            self.apply_kinetic(psi, &factors);
            self.full_kinetic = factors;
        }
    }

    fn apply_kinetic(&mut self, psi: &mut [Complex64], factors: &[Complex64]) {
        self.fft.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(factors).for_each(|(a, f)| *a *= f);
        self.ifft.process_with_scratch(psi, &mut self.scratch);
    }

    /// Multiplies by `exp(−(Nmω²/2ħ)(x − ξ)²dt)`.
    pub(crate) fn potential(&mut self, psi: &mut [Complex64], xi: f64) {
        if self.damping_coeff == 0.0 {
            return;
        }
        if self.cached_xi != Some(xi) {
            let c = self.damping_coeff;
            for (d, x) in self.damping.iter_mut().zip(&self.positions) {
                let u = x - xi;
                *d = (-c * u * u).exp();
            }
            self.cached_xi = Some(xi);
        }
        psi.iter_mut().zip(&self.damping).for_each(|(a, d)| *a *= d);
    }
}
