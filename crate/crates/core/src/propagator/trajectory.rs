use serde::Serialize;

use super::{Sample, BOUNDARY_CELLS, BOUNDARY_MASS_LIMIT};
use crate::wavefunction::VoronoiCells;
use crate::{Result, WaveFunction};

/// Recorded time series of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    /// s
    pub times: Vec<f64>,
    /// m
    pub mean_x: Vec<f64>,
    /// m²
    pub mean_x2: Vec<f64>,
    /// Tracked component centres, m.
    pub centers: Vec<f64>,
    /// One row per record: Voronoi weights of `centers`, normalized to sum to 1.
    pub component_weights: Vec<Vec<f64>>,
    /// Pre-normalization norm factor of the step that produced each record.
    pub raw_norm: Vec<f64>,
    /// `ξ` of the step that produced each record, m.
    pub xi_trace: Vec<f64>,
    /// Largest boundary mass seen in any record after t = 0.
    pub peak_boundary_mass: f64,
    /// Boundary mass of the final state.
    pub final_boundary_mass: f64,
    /// The final state has more than [`BOUNDARY_MASS_LIMIT`] near the periodic edges.
    pub boundary_violation: bool,
    #[serde(skip)]
    cells: Option<VoronoiCells>,
}

impl Trajectory {
    pub fn new(centers: &[f64]) -> Result<Self> {
        let cells = if centers.is_empty() {
            None
        } else {
            Some(VoronoiCells::new(centers)?)
        };
        Ok(Trajectory {
            centers: centers.to_vec(),
            cells,
            ..Default::default()
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.mean_x2[i] - self.mean_x[i] * self.mean_x[i]
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.variance(i)).collect()
    }

    /// Appends one record of raw values (no wavefunction available).
    pub fn push(&mut self, time: f64, mean_x: f64, mean_x2: f64, raw_norm: f64, xi: f64) {
        self.times.push(time);
        self.mean_x.push(mean_x);
        self.mean_x2.push(mean_x2);
        self.raw_norm.push(raw_norm);
        self.xi_trace.push(xi);
    }

    /// Every `stride`-th record plus the last one.
    pub fn thinned(&self, stride: usize) -> Trajectory {
        let n = self.len();
        let stride = stride.max(1);
        let keep: Vec<usize> = (0..n).filter(|i| i % stride == 0 || i + 1 == n).collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Trajectory {
            times: pick(&self.times),
            mean_x: pick(&self.mean_x),
            mean_x2: pick(&self.mean_x2),
            centers: self.centers.clone(),
            component_weights: if self.component_weights.is_empty() {
                Vec::new()
            } else {
                keep.iter().map(|&i| self.component_weights[i].clone()).collect()
            },
            raw_norm: pick(&self.raw_norm),
            xi_trace: pick(&self.xi_trace),
            peak_boundary_mass: self.peak_boundary_mass,
            final_boundary_mass: self.final_boundary_mass,
            boundary_violation: self.boundary_violation,
            cells: self.cells.clone(),
        }
    }

    pub(crate) fn record_sample(&mut self, sample: &Sample<'_>) {
        let obs = sample.psi.observables();
        self.push(sample.time, obs.mean_x, obs.mean_x2, sample.raw_norm, sample.xi);
        if let Some(cells) = &self.cells {
            let mut weights = vec![0.0; self.centers.len()];
            cells.accumulate(sample.psi.grid(), sample.psi.density(), &mut weights);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            self.component_weights.push(weights);
        }
        if sample.step > 0 {
            let edge = sample.psi.boundary_mass(BOUNDARY_CELLS) / obs.norm;
            self.peak_boundary_mass = self.peak_boundary_mass.max(edge);
        }
    }

    pub(crate) fn finish(&mut self, psi: &WaveFunction) {
        self.final_boundary_mass = psi.boundary_mass(BOUNDARY_CELLS) / psi.norm();
        self.boundary_violation = self.final_boundary_mass > BOUNDARY_MASS_LIMIT;
    }
}
