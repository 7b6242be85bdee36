use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform periodic grid on `[x_min, x_max)`.
///
/// Nodes sit at cell centres, `x_i = x_min + (i + 1/2)·dx`, so a grid that is
/// symmetric about the origin is mapped onto itself by parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.x_min, spec.x_max, spec.n_points)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        GridSpec {
            x_min: grid.x_min,
            x_max: grid.x_max,
            n_points: grid.n_points,
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::GridExtent { x_min, x_max });
        }
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::GridPoints(n_points));
        }
        Ok(Grid {
            x_min,
            x_max,
            n_points,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    /// Grid centred on the origin with half-extent `half_width`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Grid::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Largest distance of any point of the domain from the origin.
    pub fn edge_distance(&self) -> f64 {
        self.x_min.abs().max(self.x_max.abs())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Angular wavenumbers in FFT order: `0, 1, …, n/2 − 1, −n/2, …, −1` times `2π/L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * PI / self.extent();
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n } as f64 * dk)
            .collect()
    }

    /// Nyquist wavenumber `π/dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }
}
