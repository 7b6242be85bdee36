use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Grid, Result};

/// One localized Gaussian component of a superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// m
    pub center: f64,
    /// Standard deviation of `|ψ|²`, m.
    pub width: f64,
    /// Complex amplitude; rescaled so that `Σ|weight|² = 1` across the superposition.
    #[serde(default = "unit_weight")]
    pub weight: Complex64,
}

fn unit_weight() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl ComponentSpec {
    pub fn new(center: f64, width: f64, weight: Complex64) -> Self {
        ComponentSpec {
            center,
            width,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateKind {
    /// Constant amplitude over the whole grid (the `p = 0` state).
    Uniform,
    Gaussian { center: f64, width: f64 },
    Superposition { components: Vec<ComponentSpec> },
}

impl StateKind {
    /// Equal-weight superposition of Gaussians of common `width` at `centers`.
    pub fn equal_superposition(centers: &[f64], width: f64) -> Self {
        StateKind::Superposition {
            components: centers
                .iter()
                .map(|&c| ComponentSpec::new(c, width, unit_weight()))
                .collect(),
        }
    }

    /// Component centres tracked by [`WaveFunction::component_weights`].
    /// A single Gaussian counts as one component; the uniform state has none.
    pub fn centers(&self) -> Vec<f64> {
        match self {
            StateKind::Uniform => Vec::new(),
            StateKind::Gaussian { center, .. } => vec![*center],
            StateKind::Superposition { components } => {
                components.iter().map(|c| c.center).collect()
            }
        }
    }
}

/// `(norm, <x>, <x²>)` of a wavefunction, evaluated as plain dx-weighted sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub norm: f64,
    pub mean_x: f64,
    pub mean_x2: f64,
}

impl Observables {
    pub fn variance(&self) -> f64 {
        self.mean_x2 - self.mean_x * self.mean_x
    }
}

/// Complex amplitudes on a [`Grid`] with norm `Σ|ψ_i|²·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn from_amplitudes(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!(
                    "expected {} amplitudes, got {}",
                    grid.len(),
                    amplitudes.len()
                ),
            });
        }
        Ok(WaveFunction { grid, amplitudes })
    }

    /// Builds a normalized state of the requested kind.
    pub fn new(grid: Grid, kind: &StateKind) -> Result<Self> {
        let amplitudes = match kind {
            StateKind::Uniform => vec![Complex64::new(1.0, 0.0); grid.len()],
            StateKind::Gaussian { center, width } => {
                check_margin(&grid, *center, *width)?;
                grid.positions()
                    .map(|x| Complex64::new(gaussian_amplitude(x, *center, *width), 0.0))
                    .collect()
            }
            StateKind::Superposition { components } => {
                if components.is_empty() {
                    return Err(Error::EmptyInput("superposition without components"));
                }
                let total: f64 = components.iter().map(|c| c.weight.norm_sqr()).sum();
                if !(total > 0.0 && total.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "weight",
                        reason: "component weights must not all vanish".into(),
                    });
                }
                for c in components {
                    check_margin(&grid, c.center, c.width)?;
                }
                let scale = total.sqrt().recip();
                grid.positions()
                    .map(|x| {
                        components
                            .iter()
                            .map(|c| c.weight * scale * gaussian_amplitude(x, c.center, c.width))
                            .sum()
                    })
                    .collect()
            }
        };
        let mut psi = WaveFunction { grid, amplitudes };
        psi.normalize();
        Ok(psi)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn density(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a.norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.density().sum::<f64>() * self.grid.dx()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm();
        if norm > 0.0 && norm.is_finite() {
            let scale = norm.sqrt().recip();
            self.amplitudes.iter_mut().for_each(|a| *a *= scale);
        }
        norm
    }

    /// Moments of `|ψ|²`. `<x>` and `<x²>` are divided by the norm so they stay
    /// meaningful for unnormalized states.
    pub fn observables(&self) -> Observables {
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (x, p) in self.grid.positions().zip(self.density()) {
            m0 += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        let dx = self.grid.dx();
        let norm = m0 * dx;
        Observables {
            norm,
            mean_x: m1 / m0,
            mean_x2: m2 / m0,
        }
    }

    /// Probability in the 1-D Voronoi cell of each centre (nearest-centre
    /// partition of the grid). The weights add up to the norm.
    pub fn component_weights(&self, centers: &[f64]) -> Result<Vec<f64>> {
        let cells = VoronoiCells::new(centers)?;
        let mut weights = vec![0.0; centers.len()];
        cells.accumulate(&self.grid, self.density(), &mut weights);
        let dx = self.grid.dx();
        weights.iter_mut().for_each(|w| *w *= dx);
        Ok(weights)
    }

    /// Probability within `cells` grid points of either end of the periodic domain.
    pub fn boundary_mass(&self, cells: usize) -> f64 {
        let n = self.amplitudes.len();
        let cells = cells.min(n / 2);
        let edge: f64 = self.amplitudes[..cells]
            .iter()
            .chain(&self.amplitudes[n - cells..])
            .map(|a| a.norm_sqr())
            .sum();
        edge * self.grid.dx()
    }
}

/// Nearest-centre partition of the real line, in 1-D bounded by midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCells {
    /// Centre indices sorted by position.
    order: Vec<usize>,
    /// Midpoints between consecutive sorted centres.
    bisectors: Vec<f64>,
}

impl VoronoiCells {
    pub fn new(centers: &[f64]) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::NoCenters);
        }
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
        for pair in order.windows(2) {
            if centers[pair[0]] == centers[pair[1]] {
                return Err(Error::DuplicateCenters(centers[pair[0]]));
            }
        }
        let bisectors = order
            .windows(2)
            .map(|pair| 0.5 * (centers[pair[0]] + centers[pair[1]]))
            .collect();
        Ok(VoronoiCells { order, bisectors })
    }

    /// Adds each density sample to the cell containing its grid node.
    pub fn accumulate(
        &self,
        grid: &Grid,
        density: impl Iterator<Item = f64>,
        weights: &mut [f64],
    ) {
        let mut cell = 0;
        for (x, p) in grid.positions().zip(density) {
            while cell < self.bisectors.len() && x >= self.bisectors[cell] {
                cell += 1;
            }
            weights[self.order[cell]] += p;
        }
    }
}

/// Amplitude of a normalized Gaussian whose density has standard deviation `width`.
fn gaussian_amplitude(x: f64, center: f64, width: f64) -> f64 {
    let u = (x - center) / width;
    (-0.25 * u * u).exp()
}

fn check_margin(grid: &Grid, center: f64, width: f64) -> Result<()> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "width",
            reason: format!("must be positive, got {width}"),
        });
    }
    let lo = grid.x_min() + 4.0 * width;
    let hi = grid.x_max() - 4.0 * width;
    if !(center >= lo && center <= hi) {
        return Err(Error::OutsideMargin {
            center,
            width,
            lo,
            hi,
        });
    }
    Ok(())
}
