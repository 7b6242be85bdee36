use crate::{Complex64, Grid, PhysicalParams};

/// Crank–Nicolson step `(1 + iΔtH/2ħ)ψ' = (1 − iΔtH/2ħ)ψ` with a second-order
/// periodic finite-difference Laplacian. Used to cross-check the spectral scheme.
pub(crate) struct CrankNicolson {
    positions: Vec<f64>,
    /// `iΔt/(2ħ)`
    half_step: Complex64,
    /// `ħ²/(2Nm·dx²)`, zero when the kinetic term is disabled.
    hopping: f64,
    /// `Nm·ω²/2`
    curvature: f64,
    diag: Vec<Complex64>,
    rhs: Vec<Complex64>,
    work: Tridiagonal,
}

impl CrankNicolson {
    pub(crate) fn new(grid: &Grid, params: &PhysicalParams, dt: f64, kinetic: bool) -> Self {
        let n = grid.len();
        let dx = grid.dx();
        CrankNicolson {
            positions: grid.positions().collect(),
            half_step: Complex64::new(0.0, dt / (2.0 * params.hbar)),
            hopping: if kinetic {
                params.hbar * params.hbar / (2.0 * params.total_mass * dx * dx)
            } else {
                0.0
            },
            curvature: 0.5 * params.coupling(),
            diag: vec![Complex64::default(); n],
            rhs: vec![Complex64::default(); n],
            work: Tridiagonal::new(n),
        }
    }

    pub(crate) fn step(&mut self, psi: &mut [Complex64], xi: f64) {
        let n = psi.len();
        let off = -self.hopping;
        // diagonal of H: 2·hopping − (i/2)Nmω²(x − ξ)²
        for (d, x) in self.diag.iter_mut().zip(&self.positions) {
            let u = x - xi;
            *d = Complex64::new(2.0 * self.hopping, -self.curvature * u * u);
        }
        for j in 0..n {
            let left = psi[(j + n - 1) % n];
            let right = psi[(j + 1) % n];
            let h_psi = self.diag[j] * psi[j] + off * (left + right);
            self.rhs[j] = psi[j] - self.half_step * h_psi;
        }
        let one = Complex64::new(1.0, 0.0);
        let diag: Vec<Complex64> = self.diag.iter().map(|d| one + self.half_step * d).collect();
        let off = self.half_step * off;
        self.work.solve_cyclic(&diag, off, &self.rhs, psi);
    }
}

/// Workspace for a cyclic tridiagonal system with constant off-diagonals.
struct Tridiagonal {
    modified: Vec<Complex64>,
    gamma: Vec<Complex64>,
    correction: Vec<Complex64>,
    unit: Vec<Complex64>,
}

impl Tridiagonal {
    fn new(n: usize) -> Self {
        Tridiagonal {
            modified: vec![Complex64::default(); n],
            gamma: vec![Complex64::default(); n],
            correction: vec![Complex64::default(); n],
            unit: vec![Complex64::default(); n],
        }
    }

    /// Solves `A x = rhs` where `A` has diagonal `diag`, every off-diagonal and
    /// both periodic corners equal to `off` (Sherman–Morrison on the corners).
    fn solve_cyclic(
        &mut self,
        diag: &[Complex64],
        off: Complex64,
        rhs: &[Complex64],
        x: &mut [Complex64],
    ) {
        let n = diag.len();
        if off == Complex64::default() {
            x.iter_mut()
                .zip(rhs.iter().zip(diag))
                .for_each(|(xi, (r, d))| *xi = r / d);
            return;
        }
        let gamma = -diag[0];
        self.modified.copy_from_slice(diag);
        self.modified[0] = diag[0] - gamma;
        self.modified[n - 1] = diag[n - 1] - off * off / gamma;

        self.unit.iter_mut().for_each(|u| *u = Complex64::default());
        self.unit[0] = gamma;
        self.unit[n - 1] = off;

        thomas(&self.modified, off, rhs, x, &mut self.gamma);
        let unit = std::mem::take(&mut self.unit);
        let mut correction = std::mem::take(&mut self.correction);
        thomas(&self.modified, off, &unit, &mut correction, &mut self.gamma);

        let factor = (x[0] + off * x[n - 1] / gamma)
            / (Complex64::new(1.0, 0.0) + correction[0] + off * correction[n - 1] / gamma);
        x.iter_mut()
            .zip(&correction)
            .for_each(|(xi, z)| *xi -= factor * z);
        self.unit = unit;
        self.correction = correction;
    }
}

fn thomas(
    diag: &[Complex64],
    off: Complex64,
    rhs: &[Complex64],
    x: &mut [Complex64],
    gamma: &mut [Complex64],
) {
    let n = diag.len();
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for j in 1..n {
        gamma[j] = off / beta;
        beta = diag[j] - off * gamma[j];
        x[j] = (rhs[j] - off * x[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        let next = x[j + 1];
        x[j] -= gamma[j + 1] * next;
    }
}
