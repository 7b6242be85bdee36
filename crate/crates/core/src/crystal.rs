//! Equilibrium side of the harmonic chain: phonons, the thin spectrum and the
//! symmetry-broken collective ground state.
//!
//! Only coefficients and energies are computed; no operator algebra is carried.

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Grid, PhysicalParams, Result, WaveFunction, HBAR};

/// One-dimensional chain of `n_atoms` masses coupled by springs of stiffness `spring`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalModel {
    pub n_atoms: u64,
    /// kg
    pub atom_mass: f64,
    /// N/m
    pub spring: f64,
    /// m
    pub lattice_const: f64,
    /// Length of the box quantizing the total momentum, m.
    #[serde(default = "default_box")]
    pub box_length: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

fn default_box() -> f64 {
    1.0
}

fn default_hbar() -> f64 {
    HBAR
}

impl CrystalModel {
    pub fn new(n_atoms: u64, atom_mass: f64, spring: f64, lattice_const: f64) -> Result<Self> {
        let model = CrystalModel {
            n_atoms,
            atom_mass,
            spring,
            lattice_const,
            box_length: default_box(),
            hbar: HBAR,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_box_length(mut self, box_length: f64) -> Result<Self> {
        self.box_length = box_length;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 2 {
            return Err(Error::InvalidParameter {
                name: "n_atoms",
                reason: format!("a chain needs at least 2 atoms, got {}", self.n_atoms),
            });
        }
        for (name, value) in [
            ("atom_mass", self.atom_mass),
            ("spring", self.spring),
            ("lattice_const", self.lattice_const),
            ("box_length", self.box_length),
            ("hbar", self.hbar),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {value}"),
                });
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.n_atoms as f64 * self.atom_mass
    }

    /// `ħ·sqrt(κ/m)`, the natural phonon energy unit.
    pub fn energy_unit(&self) -> f64 {
        self.hbar * (self.spring / self.atom_mass).sqrt()
    }

    /// Single-phonon energy `2ħ·sqrt(κ/m)·|sin(ka/2)|`, J.
    pub fn dispersion(&self, k: f64) -> Result<f64> {
        if k == 0.0 {
            return Err(Error::ThinSpectrumWavenumber);
        }
        Ok(2.0 * self.energy_unit() * (0.5 * k * self.lattice_const).sin().abs())
    }

    /// Rotation that removes the anomalous `b†b†` and `bb` terms at wavenumber `k`.
    pub fn bogoliubov(&self, k: f64) -> Result<BogoliubovCoeffs> {
        if k == 0.0 {
            return Err(Error::BogoliubovDivergence);
        }
        let ka = k * self.lattice_const;
        let cos = ka.cos();
        let half_sin = (0.5 * ka).sin();
        // tanh(2u) = cos/(2 − cos) is equivalent to e^{−4u} = 1 − cos = 2 sin²(ka/2);
        // the sine form keeps full precision as ka → 0.
        let rapidity = -0.25 * (2.0 * half_sin * half_sin).ln();
        if !rapidity.is_finite() {
            return Err(Error::BogoliubovDivergence);
        }
        Ok(BogoliubovCoeffs {
            k,
            a_k: 2.0 - cos,
            b_k: -cos,
            rapidity,
            cosh_u: rapidity.cosh(),
            sinh_u: rapidity.sinh(),
        })
    }

    /// Thin-spectrum levels `E_n = p_n²/(2Nm)` with `p_n = 2πħn/L_box`, for `n = 0..=n_max`.
    pub fn thin_spectrum_energies(&self, n_max: u64) -> Vec<f64> {
        let dp = 2.0 * std::f64::consts::PI * self.hbar / self.box_length;
        let two_m = 2.0 * (self.n_atoms as f64 * self.atom_mass);
        (0..=n_max)
            .map(|n| {
                let p = dp * n as f64;
                p * p / two_m
            })
            .collect()
    }
}

/// Bogoliubov coefficients at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BogoliubovCoeffs {
    pub k: f64,
    pub a_k: f64,
    pub b_k: f64,
    /// `u_k`
    pub rapidity: f64,
    pub cosh_u: f64,
    pub sinh_u: f64,
}

impl BogoliubovCoeffs {
    /// Coefficient of `b†b† + bb` after the rotation:
    /// `A·sinh·cosh + (B/2)(cosh² + sinh²)`; zero for the diagonalizing choice.
    pub fn off_diagonal(&self) -> f64 {
        let (c, s) = (self.cosh_u, self.sinh_u);
        self.a_k * s * c + 0.5 * self.b_k * (c * c + s * s)
    }

    /// [`Self::off_diagonal`] relative to the coefficient scale
    /// `(|A| + |B|)(cosh² + sinh²)/2`, which stays finite where both
    /// cancelling terms vanish (ka = π/2).
    pub fn off_diagonal_relative(&self) -> f64 {
        let (c, s) = (self.cosh_u, self.sinh_u);
        let scale = 0.5 * (self.a_k.abs() + self.b_k.abs()) * (c * c + s * s);
        self.off_diagonal().abs() / scale
    }

    /// Quasiparticle energy `sqrt(A² − B²)` in units of `ħ·sqrt(κ/(2m))`;
    /// equals the dispersion once the unit is restored.
    pub fn quasiparticle_energy(&self) -> f64 {
        // A² − B² = 8 sin²(ka/2) = 4e^{−4u}; the rapidity form avoids the
        // cancellation in A + B = 2 − 2cos ka at small ka.
        2.0 * (-2.0 * self.rapidity).exp()
    }
}

/// Ground state `(Nmω/πħ)^{1/4} exp(−Nmω x²/(2ħ))` of the collective coordinate
/// in the field `(1/2)Nmω²x²`, sampled on `grid` and normalized.
pub fn sb_ground_state(grid: Grid, params: &PhysicalParams) -> Result<WaveFunction> {
    let x_c = params.x_c().ok_or(Error::InvalidParameter {
        name: "omega",
        reason: "the symmetry-broken ground state needs omega > 0".into(),
    })?;
    let resolvable =
        grid.dx() <= x_c / 8.0 && grid.x_min() <= -6.0 * x_c && grid.x_max() >= 6.0 * x_c;
    if !resolvable {
        return Err(Error::Unresolvable { x_c, dx: grid.dx() });
    }
    let prefactor = (std::f64::consts::PI * x_c * x_c).powf(-0.25);
    let amplitudes = grid
        .positions()
        .map(|x| {
            let u = x / x_c;
            Complex64::new(prefactor * (-0.5 * u * u).exp(), 0.0)
        })
        .collect();
    let mut psi = WaveFunction::from_amplitudes(grid, amplitudes)?;
    psi.normalize();
    Ok(psi)
}

/// One entry of the singular-limit table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEntry {
    pub n_atoms: u64,
    pub omega: f64,
    /// `sqrt(ħ/(Nmω))`; infinite at ω = 0.
    pub x_c: f64,
    /// RMS position of `|ψ₀|²` confined to the box `[−L_box/2, L_box/2]`.
    pub width: f64,
}

/// Widths of the collective ground state over a grid of `(N, ω)`, exposing the
/// order dependence of the `N → ∞` and `ω → 0` limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularLimitTable {
    pub box_length: f64,
    pub entries: Vec<LimitEntry>,
    /// For every N, the width at the weakest field: the `ω → 0` limit taken first.
    pub field_first: Vec<LimitEntry>,
    /// For every ω, the width at the largest N: the `N → ∞` limit taken first.
    pub size_first: Vec<LimitEntry>,
}

impl SingularLimitTable {
    /// Width of the uniform (fully delocalized) state in the box, `L_box/√12`.
    pub fn delocalized_width(&self) -> f64 {
        self.box_length / 12f64.sqrt()
    }
}

pub fn singular_limit_table(
    model: &CrystalModel,
    n_sequence: &[u64],
    omega_sequence: &[f64],
) -> Result<SingularLimitTable> {
    if n_sequence.is_empty() || omega_sequence.is_empty() {
        return Err(Error::EmptyInput("limit sequences"));
    }
    if !is_monotone(&n_sequence.iter().map(|&n| n as f64).collect::<Vec<_>>())
        || !is_monotone(omega_sequence)
    {
        return Err(Error::InvalidParameter {
            name: "sequence",
            reason: "N and omega sequences must be strictly monotone".into(),
        });
    }
    if let Some(&w) = omega_sequence.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be non-negative, got {w}"),
        });
    }
    model.validate()?;

    let width_at = |n_atoms: u64, omega: f64| {
        let nm = n_atoms as f64 * model.atom_mass;
        let x_c = if omega > 0.0 {
            (model.hbar / (nm * omega)).sqrt()
        } else {
            f64::INFINITY
        };
        LimitEntry {
            n_atoms,
            omega,
            x_c,
            width: boxed_gaussian_rms(x_c, 0.5 * model.box_length),
        }
    };

    let entries = n_sequence
        .iter()
        .flat_map(|&n| omega_sequence.iter().map(move |&w| (n, w)))
        .map(|(n, w)| width_at(n, w))
        .collect();
    let weakest = omega_sequence
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let largest = *n_sequence.iter().max().expect("non-empty");
    Ok(SingularLimitTable {
        box_length: model.box_length,
        entries,
        field_first: n_sequence.iter().map(|&n| width_at(n, weakest)).collect(),
        size_first: omega_sequence.iter().map(|&w| width_at(largest, w)).collect(),
    })
}

fn is_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0])
}

/// RMS of the density `exp(−x²/x_c²)` restricted to `[−half, half]`.
fn boxed_gaussian_rms(x_c: f64, half: f64) -> f64 {
    if half > 10.0 * x_c {
        // the truncated tail is below e^{-100}
        return x_c / 2f64.sqrt();
    }
    // composite Simpson on [0, half]; the integrand is even
    let n = 4000;
    let h = half / n as f64;
    let inv = if x_c.is_finite() { 1.0 / (x_c * x_c) } else { 0.0 };
    let (mut m0, mut m2) = (0.0, 0.0);
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = (-x * x * inv).exp();
        m0 += w * p;
        m2 += w * p * x * x;
    }
    (m2 / m0).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn chain() -> CrystalModel {
        CrystalModel::new(1000, 4.0e-26, 10.0, 3.0e-10).unwrap()
    }

    #[test]
    fn zone_edge_energy() {
        let m = chain();
        let e = m.dispersion(PI / m.lattice_const).unwrap();
        let expected = 2.0 * HBAR * (m.spring / m.atom_mass).sqrt();
        assert!((e - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn dispersion_is_periodic_and_even() {
        let m = chain();
        let edge = m.dispersion(PI / m.lattice_const).unwrap();
        let e = m.dispersion(2.0 * PI / m.lattice_const).unwrap();
        assert!(e <= 1e-15 * edge);
        for k in [0.1, 1.7, 3.1, 9.0].map(|v| v / m.lattice_const) {
            assert_eq!(m.dispersion(k).unwrap(), m.dispersion(-k).unwrap());
        }
    }

    #[test]
    fn long_wavelength_phonons_are_acoustic() {
        // E(k)/(ħ sqrt(κ/m) a k) → 1; cross-check the slope with a forward difference.
        let m = chain();
        let unit = m.energy_unit() * m.lattice_const;
        let mut previous = f64::INFINITY;
        for ka in [1e-2, 1e-3, 1e-4, 1e-5] {
            let k = ka / m.lattice_const;
            let ratio = m.dispersion(k).unwrap() / (unit * k);
            let deviation = (ratio - 1.0).abs();
            assert!(deviation < ka * ka, "ka = {ka}: deviation {deviation}");
            assert!(deviation < previous);
            previous = deviation;
            let h = 1e-3 * k;
            let slope = (m.dispersion(k + h).unwrap() - m.dispersion(k).unwrap()) / h;
            assert!((slope / unit - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_wavenumber_is_rejected() {
        let m = chain();
        assert_eq!(m.dispersion(0.0), Err(Error::ThinSpectrumWavenumber));
        assert_eq!(m.bogoliubov(0.0), Err(Error::BogoliubovDivergence));
    }

    #[test]
    fn bogoliubov_quarter_zone() {
        let m = chain();
        let c = m.bogoliubov(0.5 * PI / m.lattice_const).unwrap();
        assert!(c.b_k.abs() < 1e-15);
        assert!(c.rapidity.abs() < 1e-15);
        assert!((c.cosh_u - 1.0).abs() < 1e-15);
        assert!(c.sinh_u.abs() < 1e-15);
    }

    #[test]
    fn bogoliubov_zone_edge() {
        let m = chain();
        let c = m.bogoliubov(PI / m.lattice_const).unwrap();
        assert!((c.a_k - 3.0).abs() < 1e-15);
        assert!((c.b_k - 1.0).abs() < 1e-15);
        assert!(((2.0 * c.rapidity).tanh() + 1.0 / 3.0).abs() < 1e-15);
        assert!(c.off_diagonal_relative() < 1e-12);
    }

    #[test]
    fn bogoliubov_diverges_at_long_wavelength() {
        let m = chain();
        let mut previous = 0.0;
        for exponent in 1..=6 {
            let ka = 10f64.powi(-exponent);
            let c = m.bogoliubov(ka / m.lattice_const).unwrap();
            assert!(c.sinh_u.abs() > previous);
            assert!(c.off_diagonal_relative() < 1e-12);
            previous = c.sinh_u.abs();
        }
        assert!(previous > 100.0);
    }

    #[test]
    fn cancellation_on_random_wavenumbers() {
        use rand::{Rng, SeedableRng};
        let m = chain();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let ka: f64 = rng.gen_range(-PI..=PI);
            if ka == 0.0 {
                continue;
            }
            let c = m.bogoliubov(ka / m.lattice_const).unwrap();
            assert!(c.off_diagonal_relative() <= 1e-12, "ka = {ka}");
        }
        let quarter = m.bogoliubov(0.5 * PI / m.lattice_const).unwrap();
        assert!(quarter.off_diagonal_relative() <= 1e-12);
    }

    #[test]
    fn quasiparticle_energy_matches_dispersion() {
        let m = chain();
        let unit = m.hbar * (m.spring / (2.0 * m.atom_mass)).sqrt();
        for ka in [1e-4, 0.3, 1.0, 2.5, PI] {
            let k = ka / m.lattice_const;
            let from_rotation = m.bogoliubov(k).unwrap().quasiparticle_energy() * unit;
            let direct = m.dispersion(k).unwrap();
            assert!((from_rotation / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_spectrum_levels() {
        let m = chain();
        let e = m.thin_spectrum_energies(4);
        assert_eq!(e[0], 0.0);
        assert!((e[2] / e[1] - 4.0).abs() < 1e-12);
        assert!(e.windows(2).all(|w| w[1] > w[0]));

        let doubled = CrystalModel {
            n_atoms: 2 * m.n_atoms,
            ..m
        };
        for (big, small) in doubled.thin_spectrum_energies(4).iter().zip(&e) {
            assert_eq!(2.0 * big, *small);
        }
    }

    #[test]
    fn ground_state_second_moment() {
        let params = PhysicalParams::new(1.0e-11, 1.0e3).unwrap();
        let x_c = params.x_c().unwrap();
        let grid = Grid::symmetric(8.0 * x_c, 256).unwrap();
        let psi = sb_ground_state(grid, &params).unwrap();
        let obs = psi.observables();
        let expected = HBAR / (2.0 * params.total_mass * params.omega);
        assert!((obs.mean_x2 / expected - 1.0).abs() < 1e-6);
        assert!(obs.mean_x.abs() < 1e-9 * x_c);
        assert!((obs.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_state_rejects_coarse_grid() {
        let params = PhysicalParams::new(1.0e-11, 1.0e3).unwrap();
        let x_c = params.x_c().unwrap();
        let coarse = Grid::symmetric(8.0 * x_c, 64).unwrap();
        assert!(matches!(
            sb_ground_state(coarse, &params),
            Err(Error::Unresolvable { .. })
        ));
        let narrow = Grid::symmetric(4.0 * x_c, 1024).unwrap();
        assert!(sb_ground_state(narrow, &params).is_err());
    }

    #[test]
    fn weak_field_widens_ground_state() {
        let strong = PhysicalParams::new(1.0e-11, 1.0e3).unwrap();
        let weak = PhysicalParams::new(1.0e-11, 1.0).unwrap();
        let x_c = weak.x_c().unwrap();
        let grid = Grid::symmetric(8.0 * x_c, 8192).unwrap();
        let wide = sb_ground_state(grid, &weak).unwrap().observables().mean_x2;
        let narrow = sb_ground_state(grid, &strong).unwrap().observables().mean_x2;
        assert!(((wide / narrow).sqrt() / 1000f64.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn limit_table_shows_order_dependence() {
        let model = CrystalModel::new(10, 1.0e-26, 1.0, 1.0e-10)
            .unwrap()
            .with_box_length(1.0e-6)
            .unwrap();
        let ns = [10u64, 1_000, 100_000, 10_000_000, 1_000_000_000];
        let omegas = [1e12, 1e9, 1e6, 1e3, 0.0];
        let table = singular_limit_table(&model, &ns, &omegas).unwrap();
        assert_eq!(table.entries.len(), ns.len() * omegas.len());

        // ω → 0 first: delocalized over the whole box whatever N is.
        for e in &table.field_first {
            assert!((e.width / table.delocalized_width() - 1.0).abs() < 1e-9);
        }
        // N → ∞ first: the width keeps shrinking as ω decreases toward zero.
        let localized: Vec<f64> = table.size_first.iter().map(|e| e.width).collect();
        assert!(localized[0] < 1e-2 * table.delocalized_width());

        let w = |n: u64, omega: f64| {
            table
                .entries
                .iter()
                .find(|e| e.n_atoms == n && e.omega == omega)
                .unwrap()
                .width
        };
        // x_c ∝ (Nω)^{-1/2} while localized
        assert!((w(10, 1e12) / w(1_000, 1e12) - 10.0).abs() < 1e-9);
        assert!((w(1_000, 1e9) / w(1_000_000_000, 1e3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_table_requires_monotone_sequences() {
        let model = chain();
        assert!(singular_limit_table(&model, &[10, 5, 20], &[1.0]).is_err());
        assert!(singular_limit_table(&model, &[], &[1.0]).is_err());
    }
}
