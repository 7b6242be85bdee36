//! Spontaneous unitarity breaking on a 1-D collective coordinate.
//!
//! The crate evolves the centre-of-mass wavefunction of a massive object
//! under the non-Hermitian generator
//!
//! ```text
//! H_eff = p²/(2Nm) − (i/2)·Nm·ω²·(x − ξ(t))²
//! ```
//!
//! and measures how superpositions reduce: half-times of delocalized states,
//! drift of localized packets, dominance times and outcome statistics of
//! stochastic ensembles. The [`crystal`] module covers the equilibrium side
//! (phonon dispersion, Bogoliubov coefficients, thin spectrum and the
//! symmetry-broken ground state).
//!
//! Everything is SI internally. Lengths scale naturally with
//! `x_c = sqrt(ħ/(Nm·ω))` and times with `1/ω`; those are exposed on
//! [`PhysicalParams`] but never used as the internal unit system.

pub mod crystal;
pub mod ensemble;
mod error;
pub mod grid;
pub mod params;
pub mod propagator;
pub mod wavefunction;

pub use error::{Error, Result};
pub use grid::Grid;
pub use params::PhysicalParams;
pub use wavefunction::{ComponentSpec, Observables, StateKind, WaveFunction};

pub use num_complex::Complex64;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.0545718e-34;

/// Newtonian gravitational constant, m³·kg⁻¹·s⁻².
pub const G: f64 = 6.674e-11;
