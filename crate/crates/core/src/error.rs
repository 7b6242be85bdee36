use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs a power-of-two point count of at least 16, got {0}")]
    GridPoints(usize),

    #[error("grid extent is empty: x_max ({x_max}) must exceed x_min ({x_min})")]
    GridExtent { x_min: f64, x_max: f64 },

    #[error(
        "component centred at {center} m with width {width} m leaves the grid margin \
         [{lo}, {hi}] (4 widths from each edge)"
    )]
    OutsideMargin {
        center: f64,
        width: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("k = 0 is a thin-spectrum wavenumber; the phonon dispersion is undefined there")]
    ThinSpectrumWavenumber,

    #[error("the Bogoliubov rotation diverges at k = 0")]
    BogoliubovDivergence,

    #[error(
        "ground-state width x_c = {x_c:e} m is not resolvable: need dx <= x_c/8 (dx = {dx:e} m) \
         and the grid to cover [-6 x_c, 6 x_c]"
    )]
    Unresolvable { x_c: f64, dx: f64 },

    #[error("{what} stability bound violated: dt = {dt:e} s exceeds the bound {bound:e} s")]
    Stability {
        what: &'static str,
        dt: f64,
        bound: f64,
    },

    #[error("numerical blow-up at step {step} (t = {time:e} s): norm became {norm}")]
    BlowUp { step: u64, time: f64, norm: f64 },

    #[error("component centres must be distinct (duplicate at {0} m)")]
    DuplicateCenters(f64),

    #[error("at least one component centre is required")]
    NoCenters,

    #[error("no plateau detected in <x^2>: the run is too short to define a half-time")]
    NoPlateau,

    #[error("the Gaussian oracle needs a single Gaussian initial state")]
    NotGaussian,

    #[error("the Gaussian oracle needs a noise-free Hamiltonian")]
    OracleNoise,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("log-log fit needs strictly positive values, got ({0}, {1})")]
    NonPositive(f64, f64),

    #[error("log-log fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("{failed} of {total} runs blew up (limit is 1%)")]
    EnsembleBlowUps { failed: usize, total: usize },

    #[error("no run reached a dominant component")]
    NoCompletedRuns,

    #[error("parameter point {index} (Nm = {total_mass:e} kg, omega = {omega:e} 1/s): {source}")]
    AtPoint {
        index: usize,
        total_mass: f64,
        omega: f64,
        source: Box<Error>,
    },

    #[error("ODE integration failed: {0}")]
    Integration(String),
}
