//! Ensembles over noise realizations and parameter sweeps, and the
//! statistics extracted from them: dominance and half-times, outcome
//! frequencies, histograms and log-log scaling fits.

mod born;
mod halftime;
mod measure;
mod runner;
mod stats;

pub use born::{born_statistics, BornReport};
pub use halftime::{HalfTimePoint, HalfTimeResult, HalfTimeSweep};
pub use measure::{
    dominance, dominance_time, dominant_component, drift_time, drift_time_series, half_time,
    half_time_series, plateau_window, MIN_PLATEAU_RECORDS, PLATEAU_FRACTION, PLATEAU_TOLERANCE,
};
pub use runner::{
    run_ensemble, run_ensemble_with_progress, run_seed, separation, with_pool, EnsembleResult,
    ParamPoint, PointSummary, RunLength, RunRecord, SweepSpec, TimeStepping,
    MAX_BLOW_UP_FRACTION,
};
pub use stats::{
    histogram, percentile, percentile_sorted, scaling_fit, two_proportion_test, wilson_interval,
    Histogram, ScalingFit, TwoProportionTest, Z_95,
};
