use serde::Serialize;

use super::runner::EnsembleResult;
use super::stats::{wilson_interval, Z_95};
use crate::{Complex64, Error, Result};

/// Outcome frequencies of an ensemble against the Born weights `|c_i|²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornReport {
    /// Runs with a dominant component.
    pub completed: u64,
    /// Runs that ended undecided or blew up.
    pub undecided: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// Wilson 95% intervals.
    pub intervals: Vec<(f64, f64)>,
    /// `|c_i|² / Σ|c_j|²`
    pub expected: Vec<f64>,
    /// `(f − p)/sqrt(p(1 − p)/n)`
    pub z_scores: Vec<f64>,
    /// `|z| ≤ 3` for every component.
    pub within_3_sigma: bool,
}

/// Winner statistics over all records of `result` (one parameter point is
/// the intended use), compared with the amplitudes `weights` in component order.
pub fn born_statistics(result: &EnsembleResult, weights: &[Complex64]) -> Result<BornReport> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("no component amplitudes"));
    }
    let mut counts = vec![0u64; weights.len()];
    let mut undecided = 0;
    for r in &result.records {
        match r.winner {
            Some(w) if w < counts.len() => counts[w] += 1,
            Some(w) => {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("run {} was won by component {w}", r.run),
                })
            }
            None => undecided += 1,
        }
    }
    let completed: u64 = counts.iter().sum();
    if completed == 0 {
        return Err(Error::NoCompletedRuns);
    }
    let norm: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
    let expected: Vec<f64> = weights.iter().map(|w| w.norm_sqr() / norm).collect();
    let n = completed as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let z_scores: Vec<f64> = frequencies
        .iter()
        .zip(&expected)
        .map(|(f, p)| {
            let se = (p * (1.0 - p) / n).sqrt();
            if se > 0.0 {
                (f - p) / se
            } else if f == p {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(BornReport {
        completed,
        undecided,
        intervals: counts
            .iter()
            .map(|&c| wilson_interval(c, completed, Z_95))
            .collect(),
        within_3_sigma: z_scores.iter().all(|z| z.abs() <= 3.0),
        counts,
        frequencies,
        expected,
        z_scores,
    })
}
