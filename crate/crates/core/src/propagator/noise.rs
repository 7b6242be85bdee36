use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    Zero,
    /// Constant on `[nτ, (n+1)τ)`, each value an independent `N(0, sigma²)` draw.
    PiecewiseConstantGaussian {
        /// m
        sigma: f64,
        /// s
        tau: f64,
    },
}

/// Stochastic centre `ξ(t)` of the imaginary potential.
///
/// Segment values are drawn in order from a ChaCha8 stream seeded with
/// `seed`, so any query pattern sees the same realization.
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    kind: NoiseKind,
    seed: u64,
    rng: ChaCha8Rng,
    values: Vec<f64>,
}

impl NoiseProcess {
    pub fn new(kind: NoiseKind, seed: u64) -> Result<Self> {
        if let NoiseKind::PiecewiseConstantGaussian { sigma, tau } = kind {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: format!("noise amplitude must be non-negative, got {sigma}"),
                });
            }
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "tau",
                    reason: format!("noise refresh time must be positive, got {tau}"),
                });
            }
        }
        Ok(NoiseProcess {
            kind,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            values: Vec::new(),
        })
    }

    pub fn zero() -> Self {
        NoiseProcess::new(NoiseKind::Zero, 0).expect("zero noise is always valid")
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    /// Refresh interval, if the process has one.
    pub fn tau(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::Zero => None,
            NoiseKind::PiecewiseConstantGaussian { tau, .. } => Some(tau),
        }
    }

    pub fn sample(&mut self, t: f64) -> f64 {
        match self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::PiecewiseConstantGaussian { sigma, tau } => {
                let segment = (t / tau).floor().max(0.0) as usize;
                while self.values.len() <= segment {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    self.values.push(sigma * z);
                }
                self.values[segment]
            }
        }
    }

    /// Forgets drawn values and restarts the stream from the seed.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.values.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_vanishes() {
        let mut noise = NoiseProcess::zero();
        for t in [0.0, 1e-9, 3.0, 1e6] {
            assert_eq!(noise.sample(t), 0.0);
        }
    }

    #[test]
    fn piecewise_constant_within_segments() {
        let kind = NoiseKind::PiecewiseConstantGaussian {
            sigma: 2.0,
            tau: 0.5,
        };
        let mut noise = NoiseProcess::new(kind, 7).unwrap();
        let first = noise.sample(0.0);
        assert_eq!(noise.sample(0.49), first);
        let second = noise.sample(0.5);
        assert_eq!(noise.sample(0.99), second);
        assert_ne!(first, second);
    }

    #[test]
    fn reproducible_regardless_of_query_order() {
        let kind = NoiseKind::PiecewiseConstantGaussian {
            sigma: 1.0,
            tau: 1.0,
        };
        let mut forward = NoiseProcess::new(kind, 42).unwrap();
        let mut jumpy = NoiseProcess::new(kind, 42).unwrap();
        let late = jumpy.sample(50.5);
        let trace: Vec<f64> = (0..60).map(|n| forward.sample(n as f64 + 0.5)).collect();
        assert_eq!(trace[50], late);
        assert_eq!(jumpy.sample(3.2), trace[3]);
        jumpy.reset();
        assert_eq!(jumpy.sample(0.1), trace[0]);
    }

    #[test]
    fn segment_statistics() {
        let sigma = 3.0;
        let kind = NoiseKind::PiecewiseConstantGaussian { sigma, tau: 1.0 };
        let mut noise = NoiseProcess::new(kind, 1).unwrap();
        let n = 200_000;
        let values: Vec<f64> = (0..n).map(|i| noise.sample(i as f64)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sem = sigma / (n as f64).sqrt();
        assert!(mean.abs() < 4.0 * sem);
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.01);
        // adjacent segments are uncorrelated
        let lag: f64 = values.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        assert!((lag / var).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad_tau = NoiseKind::PiecewiseConstantGaussian {
            sigma: 1.0,
            tau: 0.0,
        };
        assert!(NoiseProcess::new(bad_tau, 0).is_err());
        let bad_sigma = NoiseKind::PiecewiseConstantGaussian {
            sigma: -1.0,
            tau: 1.0,
        };
        assert!(NoiseProcess::new(bad_sigma, 0).is_err());
    }
}
