use serde::Serialize;

use crate::{Error, Result};

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Ordinary least squares of `ln y` on `ln p`: `y ≈ e^intercept · p^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub slope_std_error: f64,
    pub n_points: usize,
}

impl ScalingFit {
    pub fn predict(&self, p: f64) -> f64 {
        (self.intercept + self.slope * p.ln()).exp()
    }
}

pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(p, y)) = points
        .iter()
        .find(|(p, y)| !(*p > 0.0 && *y > 0.0 && p.is_finite() && y.is_finite()))
    {
        return Err(Error::NonPositive(p, y));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(p, y)| (p.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|l| (l.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|l| (l.0 - mean_x) * (l.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "all parameter values coincide".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(ScalingFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
        slope_std_error: (ss_res / (n - 2.0) / sxx).sqrt(),
        n_points: points.len(),
    })
}

/// Unit-area histogram on `[lo, hi]` with equal bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub density: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.density.len()).map(|i| self.lo + (i as f64 + 0.5) * self.bin_width)
    }

    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }
}

/// Histogram of the finite entries of `values` over `[min, max]`.
///
/// A sample with a single distinct value yields one bin of unit width centred
/// on it.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyInput("histogram needs at least one finite value"));
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter {
            name: "n_bins",
            reason: "must be at least 1".into(),
        });
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = finite.len() as f64;
    if lo == hi {
        return Ok(Histogram {
            lo: lo - 0.5,
            hi: lo + 0.5,
            bin_width: 1.0,
            density: vec![1.0],
            counts: vec![finite.len() as u64],
        });
    }
    let bin_width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for v in &finite {
        let bin = (((v - lo) / bin_width) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let density = counts
        .iter()
        .map(|&c| c as f64 / (total * bin_width))
        .collect();
    Ok(Histogram {
        lo,
        hi,
        bin_width,
        density,
        counts,
    })
}

/// Linear-interpolation percentile (Hyndman–Fan type 7) of an ascending
/// slice, `q ∈ [0, 1]`. Infinite entries (censored values) propagate.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        return Some(sorted[lo]);
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if b.is_infinite() {
        return Some(b);
    }
    Some(a + frac * (b - a))
}

pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Pooled two-proportion z-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoProportionTest {
    pub p1: f64,
    pub p2: f64,
    pub z: f64,
    /// `|z| ≤ 1.96`: no difference detected at the 5% level.
    pub consistent: bool,
}

pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<TwoProportionTest> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::NoCompletedRuns);
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let (p1, p2) = (k1 as f64 / n1f, k2 as f64 / n2f);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
    Ok(TwoProportionTest {
        p1,
        p2,
        z,
        consistent: z.abs() <= Z_95,
    })
}
