use crate::propagator::Trajectory;
use crate::{Error, Result};

/// Fraction of the records that define the final plateau of `<x²>`.
pub const PLATEAU_FRACTION: f64 = 0.05;

/// Largest spread inside the plateau window, relative to the total change of
/// `<x²>`, for the run to count as settled.
pub const PLATEAU_TOLERANCE: f64 = 0.02;

/// Fewest records in the plateau window; shorter runs never count as settled.
pub const MIN_PLATEAU_RECORDS: usize = 3;

/// Number of trailing records averaged into the plateau of an `n`-record
/// series, or `None` when the series is too short to have one.
pub fn plateau_window(n: usize) -> Option<usize> {
    let window = ((n as f64 * PLATEAU_FRACTION).ceil() as usize).max(MIN_PLATEAU_RECORDS);
    (n > window).then_some(window)
}

/// First recorded time at which one tracked component holds at least
/// `threshold` of the probability, with that component's index.
pub fn dominance(traj: &Trajectory, threshold: f64) -> Option<(f64, usize)> {
    if traj.centers.len() < 2 {
        return None;
    }
    traj.component_weights
        .iter()
        .zip(&traj.times)
        .find_map(|(row, &t)| dominant_component(row, threshold).map(|i| (t, i)))
}

pub fn dominance_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    dominance(traj, threshold).map(|(t, _)| t)
}

/// Index of the component whose weight reaches `threshold`, if any.
pub fn dominant_component(weights: &[f64], threshold: f64) -> Option<usize> {
    let (index, &largest) = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    (largest >= threshold).then_some(index)
}

/// First time `<x²>` crosses the midpoint between its initial value and the
/// final plateau, linearly interpolated between records.
pub fn half_time(traj: &Trajectory) -> Result<f64> {
    half_time_series(&traj.times, &traj.mean_x2)
}

/// [`half_time`] on a raw `(time, value)` series.
pub fn half_time_series(times: &[f64], values: &[f64]) -> Result<f64> {
    let n = values.len().min(times.len());
    let window = plateau_window(n).ok_or(Error::NoPlateau)?;
    let tail = &values[n - window..n];
    let plateau = tail.iter().sum::<f64>() / window as f64;
    let initial = values[0];
    let change = initial - plateau;
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().copied().fold(f64::INFINITY, f64::min);
    if change == 0.0 || !change.is_finite() || spread > PLATEAU_TOLERANCE * change.abs() {
        return Err(Error::NoPlateau);
    }
    let midpoint = 0.5 * (initial + plateau);
    let above = |v: f64| (v - midpoint) * change > 0.0;
    for i in 1..n {
        if !above(values[i]) {
            let (v0, v1) = (values[i - 1], values[i]);
            let frac = if v1 == v0 { 1.0 } else { (midpoint - v0) / (v1 - v0) };
            return Ok(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    Err(Error::NoPlateau)
}

/// First time `|<x>|` falls to `fraction` of its initial value, linearly
/// interpolated between records.
pub fn drift_time(traj: &Trajectory, fraction: f64) -> Option<f64> {
    drift_time_series(&traj.times, &traj.mean_x, fraction)
}

pub fn drift_time_series(times: &[f64], mean_x: &[f64], fraction: f64) -> Option<f64> {
    let start = *mean_x.first()?;
    let target = fraction * start.abs();
    if start.abs() <= target {
        return times.first().copied();
    }
    mean_x.windows(2).zip(times.windows(2)).find_map(|(m, t)| {
        let (a, b) = (m[0].abs(), m[1].abs());
        (b <= target).then(|| {
            let frac = if a == b { 1.0 } else { (a - target) / (a - b) };
            t[0] + frac * (t[1] - t[0])
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let v = t.iter().map(|&t| f(t)).collect();
        (t, v)
    }

    #[test]
    fn exponential_relaxation_half_time() {
        // 1 + 3e^{-2t}: plateau 1, midpoint 2.5, crossing at ln(2)/2
        let (t, v) = series(|t| 1.0 + 3.0 * (-2.0 * t).exp(), 20_001, 0.001);
        let h = half_time_series(&t, &v).unwrap();
        assert!((h - 0.5 * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn rising_series() {
        let (t, v) = series(|t| 2.0 - (-t).exp(), 40_001, 0.001);
        let h = half_time_series(&t, &v).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn short_run_has_no_plateau() {
        let (t, v) = series(|t| 1.0 + 3.0 * (-2.0 * t).exp(), 101, 0.005);
        assert_eq!(half_time_series(&t, &v), Err(Error::NoPlateau));
        let flat = vec![1.0; 10];
        assert_eq!(half_time_series(&t[..10], &flat), Err(Error::NoPlateau));
        let (t, v) = series(|t| 1.0 + 3.0 * (-2.0 * t).exp(), 3, 10.0);
        assert_eq!(half_time_series(&t, &v), Err(Error::NoPlateau));
    }

    #[test]
    fn dominance_needs_two_components() {
        let mut traj = Trajectory::new(&[0.0]).unwrap();
        traj.component_weights.push(vec![1.0]);
        traj.push(0.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(dominance_time(&traj, 0.9), None);
    }

    #[test]
    fn dominance_picks_first_crossing() {
        let mut traj = Trajectory::new(&[-1.0, 1.0]).unwrap();
        for (i, w) in [0.5, 0.7, 0.96, 0.99].iter().enumerate() {
            traj.push(i as f64, 0.0, 0.0, 1.0, 0.0);
            traj.component_weights.push(vec![1.0 - w, *w]);
        }
        assert_eq!(dominance(&traj, 0.95), Some((2.0, 1)));
        assert_eq!(dominance(&traj, 0.995), None);
        assert_eq!(dominant_component(&[0.97, 0.03], 0.95), Some(0));
    }

    #[test]
    fn drift_interpolates() {
        let (t, m) = series(|t| -4.0 * (-t).exp(), 10_001, 0.001);
        let d = drift_time_series(&t, &m, 0.5).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-6);
        assert_eq!(drift_time_series(&t[..10], &m[..10], 0.5), None);
    }
}
