//! Least-squares slope of a metric series in log-log coordinates.

/// A fitted power law `value ≈ exp(intercept) · k^slope` over a round
/// window.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inclusive round window the fit used.
    pub window: (u64, u64),
    /// Points that actually entered the fit (positive, finite values).
    pub points: usize,
}

/// Minimum series length for a tail fit; shorter runs are still dominated
/// by the transient.
pub const MIN_ROUNDS_FOR_FIT: usize = 200;

/// Ordinary least squares of y on x. Returns (slope, intercept).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, mean_y - slope * mean_x))
}

/// Fit ln(value) against ln(k) over the last half of the series. Rounds
/// with k = 0 or nonpositive/non-finite values are skipped; series shorter
/// than [`MIN_ROUNDS_FOR_FIT`] rounds produce no fit.
pub fn fit_loglog_tail(series: &[(u64, f64)]) -> Option<RateFit> {
    if series.len() < MIN_ROUNDS_FOR_FIT {
        return None;
    }
    let start = series.len() / 2;
    let window_lo = series[start].0;
    let window_hi = series[series.len() - 1].0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in &series[start..] {
        if k == 0 || !v.is_finite() || v <= 0.0 {
            continue;
        }
        xs.push((k as f64).ln());
        ys.push(v.ln());
    }
    let (slope, intercept) = least_squares(&xs, &ys)?;
    Some(RateFit {
        slope,
        intercept,
        window: (window_lo, window_hi),
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_power_law() {
        let series: Vec<(u64, f64)> = (0..400)
            .map(|k| (k, if k == 0 { 1.0 } else { 5.0 / (k as f64).powi(2) }))
            .collect();
        let fit = fit_loglog_tail(&series).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 5.0f64.ln(), epsilon = 1e-9);
        assert_eq!(fit.window.1, 399);
    }

    #[test]
    fn too_short_series_has_no_fit() {
        let series: Vec<(u64, f64)> = (0..100).map(|k| (k, 1.0 / (k + 1) as f64)).collect();
        assert!(fit_loglog_tail(&series).is_none());
    }

    #[test]
    fn skips_nonpositive_values() {
        let mut series: Vec<(u64, f64)> = (0..400).map(|k| (k, 1.0 / ((k + 1) as f64))).collect();
        series[350].1 = 0.0;
        let fit = fit_loglog_tail(&series).unwrap();
        assert_eq!(fit.points, 199);
    }
}
