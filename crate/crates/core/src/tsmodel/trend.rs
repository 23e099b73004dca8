use crate::error::{Error, Result};

/// Ordinary least-squares line through the window, extrapolated `horizon`
/// steps and clamped at zero.
pub fn linear_trend_baseline(series: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let (slope, intercept) = ols_line(series)?;
    let n = series.len();
    Ok((0..horizon).map(|h| (intercept + slope * (n + h) as f64).max(0.0)).collect())
}

/// `(slope, intercept)` with x = sample index.
pub fn ols_line(series: &[f64]) -> Result<(f64, f64)> {
    let n = series.len();
    if n < 2 {
        return Err(Error::insufficient("a trend line needs at least two samples"));
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = series.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in series.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok((slope, y_mean - slope * x_mean))
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn exact_line() {
        assert_eq!(linear_trend_baseline(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![5.0, 6.0]);
    }

    #[test]
    fn constant_stays_constant() {
        assert_eq!(linear_trend_baseline(&[9.0; 6], 3).unwrap(), vec![9.0; 3]);
    }

    #[test]
    fn downward_trend_clamps() {
        assert_eq!(linear_trend_baseline(&[3.0, 2.0, 1.0], 3).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn noisy_slope_recovered() {
        let mut rng = rng_from(17);
        let y: Vec<f64> = (0..500).map(|i| 10.0 + 2.0 * i as f64 + 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let (slope, _) = ols_line(&y).unwrap();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn needs_two_points() {
        assert!(linear_trend_baseline(&[1.0], 1).is_err());
    }
}
