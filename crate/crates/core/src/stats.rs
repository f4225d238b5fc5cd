//! Small statistical helpers: batch means and least-squares slopes.

/// Mean and standard error from equal-weight batch means.
pub fn batch_mean_stderr(batches: &[f64]) -> (f64, f64) {
    let b = batches.len();
    if b == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = batches.iter().sum::<f64>() / b as f64;
    if b == 1 {
        return (mean, f64::NAN);
    }
    let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Splits a sample sequence into `n_batches` contiguous batches and returns
/// the batch-means estimate of the mean and its standard error.
pub fn batch_means(samples: &[f64], n_batches: usize) -> (f64, f64) {
    let n = samples.len();
    let nb = n_batches.min(n).max(1);
    let size = n / nb;
    let means: Vec<f64> = (0..nb)
        .map(|k| {
            let s = &samples[k * size..(k + 1) * size];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    batch_mean_stderr(&means)
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of `log|y|` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    ols_slope(&lx, &ly)
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn batch_means_of_constant() {
        let (m, s) = batch_means(&[2.0; 64], 32);
        assert_eq!(m, 2.0);
        assert_eq!(s, 0.0);
    }
}
