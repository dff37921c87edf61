//! Forecast quality metrics.

use serde::{Deserialize, Serialize};

/// Point-forecast and interval metrics over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Root mean squared error, `sqrt(sum((mean - y)^2) / m)`.
    pub rmse: f64,
    /// Mean absolute error.
    pub mae: f64,
    /// Fraction of observations inside `[lower95, upper95]`.
    pub coverage95: f64,
}

/// Computes metrics for predictions against observed values.
///
/// Panics if the slices disagree in length or are empty; callers validate
/// test sets before scoring them.
pub fn score(mean: &[f64], lower95: &[f64], upper95: &[f64], y: &[f64]) -> EvalMetrics {
    assert!(!y.is_empty(), "empty test set");
    assert_eq!(mean.len(), y.len());
    let m = y.len() as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut covered = 0usize;
    for i in 0..y.len() {
        let err = mean[i] - y[i];
        se += err * err;
        ae += err.abs();
        if y[i] >= lower95[i] && y[i] <= upper95[i] {
            covered += 1;
        }
    }
    EvalMetrics {
        rmse: (se / m).sqrt(),
        mae: ae / m,
        coverage95: covered as f64 / m,
    }
}

/// Lag autocorrelation as the Pearson correlation between the series and a
/// lag-shifted copy over their overlap. An exactly periodic series scores
/// 1.0 at its period.
pub fn lag_autocorrelation(series: &[f64], lag: usize) -> Option<f64> {
    if lag == 0 || series.len() < lag + 2 {
        return None;
    }
    let n = series.len() - lag;
    let a = &series[..n];
    let b = &series[lag..];
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..n {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return None;
    }
    Some(cov / (var_a * var_b).sqrt())
}
