//! Small statistics helpers shared by the diagnostics and the test
//! suites: Kolmogorov-Smirnov distances and Beta distribution CDFs.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// One-sample Kolmogorov-Smirnov statistic: the largest gap between
/// the empirical CDF of `sample` and the reference `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument(
            "KS statistic needs a non-empty sample".into(),
        ));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "KS statistic needs finite samples".into(),
        ));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "reference CDF returned {f} outside [0, 1]"
            )));
        }
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        worst = worst.max(above).max(below);
    }
    Ok(worst)
}

/// Asymptotic one-sample KS critical value at significance `alpha`:
/// reject the reference when the statistic exceeds this.
pub fn ks_critical_value(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance must sit strictly inside (0, 1), got {alpha}"
        )));
    }
    Ok(((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt())
}

/// CDF of the Beta(`alpha`, `beta`) distribution at `x`.
pub fn beta_cdf(alpha: f64, beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(alpha, beta, x)
    }
}
