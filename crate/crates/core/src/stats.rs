//! Small statistical helpers shared across estimators.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Two-sided critical value `z_{1-alpha/2}` for a confidence level in (0, 1).
pub fn normal_critical(ci_level: f64) -> f64 {
    standard_normal().inverse_cdf(0.5 + ci_level / 2.0)
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_pvalue(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    2.0 * (1.0 - standard_normal().cdf(z.abs()))
}

/// Significance stars: `*` p < 0.10, `**` p < 0.05, `***` p < 0.01.
pub fn stars(pvalue: f64) -> &'static str {
    if pvalue < 0.01 {
        "***"
    } else if pvalue < 0.05 {
        "**"
    } else if pvalue < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Mean over finite entries.
pub fn finite_mean(values: &[f64]) -> Option<f64> {
    let (sum, n) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Standard deviation over finite entries, normalised by the number of
/// observations (not n - 1).
pub fn finite_std(values: &[f64]) -> Option<f64> {
    let mean = finite_mean(values)?;
    let (ss, n) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + (v - mean).powi(2), n + 1));
    Some((ss / n as f64).sqrt())
}

/// Linear-interpolated empirical quantile of the finite entries, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Median of a slice (finite entries only).
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}
