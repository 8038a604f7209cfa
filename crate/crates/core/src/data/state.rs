use serde::{Deserialize, Serialize};

use super::dataset::Series;
use super::quarter::Quarter;
use crate::error::{Error, Result};
use crate::stats;

/// How a state variable enters the projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    /// Indicator `x > 0`.
    Dummy,
    /// Smooth transition `1 / (1 + exp(-gamma x / sd(x)))`.
    Logit,
    /// The variable itself, used as a continuous interaction.
    Continuous,
}

/// Per-quarter regime weight. The stored value at quarter `t` is already
/// lagged, so estimators use it as dated `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSeries {
    pub start: Quarter,
    pub weight: Vec<f64>,
    pub mode: StateMode,
}

impl StateSeries {
    pub fn new(start: Quarter, weight: Vec<f64>, mode: StateMode) -> Self {
        Self { start, weight, mode }
    }

    pub fn as_series(&self) -> Series {
        Series::new(self.start, self.weight.clone())
    }

    pub fn get(&self, q: Quarter) -> f64 {
        let i = q.since(self.start);
        if i < 0 {
            return f64::NAN;
        }
        self.weight.get(i as usize).copied().unwrap_or(f64::NAN)
    }

    /// True for regime-probability modes (weights in [0, 1] with a complement
    /// regime), false for a continuous interaction.
    pub fn is_regime(&self) -> bool {
        self.mode != StateMode::Continuous
    }
}

/// Logistic transition weight.
pub fn logit_weight(x: f64, gamma: f64, sd: f64) -> f64 {
    1.0 / (1.0 + (-gamma * x / sd).exp())
}

/// Builds a state variable from `x` (typically the detrended fiscal cost),
/// shifted forward by `lag` quarters so that the value stored at `t` is the
/// transform of `x_{t-lag}`.
///
/// The logit scale is the full-sample standard deviation of `x`.
pub fn build_state(x: &Series, mode: StateMode, gamma: f64, lag: usize) -> Result<StateSeries> {
    let transformed: Vec<f64> = match mode {
        StateMode::Dummy => x
            .values
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    f64::NAN
                } else if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
        StateMode::Logit => {
            if !(gamma > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "transition speed gamma must be positive, got {gamma}"
                )));
            }
            let sd = stats::finite_std(&x.values).unwrap_or(0.0);
            if !(sd > 0.0) {
                return Err(Error::Domain(
                    "logit state needs a nonconstant series (zero standard deviation)".into(),
                ));
            }
            x.values.iter().map(|&v| logit_weight(v, gamma, sd)).collect()
        }
        StateMode::Continuous => x.values.clone(),
    };
    Ok(StateSeries::new(x.start + lag as i64, transformed, mode))
}

/// An identified structural shock normalised to unit standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSeries(pub Series);

impl std::ops::Deref for ShockSeries {
    type Target = Series;
    fn deref(&self) -> &Series {
        &self.0
    }
}

/// Scales a raw shock series to unit standard deviation without demeaning.
pub fn standardize_shock(raw: &Series) -> Result<ShockSeries> {
    let sd = stats::finite_std(&raw.values).unwrap_or(0.0);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Domain("cannot standardize a zero-variance shock".into()));
    }
    let values = raw.values.iter().map(|v| v / sd).collect();
    Ok(ShockSeries(Series::new(raw.start, values)))
}
