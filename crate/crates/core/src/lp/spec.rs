use crate::data::StateSeries;
use crate::error::{Error, Result};

/// A local projection specification.
#[derive(Debug, Clone)]
pub struct LpSpec {
    /// Response variable `z`.
    pub dependent: String,
    /// Identified shock series.
    pub shock: String,
    /// Control variables entering with lags `1..=control_lags`.
    pub controls: Vec<String>,
    pub control_lags: usize,
    pub horizon_max: usize,
    /// Regime weight (dummy/logit) or continuous interaction, dated `t`
    /// (already lagged).
    pub state: Option<StateSeries>,
    /// Second regime weight for the horse-race model.
    pub second_state: Option<StateSeries>,
    pub ci_level: f64,
    /// Cumulate the response over `t..=t+h`.
    pub cumulative: bool,
    /// Newey-West bandwidth; `None` uses `h + 1` at horizon `h`.
    pub bandwidth: Option<usize>,
}

impl LpSpec {
    pub fn new(dependent: impl Into<String>, shock: impl Into<String>) -> Self {
        Self {
            dependent: dependent.into(),
            shock: shock.into(),
            controls: Vec::new(),
            control_lags: 4,
            horizon_max: 16,
            state: None,
            second_state: None,
            ci_level: 0.90,
            cumulative: false,
            bandwidth: None,
        }
    }

    pub fn with_controls<I, S>(mut self, controls: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.controls = controls.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_lags(mut self, lags: usize) -> Self {
        self.control_lags = lags;
        self
    }

    pub fn with_horizon(mut self, horizon_max: usize) -> Self {
        self.horizon_max = horizon_max;
        self
    }

    pub fn with_state(mut self, state: StateSeries) -> Self {
        self.state = Some(state);
        self
    }

    pub fn with_second_state(mut self, state: StateSeries) -> Self {
        self.second_state = Some(state);
        self
    }

    pub fn with_bandwidth(mut self, bandwidth: usize) -> Self {
        self.bandwidth = Some(bandwidth);
        self
    }

    pub fn cumulative(mut self, on: bool) -> Self {
        self.cumulative = on;
        self
    }

    pub fn bandwidth_at(&self, horizon: usize) -> usize {
        self.bandwidth.unwrap_or(horizon + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.control_lags < 1 {
            return Err(Error::InvalidArgument("control_lags must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ci_level must lie in (0, 1), got {}",
                self.ci_level
            )));
        }
        if let Some(second) = &self.second_state {
            let Some(first) = &self.state else {
                return Err(Error::InvalidArgument(
                    "a second state requires a first state".into(),
                ));
            };
            if !first.is_regime() || !second.is_regime() {
                return Err(Error::InvalidArgument(
                    "horse-race states must be regime weights (dummy or logit)".into(),
                ));
            }
        }
        Ok(())
    }
}
