use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfPoint {
    pub horizon: usize,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateIrf {
    pub label: String,
    pub points: Vec<IrfPoint>,
}

impl StateIrf {
    pub fn at(&self, horizon: usize) -> Option<&IrfPoint> {
        self.points.iter().find(|p| p.horizon == horizon)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.estimate).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffPoint {
    pub horizon: usize,
    pub estimate: f64,
    pub se: f64,
    pub pvalue: f64,
    pub stars: String,
}

/// A linear contrast of state responses tested against zero, e.g. `A - B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceIrf {
    pub label: String,
    pub points: Vec<DiffPoint>,
}

impl DifferenceIrf {
    pub fn at(&self, horizon: usize) -> Option<&DiffPoint> {
        self.points.iter().find(|p| p.horizon == horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfResult {
    pub ci_level: f64,
    pub states: Vec<StateIrf>,
    pub differences: Vec<DifferenceIrf>,
    /// Usable observations per horizon `0..=H`.
    pub nobs: Vec<usize>,
    pub warnings: Vec<String>,
}

impl IrfResult {
    pub fn state(&self, label: &str) -> Option<&StateIrf> {
        self.states.iter().find(|s| s.label == label)
    }

    pub fn difference(&self, label: &str) -> Option<&DifferenceIrf> {
        self.differences.iter().find(|d| d.label == label)
    }
}

/// Weights on block labels defining a reported quantity.
#[derive(Debug, Clone)]
pub(crate) struct Contrast {
    pub label: String,
    pub terms: Vec<(String, f64)>,
}

impl Contrast {
    pub fn new(label: impl Into<String>, terms: &[(&str, f64)]) -> Self {
        Self {
            label: label.into(),
            terms: terms.iter().map(|(l, w)| (l.to_string(), *w)).collect(),
        }
    }
}

/// Key coefficients (one per surviving block) and their joint covariance at
/// one horizon.
#[derive(Debug, Clone)]
pub(crate) struct KeyEstimates {
    pub horizon: usize,
    pub labels: Vec<String>,
    pub coef: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl KeyEstimates {
    /// Estimate and standard error of a contrast, `None` if it references a
    /// dropped block.
    pub fn evaluate(&self, contrast: &Contrast) -> Option<(f64, f64)> {
        let mut c = DVector::zeros(self.labels.len());
        for (label, w) in &contrast.terms {
            let i = self.labels.iter().position(|l| l == label)?;
            c[i] += w;
        }
        let est = c.dot(&self.coef);
        let var = (c.transpose() * &self.cov * &c)[(0, 0)];
        Some((est, var.max(0.0).sqrt()))
    }
}

pub(crate) fn assemble(
    keys: &[KeyEstimates],
    states: &[Contrast],
    differences: &[Contrast],
    ci_level: f64,
    nobs: Vec<usize>,
    mut warnings: Vec<String>,
) -> IrfResult {
    let z = stats::normal_critical(ci_level);
    let states = states
        .iter()
        .map(|c| StateIrf {
            label: c.label.clone(),
            points: keys
                .iter()
                .filter_map(|k| {
                    k.evaluate(c).map(|(estimate, se)| IrfPoint {
                        horizon: k.horizon,
                        estimate,
                        se,
                        ci_low: estimate - z * se,
                        ci_high: estimate + z * se,
                    })
                })
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let differences = differences
        .iter()
        .map(|c| DifferenceIrf {
            label: c.label.clone(),
            points: keys
                .iter()
                .filter_map(|k| {
                    k.evaluate(c).map(|(estimate, se)| {
                        let pvalue = stats::two_sided_pvalue(estimate / se);
                        DiffPoint {
                            horizon: k.horizon,
                            estimate,
                            se,
                            pvalue,
                            stars: stats::stars(pvalue).to_string(),
                        }
                    })
                })
                .collect(),
        })
        .filter(|d| !d.points.is_empty())
        .collect();
    warnings.dedup();
    IrfResult {
        ci_level,
        states,
        differences,
        nobs,
        warnings,
    }
}
