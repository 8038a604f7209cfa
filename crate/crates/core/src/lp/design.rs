use nalgebra::{DMatrix, DVector};

use super::spec::LpSpec;
use crate::data::{Dataset, Quarter, StateSeries};
use crate::error::{Error, Result};

/// Extra rows required beyond the column count.
pub(crate) const MIN_EXTRA_ROWS: usize = 8;

/// Blocks whose weights never exceed this in absolute value are dropped.
const DEGENERATE_WEIGHT: f64 = 1e-6;

/// How state weights split the regressors into interacted blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One block, no state.
    Linear,
    /// Blocks weighted by `I` (state A) and `1 - I` (state B).
    TwoState,
    /// Always-on baseline block plus blocks weighted by `I^B` and `I^C`.
    HorseRace,
    /// Baseline block plus a block weighted by the continuous state.
    Continuous,
}

impl Layout {
    pub fn of(spec: &LpSpec) -> Layout {
        match (&spec.state, &spec.second_state) {
            (None, _) => Layout::Linear,
            (Some(_), Some(_)) => Layout::HorseRace,
            (Some(s), None) if s.is_regime() => Layout::TwoState,
            (Some(_), None) => Layout::Continuous,
        }
    }

    /// Labels of the blocks before any degenerate block is dropped.
    pub fn block_labels(self) -> &'static [&'static str] {
        match self {
            Layout::Linear => &["linear"],
            Layout::TwoState => &["A", "B"],
            Layout::HorseRace => &["A", "B", "C"],
            Layout::Continuous => &["base", "interaction"],
        }
    }
}

/// A block of interacted regressors inside a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    /// First column of the block.
    pub start: usize,
    pub width: usize,
    /// Column holding the shock (or endogenous regressor) coefficient.
    pub key_col: usize,
}

/// Horizon-`h` regression of a local projection.
#[derive(Debug, Clone)]
pub struct Design {
    pub horizon: usize,
    pub layout: Layout,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Quarter `t` of each row.
    pub quarters: Vec<Quarter>,
    pub blocks: Vec<Block>,
    pub warnings: Vec<String>,
}

/// Dataset rows usable at one horizon and the surviving block weights.
#[derive(Debug, Clone)]
pub(crate) struct RowPlan {
    pub rows: Vec<usize>,
    pub blocks: Vec<(String, Vec<f64>)>,
    pub warnings: Vec<String>,
}

fn state_on(ds: &Dataset, state: &StateSeries) -> Vec<f64> {
    (0..ds.len()).map(|i| state.get(ds.quarter(i))).collect()
}

/// Per-dataset-row weights for each block of the layout.
fn layout_weights(ds: &Dataset, spec: &LpSpec, layout: Layout) -> Vec<Vec<f64>> {
    let n = ds.len();
    let ones = vec![1.0; n];
    match layout {
        Layout::Linear => vec![ones],
        Layout::TwoState => {
            let w = state_on(ds, spec.state.as_ref().expect("two-state layout has a state"));
            let c = w.iter().map(|v| 1.0 - v).collect();
            vec![w, c]
        }
        Layout::HorseRace => vec![
            ones,
            state_on(ds, spec.state.as_ref().expect("horse race has a state")),
            state_on(ds, spec.second_state.as_ref().expect("horse race has two states")),
        ],
        Layout::Continuous => vec![
            ones,
            state_on(ds, spec.state.as_ref().expect("continuous layout has a state")),
        ],
    }
}

/// Selects rows `t` where every lead, contemporaneous regressor, control lag
/// and weight is observed, then drops degenerate blocks.
pub(crate) fn plan_rows(
    ds: &Dataset,
    spec: &LpSpec,
    horizon: usize,
    leads: &[&[f64]],
    contemporaneous: &[&[f64]],
) -> Result<RowPlan> {
    let layout = Layout::of(spec);
    let weights = layout_weights(ds, spec, layout);
    let controls = spec
        .controls
        .iter()
        .map(|c| ds.values(c))
        .collect::<Result<Vec<_>>>()?;
    let p = spec.control_lags;
    let n = ds.len();
    let first_lead = if spec.cumulative { 0 } else { horizon };
    let rows: Vec<usize> = (p..n.saturating_sub(horizon))
        .filter(|&t| {
            leads
                .iter()
                .all(|s| (t + first_lead..=t + horizon).all(|i| s[i].is_finite()))
                && contemporaneous.iter().all(|s| s[t].is_finite())
                && controls
                    .iter()
                    .all(|s| (1..=p).all(|l| s[t - l].is_finite()))
                && weights.iter().all(|w| w[t].is_finite())
        })
        .collect();

    let mut warnings = Vec::new();
    let mut blocks = Vec::new();
    for (label, w) in layout.block_labels().iter().zip(weights) {
        let max = rows.iter().fold(0.0f64, |m, &t| m.max(w[t].abs()));
        if !rows.is_empty() && max < DEGENERATE_WEIGHT {
            let msg = format!(
                "horizon {horizon}: block {label} has (near) zero weight on every usable row and was dropped"
            );
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        blocks.push((label.to_string(), w));
    }
    Ok(RowPlan {
        rows,
        blocks,
        warnings,
    })
}

/// Column labels and values of one unweighted block row: constant, optional
/// key regressor, control lags.
pub(crate) fn block_template(spec: &LpSpec, key: Option<&str>) -> Vec<String> {
    let mut labels = vec!["const".to_string()];
    if let Some(k) = key {
        labels.push(k.to_string());
    }
    for c in &spec.controls {
        for l in 1..=spec.control_lags {
            labels.push(format!("{c}(-{l})"));
        }
    }
    labels
}

pub(crate) fn fill_block_row(
    out: &mut Vec<f64>,
    controls: &[&[f64]],
    lags: usize,
    t: usize,
    weight: f64,
    key: Option<f64>,
) {
    out.push(weight);
    if let Some(k) = key {
        out.push(weight * k);
    }
    for c in controls {
        for l in 1..=lags {
            out.push(weight * c[t - l]);
        }
    }
}

/// Response at horizon `h`: `z_{t+h}` or `sum_{i<=h} z_{t+i}` when cumulative.
pub(crate) fn response(z: &[f64], t: usize, horizon: usize, cumulative: bool) -> f64 {
    if cumulative {
        z[t..=t + horizon].iter().sum()
    } else {
        z[t + horizon]
    }
}

/// Builds the horizon-`h` design.
///
/// Rows are quarters with complete data for `t - lags ..= t + h`. Each block
/// holds `[1, shock_t, x_{j,t-l}]` multiplied by its weight; blocks whose
/// weight vanishes on the sample are dropped with a warning.
pub fn build_design(ds: &Dataset, spec: &LpSpec, horizon: usize) -> Result<Design> {
    spec.validate()?;
    let z = ds.values(&spec.dependent)?;
    let shock = ds.values(&spec.shock)?;
    let controls = spec
        .controls
        .iter()
        .map(|c| ds.values(c))
        .collect::<Result<Vec<_>>>()?;
    let plan = plan_rows(ds, spec, horizon, &[z], &[shock])?;
    let template = block_template(spec, Some("shock"));
    let width = template.len();
    let ncols = width * plan.blocks.len();
    let required = ncols + MIN_EXTRA_ROWS;
    if plan.rows.len() < required {
        return Err(Error::InsufficientSample {
            rows: plan.rows.len(),
            columns: ncols,
            required,
        });
    }

    let mut labels = Vec::with_capacity(ncols);
    let mut blocks = Vec::with_capacity(plan.blocks.len());
    for (b, (label, _)) in plan.blocks.iter().enumerate() {
        blocks.push(Block {
            label: label.clone(),
            start: b * width,
            width,
            key_col: b * width + 1,
        });
        labels.extend(template.iter().map(|c| format!("{label}:{c}")));
    }

    let mut data = Vec::with_capacity(plan.rows.len() * ncols);
    let mut y = Vec::with_capacity(plan.rows.len());
    for &t in &plan.rows {
        for (_, w) in &plan.blocks {
            fill_block_row(&mut data, &controls, spec.control_lags, t, w[t], Some(shock[t]));
        }
        y.push(response(z, t, horizon, spec.cumulative));
    }
    Ok(Design {
        horizon,
        layout: Layout::of(spec),
        y: DVector::from_vec(y),
        x: DMatrix::from_row_slice(plan.rows.len(), ncols, &data),
        labels,
        quarters: plan.rows.iter().map(|&t| ds.quarter(t)).collect(),
        blocks,
        warnings: plan.warnings,
    })
}

/// Usable rows per horizon `0..=horizon_max`, without estimating anything.
pub fn sample_sizes(ds: &Dataset, spec: &LpSpec) -> Result<Vec<usize>> {
    let z = ds.values(&spec.dependent)?;
    let shock = ds.values(&spec.shock)?;
    (0..=spec.horizon_max)
        .map(|h| plan_rows(ds, spec, h, &[z], &[shock]).map(|p| p.rows.len()))
        .collect()
}
