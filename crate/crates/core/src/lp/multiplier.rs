use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{fill_block_row, plan_rows, response, Layout, MIN_EXTRA_ROWS};
use super::estimate::{default_eval_points, layout_contrasts, range_warnings};
use super::result::{assemble, IrfResult, KeyEstimates};
use super::spec::LpSpec;
use crate::data::{Dataset, Quarter, ShockSeries};
use crate::error::{Error, Result};
use crate::regression::{effective_f, tsls, EffectiveF};

/// First-stage strength of one state's instrument block at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageDiagnostic {
    pub state: String,
    pub horizon: usize,
    /// `None` with more than two instruments (no tabulated critical value).
    pub effective_f: Option<EffectiveF>,
}

impl FirstStageDiagnostic {
    pub fn is_weak(&self) -> Option<bool> {
        self.effective_f.map(|f| f.is_weak())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierResult {
    /// Cumulative multipliers `m_h` per state, with cross-state contrasts.
    pub irf: IrfResult,
    pub first_stage: Vec<FirstStageDiagnostic>,
}

struct IvDesign {
    y: DVector<f64>,
    endog: DMatrix<f64>,
    instruments: DMatrix<f64>,
    exog: DMatrix<f64>,
    labels: Vec<String>,
    quarters: Vec<Quarter>,
    warnings: Vec<String>,
}

fn iv_design(ds: &Dataset, spec: &LpSpec, spending: &str, inst: &[Vec<f64>], h: usize) -> Result<IvDesign> {
    let y = ds.values(&spec.dependent)?;
    let g = ds.values(spending)?;
    let controls = spec
        .controls
        .iter()
        .map(|c| ds.values(c))
        .collect::<Result<Vec<_>>>()?;
    let inst_refs: Vec<&[f64]> = inst.iter().map(Vec::as_slice).collect();
    let plan = plan_rows(ds, spec, h, &[y, g], &inst_refs)?;
    let nb = plan.blocks.len();
    let k = inst.len();
    let width = 1 + spec.controls.len() * spec.control_lags;
    let ncols = nb * (width + 1);
    let n = plan.rows.len();
    if n < ncols + MIN_EXTRA_ROWS {
        return Err(Error::InsufficientSample {
            rows: n,
            columns: ncols,
            required: ncols + MIN_EXTRA_ROWS,
        });
    }

    let mut exog = Vec::with_capacity(n * nb * width);
    let mut endog = Vec::with_capacity(n * nb);
    let mut z = Vec::with_capacity(n * nb * k);
    let mut yy = Vec::with_capacity(n);
    for &t in &plan.rows {
        let gc = response(g, t, h, true);
        for (_, w) in &plan.blocks {
            fill_block_row(&mut exog, &controls, spec.control_lags, t, w[t], None);
            endog.push(w[t] * gc);
            z.extend(inst.iter().map(|s| w[t] * s[t]));
        }
        yy.push(response(y, t, h, true));
    }
    Ok(IvDesign {
        y: DVector::from_vec(yy),
        endog: DMatrix::from_row_slice(n, nb, &endog),
        instruments: DMatrix::from_row_slice(n, nb * k, &z),
        exog: DMatrix::from_row_slice(n, nb * width, &exog),
        labels: plan.blocks.into_iter().map(|(l, _)| l).collect(),
        quarters: plan.rows.iter().map(|&t| ds.quarter(t)).collect(),
        warnings: plan.warnings,
    })
}

/// Effective F of block `b`: its endogenous column on its own instruments,
/// partialling out the exogenous block and the other blocks' instruments.
fn block_effective_f(d: &IvDesign, b: usize, k: usize, bandwidth: usize) -> Result<Option<EffectiveF>> {
    let n = d.y.len();
    let nb = d.labels.len();
    let own = d.instruments.columns(b * k, k).into_owned();
    let others: Vec<usize> = (0..nb * k).filter(|j| j / k != b).collect();
    let mut controls = DMatrix::zeros(n, d.exog.ncols() + others.len());
    controls.columns_mut(0, d.exog.ncols()).copy_from(&d.exog);
    for (i, &j) in others.iter().enumerate() {
        controls.set_column(d.exog.ncols() + i, &d.instruments.column(j));
    }
    let endog = d.endog.columns(b, 1).into_owned();
    match effective_f(&endog, &own, &controls, bandwidth) {
        Ok(f) => Ok(Some(f)),
        Err(Error::Unsupported(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

struct HorizonIv {
    keys: KeyEstimates,
    diagnostics: Vec<FirstStageDiagnostic>,
    nobs: usize,
    quarters: Vec<Quarter>,
    warnings: Vec<String>,
}

fn fit_iv(ds: &Dataset, spec: &LpSpec, spending: &str, inst: &[Vec<f64>], h: usize) -> Result<HorizonIv> {
    let d = iv_design(ds, spec, spending, inst, h)?;
    let bw = spec.bandwidth_at(h);
    let iv = tsls(&d.y, &d.endog, &d.instruments, &d.exog, bw)?;
    let nb = d.labels.len();
    let fit = &iv.second_stage;
    let keys = KeyEstimates {
        horizon: h,
        labels: d.labels.clone(),
        coef: fit.coefficients.rows(0, nb).into_owned(),
        cov: fit.covariance.view((0, 0), (nb, nb)).into_owned(),
    };
    let diagnostics = (0..nb)
        .map(|b| {
            Ok(FirstStageDiagnostic {
                state: d.labels[b].clone(),
                horizon: h,
                effective_f: block_effective_f(&d, b, inst.len(), bw)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonIv {
        keys,
        diagnostics,
        nobs: fit.nobs,
        quarters: d.quarters,
        warnings: d.warnings,
    })
}

/// State-dependent cumulative multipliers by LP-IV.
///
/// At horizon `h` the cumulated response `sum_{i<=h} y_{t+i}` (`y` is
/// `spec.dependent`) is regressed on the cumulated `spending`, instrumented by
/// the shock series, each interacted with the state blocks. `spec.shock` is
/// not used. Weak instruments are reported through the first-stage
/// diagnostics.
pub fn estimate_multiplier(
    ds: &Dataset,
    spec: &LpSpec,
    spending: &str,
    instruments: &[ShockSeries],
) -> Result<MultiplierResult> {
    spec.validate()?;
    if instruments.is_empty() {
        return Err(Error::InvalidArgument("at least one instrument is required".into()));
    }
    let spec = spec.clone().cumulative(true);
    let inst: Vec<Vec<f64>> = instruments
        .iter()
        .map(|s| s.aligned(ds.start(), ds.len()))
        .collect();
    let fits = (0..=spec.horizon_max)
        .into_par_iter()
        .map(|h| fit_iv(ds, &spec, spending, &inst, h).map_err(|e| e.at_horizon(h)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let layout = Layout::of(&spec);
    let mut warnings = Vec::new();
    let points = if layout == Layout::Continuous {
        let p = default_eval_points(ds, &spec, &fits[0].quarters);
        warnings.extend(range_warnings(&spec, &fits[0].quarters, &p));
        p
    } else {
        Vec::new()
    };
    let (states, diffs) = layout_contrasts(layout, &points);
    for f in &fits {
        warnings.extend(f.warnings.iter().cloned());
        for d in &f.diagnostics {
            if d.is_weak() == Some(true) {
                let msg = format!(
                    "horizon {}: weak first stage in state {} (effective F below critical value)",
                    d.horizon, d.state
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let keys: Vec<KeyEstimates> = fits.iter().map(|f| f.keys.clone()).collect();
    let nobs = fits.iter().map(|f| f.nobs).collect();
    let irf = assemble(&keys, &states, &diffs, spec.ci_level, nobs, warnings);
    let first_stage = fits.into_iter().flat_map(|f| f.diagnostics).collect();
    Ok(MultiplierResult { irf, first_stage })
}
