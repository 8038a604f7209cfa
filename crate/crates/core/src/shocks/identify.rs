use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvar::{draw_rng, VarDraw, VarModel, STREAM_ROTATION};
use super::var::{impulse_responses, VarData};
use crate::data::{standardize_shock, Quarter, Series, ShockSeries};
use crate::error::{Error, Result};
use crate::stats;

/// Haar-distributed orthogonal matrix: the Q factor of a standard normal
/// matrix with the signs fixed so that `R` has a positive diagonal.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockSign {
    Positive,
    Negative,
}

impl ShockSign {
    pub fn holds(self, value: f64) -> bool {
        match self {
            ShockSign::Positive => value > 0.0,
            ShockSign::Negative => value < 0.0,
        }
    }
}

/// Sign (and optionally dominance) of the spending shock at one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeRestriction {
    pub date: Quarter,
    pub sign: ShockSign,
    /// The spending shock's contribution to the spending innovation must
    /// exceed, in absolute value, the summed contribution of all other
    /// shocks.
    pub dominance: bool,
}

impl NarrativeRestriction {
    pub fn positive(date: Quarter, dominance: bool) -> Self {
        Self {
            date,
            sign: ShockSign::Positive,
            dominance,
        }
    }
}

/// Which rotated column is the spending shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRule {
    /// The first column, signed to raise spending on impact.
    #[default]
    First,
    /// Every column is signed to raise spending on impact; the spending
    /// shock is the only column meeting the sign restriction, and draws
    /// with several qualifying columns are rejected as ambiguous.
    UniqueQualifying,
}

/// A candidate structural model from one posterior draw and one rotation.
#[derive(Debug, Clone)]
pub struct StructuralDraw {
    /// `A` with `u_t = A eps_t`, `A A' = Sigma`.
    pub impact: DMatrix<f64>,
    /// Column of the spending shock, `None` if no column (or, under
    /// [`ColumnRule::UniqueQualifying`], more than one) qualifies.
    pub spending_shock: Option<usize>,
    /// Number of columns meeting the sign restriction.
    pub qualifying: usize,
    /// Response of every variable to the candidate spending shock (the
    /// first column when none qualifies), `(H + 1) x n`.
    pub irf: DMatrix<f64>,
    /// Structural shocks `eps_t = A^-1 u_t`, one row per sample quarter.
    pub shocks: DMatrix<f64>,
}

/// Settings for sign and narrative identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationConfig {
    pub spending: String,
    /// Spending must rise for horizons `0..sign_horizons`.
    pub sign_horizons: usize,
    pub restrictions: Vec<NarrativeRestriction>,
    pub rule: ColumnRule,
    pub seed: u64,
}

impl IdentificationConfig {
    pub fn new(spending: impl Into<String>) -> Self {
        Self {
            spending: spending.into(),
            sign_horizons: 4,
            restrictions: Vec::new(),
            rule: ColumnRule::default(),
            seed: 0,
        }
    }
}

/// Accepts iff the spending response is positive at every horizon
/// `0..horizon_quarters`.
pub fn check_sign(spending_irf: &[f64], horizon_quarters: usize) -> bool {
    spending_irf.len() >= horizon_quarters && spending_irf[..horizon_quarters].iter().all(|v| *v > 0.0)
}

/// Contribution of each structural shock to the one-step forecast error of
/// variable `var` at a date with structural shocks `eps`:
/// `A[var, j] eps_j`, summing to the reduced-form innovation.
pub fn historical_decomposition(impact: &DMatrix<f64>, eps: &DVector<f64>, var: usize) -> DVector<f64> {
    impact.row(var).transpose().component_mul(eps)
}

/// Narrative check of a draw whose spending shock is column `shock`.
pub fn check_narrative(
    draw: &StructuralDraw,
    data: &VarData,
    spending: usize,
    restrictions: &[NarrativeRestriction],
) -> Result<bool> {
    let Some(s) = draw.spending_shock else {
        return Ok(false);
    };
    for r in restrictions {
        let t = data.row_of(r.date).ok_or_else(|| {
            Error::InvalidArgument(format!("narrative date {} is outside the VAR sample", r.date))
        })?;
        let eps = draw.shocks.row(t).transpose();
        if !r.sign.holds(eps[s]) {
            return Ok(false);
        }
        if r.dominance {
            let contrib = historical_decomposition(&draw.impact, &eps, spending);
            let own = contrib[s];
            let others = contrib.sum() - own;
            if own.abs() <= others.abs() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Builds the candidate structural model `A = chol(Sigma) Q`.
pub fn structural_draw(
    data: &VarData,
    draw: &VarDraw,
    rotation: &DMatrix<f64>,
    spending: usize,
    sign_horizons: usize,
    rule: ColumnRule,
) -> Result<StructuralDraw> {
    let n = data.nvars();
    let chol = draw
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance is not positive definite".into()))?;
    let mut impact = chol.l() * rotation;
    let candidates: Vec<usize> = match rule {
        ColumnRule::First => vec![0],
        ColumnRule::UniqueQualifying => (0..n).collect(),
    };
    for &j in &candidates {
        if impact[(spending, j)] < 0.0 {
            impact.column_mut(j).neg_mut();
        }
    }
    let horizon = sign_horizons.max(1) - 1;
    let irf_of = |j: usize| impulse_responses(&draw.b, n, data.lags, &impact.column(j).into_owned(), horizon);
    let mut qualifying = Vec::new();
    let mut irfs = Vec::new();
    for &j in &candidates {
        let irf = irf_of(j);
        let g: Vec<f64> = irf.column(spending).iter().copied().collect();
        if check_sign(&g, sign_horizons) {
            qualifying.push(j);
        }
        irfs.push(irf);
    }
    let spending_shock = (qualifying.len() == 1).then(|| qualifying[0]);
    let shown = spending_shock.unwrap_or(candidates[0]);
    let irf = irfs.swap_remove(candidates.iter().position(|&j| j == shown).expect("candidate"));
    let u = data.residuals(&draw.b);
    let inv = impact
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("impact matrix is singular".into()))?;
    let shocks = u * inv.transpose();
    Ok(StructuralDraw {
        impact,
        spending_shock,
        qualifying: qualifying.len(),
        irf,
        shocks,
    })
}

/// Outcome of sign and narrative identification.
#[derive(Debug, Clone)]
pub struct NarrativeResult {
    /// Per-quarter median of the accepted spending-shock series,
    /// standardized.
    pub shock: ShockSeries,
    pub draws: usize,
    pub accepted_sign: usize,
    pub accepted_narrative: usize,
    /// Draws rejected because several columns met the sign restriction.
    pub ambiguous: usize,
    /// Indices of the posterior draws passing the sign restriction.
    pub sign_accepted: Vec<usize>,
    /// Indices of the posterior draws passing both checks.
    pub accepted: Vec<usize>,
}

struct Verdict {
    sign: bool,
    narrative: bool,
    ambiguous: bool,
    series: Option<Vec<f64>>,
}

/// Sign and narrative sign identification of the spending shock.
///
/// Each posterior draw is paired with one uniform rotation (drawn from its
/// own generator stream), checked against the sign restriction and then
/// against the narrative restrictions. The per-quarter median of the
/// accepted spending-shock series is standardized to unit variance.
pub fn narrative_shocks(model: &VarModel, config: &IdentificationConfig) -> Result<NarrativeResult> {
    let data = &model.data;
    let spending = data.index_of(&config.spending)?;
    if config.sign_horizons == 0 {
        return Err(Error::InvalidArgument("the sign restriction needs at least one horizon".into()));
    }
    for r in &config.restrictions {
        if data.row_of(r.date).is_none() {
            return Err(Error::InvalidArgument(format!(
                "narrative date {} is outside the VAR sample {}..{}",
                r.date,
                data.quarters[0],
                data.quarters[data.nobs() - 1]
            )));
        }
    }
    let n = data.nvars();
    let verdicts = model
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, draw)| {
            let mut rng = draw_rng(config.seed, STREAM_ROTATION, i);
            let q = random_rotation(n, &mut rng);
            let sd = structural_draw(data, draw, &q, spending, config.sign_horizons, config.rule)?;
            let sign = sd.spending_shock.is_some();
            let narrative = sign && check_narrative(&sd, data, spending, &config.restrictions)?;
            Ok(Verdict {
                sign,
                narrative,
                ambiguous: sd.qualifying > 1,
                series: narrative.then(|| sd.shocks.column(sd.spending_shock.expect("signed")).iter().copied().collect()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let accepted_sign = verdicts.iter().filter(|v| v.sign).count();
    let accepted_narrative = verdicts.iter().filter(|v| v.narrative).count();
    let ambiguous = verdicts.iter().filter(|v| v.ambiguous).count();
    assert!(
        verdicts.iter().all(|v| !v.narrative || v.sign),
        "narrative-accepted draws must pass the sign restriction"
    );
    log::info!(
        "identification: {accepted_sign} of {} draws pass the sign restriction, {accepted_narrative} also pass the narrative restrictions ({ambiguous} ambiguous)",
        verdicts.len()
    );
    if accepted_narrative == 0 {
        return Err(Error::Identification {
            draws: verdicts.len(),
            accepted_sign,
            accepted_narrative,
        });
    }
    let indices = |keep: fn(&Verdict) -> bool| -> Vec<usize> {
        verdicts.iter().enumerate().filter(|(_, v)| keep(v)).map(|(i, _)| i).collect()
    };
    let sign_accepted = indices(|v| v.sign);
    let accepted = indices(|v| v.narrative);
    let series: Vec<&Vec<f64>> = verdicts.iter().filter_map(|v| v.series.as_ref()).collect();
    let median: Vec<f64> = (0..data.nobs())
        .map(|t| {
            let column: Vec<f64> = series.iter().map(|s| s[t]).collect();
            stats::median(&column).expect("at least one accepted draw")
        })
        .collect();
    let shock = standardize_shock(&Series::new(data.quarters[0], median))?;
    Ok(NarrativeResult {
        shock,
        draws: verdicts.len(),
        accepted_sign,
        accepted_narrative,
        ambiguous,
        sign_accepted,
        accepted,
    })
}
