use nalgebra::{DMatrix, DVector};

use super::basis::{bspline_basis, difference_penalty, BasisSet};
use super::solve::{cv_over_folds, factor_augmented, factor_min_norm, mu_grid, CvResult, Fold, PenaltyFrame};
use super::system::{stack_system, StackedSystem};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lp::estimate::{default_eval_points, layout_contrasts, range_warnings};
use crate::lp::result::{assemble, KeyEstimates};
use crate::lp::{Block, IrfResult, Layout, LpSpec};
use crate::regression::{hac_meat, kfold_splits};

/// Smooth local projection settings.
#[derive(Debug, Clone)]
pub struct SlpSpec {
    pub lp: LpSpec,
    /// Difference order `r` of the penalty.
    pub order: usize,
    /// Fixed shrinkage; `None` selects it by cross-validation.
    pub mu: Option<f64>,
    pub grid_points: usize,
    pub folds: usize,
    /// Contiguous quarter blocks as folds; otherwise shuffled with `seed`.
    pub contiguous: bool,
    pub seed: u64,
}

impl SlpSpec {
    pub fn new(lp: LpSpec) -> Self {
        Self {
            lp,
            order: 3,
            mu: None,
            grid_points: 25,
            folds: 5,
            contiguous: true,
            seed: 0,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_folds(mut self, folds: usize, contiguous: bool, seed: u64) -> Self {
        self.folds = folds;
        self.contiguous = contiguous;
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SlpFit {
    /// Stacked spline coefficients, `K` per design column.
    pub theta: DVector<f64>,
    pub mu: f64,
    pub cv: Option<CvResult>,
    pub labels: Vec<String>,
    pub blocks: Vec<Block>,
    pub layout: Layout,
    /// HAC covariance of the IRF coefficients, indexed `block * (H + 1) + h`.
    pub irf_cov: DMatrix<f64>,
    pub bandwidth: usize,
    pub ci_level: f64,
    pub nobs: Vec<usize>,
    pub eval_points: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SlpFit {
    /// Smoothed response of block `b` at horizons `0..=H`.
    pub fn block_irf(&self, basis: &BasisSet, b: usize) -> DVector<f64> {
        let k = basis.k();
        &basis.matrix * self.theta.rows(self.blocks[b].key_col * k, k)
    }
}

/// Contiguous (or shuffled) quarter folds, shared by all horizons.
fn quarter_folds(sys: &StackedSystem, spec: &SlpSpec, xtx: &DMatrix<f64>, xtz: &DVector<f64>) -> Result<Vec<Fold>> {
    let (lo, hi) = sys.quarter_span();
    let units = hi.since(lo) as usize + 1;
    let splits = kfold_splits(units, spec.folds, spec.contiguous, spec.seed)?;
    let mut fold_of = vec![0usize; units];
    for (f, members) in splits.iter().enumerate() {
        for &u in members {
            fold_of[u] = f;
        }
    }
    let fold = |q: crate::data::Quarter| fold_of[q.since(lo) as usize];
    Ok((0..spec.folds)
        .map(|f| {
            let (txx, txz) = sys.normal_equations(|q| fold(q) == f);
            let (test_x, test_z) = sys.rows(|q| fold(q) == f);
            Fold {
                xtx: xtx - txx,
                xtz: xtz - txz,
                test_x,
                test_z,
            }
        })
        .collect())
}

/// Fits the stacked system at shrinkage `mu` with the penalized sandwich
/// covariance of the IRF coefficients. Scores are summed over horizons
/// within each quarter before the Newey-West kernel is applied.
pub fn fit_stacked(sys: &StackedSystem, order: usize, mu: f64, bandwidth: usize, ci_level: f64) -> Result<SlpFit> {
    let pen = difference_penalty(sys.k(), order)?;
    let p = sys.penalty(&pen);
    let (xtx, xtz) = sys.normal_equations(|_| true);
    fit_with(sys, &p, &xtx, &xtz, mu, bandwidth, ci_level)
}

fn fit_with(
    sys: &StackedSystem,
    p: &DMatrix<f64>,
    xtx: &DMatrix<f64>,
    xtz: &DVector<f64>,
    mu: f64,
    bandwidth: usize,
    ci_level: f64,
) -> Result<SlpFit> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("shrinkage must be finite and non-negative, got {mu}")));
    }
    let a = xtx + p * mu;
    let null = sys.null_space(mu == 0.0);
    let factor = match factor_augmented(&a, &null, &PenaltyFrame::new(p)) {
        Some(f) => f,
        None if mu == 0.0 => factor_min_norm(&a),
        None => {
            return Err(Error::Singular(format!(
                "penalized normal equations are singular at mu = {mu}"
            )))
        }
    };
    let theta = factor.solve_vec(xtz);

    let (k, hn, nb) = (sys.k(), sys.basis.horizon_max + 1, sys.blocks.len());
    let m = nb * hn;
    // L maps theta to the IRF coefficients (block, h)
    let mut l = DMatrix::zeros(m, sys.ncols());
    for (b, block) in sys.blocks.iter().enumerate() {
        for h in 0..hn {
            l.view_mut((b * hn + h, block.key_col * k), (1, k))
                .copy_from(&sys.basis.matrix.row(h));
        }
    }
    let g = factor.solve(&l.transpose()).transpose();

    let (lo, hi) = sys.quarter_span();
    let units = hi.since(lo) as usize + 1;
    if bandwidth >= units {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {bandwidth} needs more than {units} quarters"
        )));
    }
    let mut scores = DMatrix::zeros(units, m);
    for d in &sys.designs {
        let beta = sys.horizon_coefficients(&theta, d.horizon);
        let resid = &d.y - &d.x * beta;
        let b = sys.basis.row(d.horizon);
        // G_h[:, c] = sum_k G[:, c K + k] B_k(h)
        let gh = DMatrix::from_fn(m, sys.labels.len(), |i, c| g.view((i, c * k), (1, k)).transpose().dot(&b));
        for i in 0..d.y.len() {
            let s = &gh * d.x.row(i).transpose() * resid[i];
            let u = d.quarters[i].since(lo) as usize;
            let mut row = scores.row_mut(u);
            row += s.transpose();
        }
    }
    let cov = hac_meat(&scores, bandwidth)?;
    Ok(SlpFit {
        theta,
        mu,
        cv: None,
        labels: sys.labels.clone(),
        blocks: sys.blocks.clone(),
        layout: sys.layout,
        irf_cov: (&cov + cov.transpose()) * 0.5,
        bandwidth,
        ci_level,
        nobs: sys.designs.iter().map(|d| d.y.len()).collect(),
        eval_points: Vec::new(),
        warnings: sys.designs.iter().flat_map(|d| d.warnings.iter().cloned()).collect(),
    })
}

/// Smooth local projection: stacks horizons `0..=H`, expands every
/// coefficient in cubic B-splines, penalizes the `r`-th differences of each
/// state's shock-response coefficients and selects the shrinkage by k-fold
/// cross-validation unless it is fixed.
pub fn estimate_slp(ds: &Dataset, spec: &SlpSpec) -> Result<SlpFit> {
    spec.lp.validate()?;
    let basis = bspline_basis(spec.lp.horizon_max)?;
    let sys = stack_system(ds, &spec.lp, &basis)?;
    let pen = difference_penalty(sys.k(), spec.order)?;
    let p = sys.penalty(&pen);
    let (xtx, xtz) = sys.normal_equations(|_| true);
    let bandwidth = spec.lp.bandwidth.unwrap_or(spec.lp.horizon_max + 1);

    let (mu, cv) = match spec.mu {
        Some(mu) => (mu, None),
        None => {
            let grid = mu_grid(&xtx, &p, spec.grid_points);
            let folds = quarter_folds(&sys, spec, &xtx, &xtz)?;
            let zz: f64 = sys.designs.iter().map(|d| d.y.norm_squared()).sum();
            let null = sys.null_space(false);
            let cv = cv_over_folds(&folds, &p, &null, &grid, zz)?;
            log::info!("cross-validation selected mu = {:.4e}", cv.mu_star);
            (cv.mu_star, Some(cv))
        }
    };
    let mut fit = fit_with(&sys, &p, &xtx, &xtz, mu, bandwidth, spec.lp.ci_level)?;
    fit.cv = cv;
    if sys.layout == Layout::Continuous {
        let sample = &sys.designs[0].quarters;
        fit.eval_points = default_eval_points(ds, &spec.lp, sample);
        fit.warnings.extend(range_warnings(&spec.lp, sample, &fit.eval_points));
    }
    Ok(fit)
}

/// Per-state smoothed IRFs `beta_h = sum_k b_k B_k(h)` with sandwich
/// standard errors and the same contrasts as the unsmoothed estimators.
pub fn slp_irf(fit: &SlpFit, basis: &BasisSet) -> Result<IrfResult> {
    let k = basis.k();
    if fit.theta.len() != fit.labels.len() * k {
        return Err(Error::InvalidArgument(format!(
            "basis with K = {k} does not match a fit with {} coefficients",
            fit.theta.len()
        )));
    }
    let hn = basis.horizon_max + 1;
    let irfs: Vec<DVector<f64>> = (0..fit.blocks.len()).map(|b| fit.block_irf(basis, b)).collect();
    let keys: Vec<KeyEstimates> = (0..hn)
        .map(|h| {
            let nb = fit.blocks.len();
            KeyEstimates {
                horizon: h,
                labels: fit.blocks.iter().map(|b| b.label.clone()).collect(),
                coef: DVector::from_fn(nb, |b, _| irfs[b][h]),
                cov: DMatrix::from_fn(nb, nb, |a, b| fit.irf_cov[(a * hn + h, b * hn + h)]),
            }
        })
        .collect();
    let (states, diffs) = layout_contrasts(fit.layout, &fit.eval_points);
    Ok(assemble(
        &keys,
        &states,
        &diffs,
        fit.ci_level,
        fit.nobs.clone(),
        fit.warnings.clone(),
    ))
}
