//! Two-stage least squares with HAC inference and the Montiel Olea-Pflueger
//! effective F statistic for a single endogenous regressor.

use nalgebra::{DMatrix, DVector};

use super::hac::newey_west;
use super::ols::{ols, RegressionResult};
use crate::error::{Error, Result};

/// Worst-case Nagar bias threshold (tau = 10%) used for critical values.
pub const MOP_BIAS_THRESHOLD: f64 = 0.10;

/// Simplified-procedure critical values at the 5% level for tau = 10%
/// (x = 1/tau = 10), `chi2nc_inv(0.95; k, 10 k) / k`, tabulated for
/// effective degrees of freedom k = 1.00, 1.05, ..., 2.00.
const MOP_TAU10_TABLE: [f64; 21] = [
    23.108511211606643,
    22.787652975418339,
    22.490005057565071,
    22.212937524222877,
    21.954216471388388,
    21.711930860318127,
    21.484435171044517,
    21.270303994246657,
    21.068295737939163,
    20.877323367614391,
    20.696430627337346,
    20.524772571049038,
    20.361599512219104,
    20.206243706000098,
    20.058108231795622,
    19.916657660032907,
    19.781410175050844,
    19.651930893599769,
    19.527826170695363,
    19.408738725266829,
    19.294343449962533,
];

const TABLE_STEP: f64 = 0.05;

/// Critical value for the effective F test at effective degrees of freedom
/// `k_eff` in [1, 2] (at most two instruments).
pub fn mop_critical_value(k_eff: f64) -> Result<f64> {
    if !(k_eff >= 1.0 - 1e-9 && k_eff <= 2.0 + 1e-9) {
        return Err(Error::Unsupported(format!(
            "effective F critical values are tabulated for at most two instruments (k_eff = {k_eff:.3})"
        )));
    }
    let pos = ((k_eff - 1.0) / TABLE_STEP).clamp(0.0, (MOP_TAU10_TABLE.len() - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(MOP_TAU10_TABLE.len() - 1);
    let frac = pos - lo as f64;
    Ok(MOP_TAU10_TABLE[lo] + frac * (MOP_TAU10_TABLE[hi] - MOP_TAU10_TABLE[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EffectiveF {
    pub statistic: f64,
    pub critical: f64,
    pub k_eff: f64,
}

impl EffectiveF {
    /// Positive when the instrument set is relevant at the tau = 10% threshold.
    pub fn margin(&self) -> f64 {
        self.statistic - self.critical
    }

    pub fn is_weak(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Effective F from first-stage instrument coefficients `pi`, the instrument
/// Gram matrix `zz = Z'Z` (exogenous regressors partialled out) and the HAC
/// covariance `v_pi` of `pi`.
pub fn effective_f_from_parts(pi: &DVector<f64>, zz: &DMatrix<f64>, v_pi: &DMatrix<f64>) -> Result<EffectiveF> {
    let k = pi.len();
    if zz.shape() != (k, k) || v_pi.shape() != (k, k) {
        return Err(Error::InvalidArgument("effective F inputs have mismatched shapes".into()));
    }
    let chol = zz
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("instrument Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    // W = L' V L has the eigenvalues of V Z'Z
    let w = l.transpose() * v_pi * &l;
    let w = (&w + w.transpose()) * 0.5;
    let trace = w.trace();
    if !(trace > 0.0) {
        return Err(Error::Singular("first-stage HAC covariance has zero trace".into()));
    }
    let statistic = (pi.transpose() * zz * pi)[(0, 0)] / trace;
    let eig = w.clone().symmetric_eigen().eigenvalues;
    let max_eig = eig.max();
    let x = 1.0 / MOP_BIAS_THRESHOLD;
    let trace_sq = (&w * &w).trace();
    let k_eff = trace * trace * (1.0 + 2.0 * x) / (trace_sq + 2.0 * x * trace * max_eig);
    let critical = mop_critical_value(k_eff)?;
    Ok(EffectiveF {
        statistic: statistic.max(0.0),
        critical,
        k_eff,
    })
}

fn partial_out(target: &DMatrix<f64>, exog: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if exog.ncols() == 0 {
        return Ok(target.clone());
    }
    let mut out = target.clone();
    for j in 0..target.ncols() {
        let fit = ols(&target.column(j).into_owned(), exog)?;
        out.set_column(j, &fit.residuals);
    }
    Ok(out)
}

/// Effective F statistic for one endogenous regressor instrumented by
/// `instruments`, controlling for `exog`.
pub fn effective_f(
    endogenous: &DMatrix<f64>,
    instruments: &DMatrix<f64>,
    exog: &DMatrix<f64>,
    bandwidth: usize,
) -> Result<EffectiveF> {
    if endogenous.ncols() != 1 {
        return Err(Error::Unsupported(format!(
            "effective F supports a single endogenous regressor, got {}",
            endogenous.ncols()
        )));
    }
    let x = partial_out(endogenous, exog)?.column(0).into_owned();
    let z = partial_out(instruments, exog)?;
    let first = ols(&x, &z)?;
    let v_pi = newey_west(&z, &first.residuals, bandwidth)?;
    effective_f_from_parts(&first.coefficients, &(z.transpose() * &z), &v_pi)
}

#[derive(Debug, Clone)]
pub struct IvResult {
    /// Coefficients ordered `[endogenous..., exogenous...]`, HAC covariance,
    /// structural residuals `y - X beta`.
    pub second_stage: RegressionResult,
    /// One first-stage regression per endogenous regressor on
    /// `[instruments..., exogenous...]`.
    pub first_stage: Vec<RegressionResult>,
    /// Present when there is a single endogenous regressor and at most two
    /// instruments.
    pub effective_f: Option<EffectiveF>,
}

/// Two-stage least squares with Newey-West covariance of the IV score.
pub fn tsls(
    y: &DVector<f64>,
    endogenous: &DMatrix<f64>,
    instruments: &DMatrix<f64>,
    exog: &DMatrix<f64>,
    bandwidth: usize,
) -> Result<IvResult> {
    let n = y.len();
    let (ke, ki, kx) = (endogenous.ncols(), instruments.ncols(), exog.ncols());
    if endogenous.nrows() != n || instruments.nrows() != n || exog.nrows() != n {
        return Err(Error::InvalidArgument("IV blocks must share the row count".into()));
    }
    if ke == 0 {
        return Err(Error::InvalidArgument("no endogenous regressor".into()));
    }
    if ki < ke {
        return Err(Error::InvalidArgument(format!(
            "under-identified: {ki} instruments for {ke} endogenous regressors"
        )));
    }
    let z = DMatrix::from_fn(n, ki + kx, |i, j| {
        if j < ki {
            instruments[(i, j)]
        } else {
            exog[(i, j - ki)]
        }
    });
    let mut first_stage = Vec::with_capacity(ke);
    let mut x_hat = DMatrix::zeros(n, ke + kx);
    let mut x = DMatrix::zeros(n, ke + kx);
    for j in 0..ke {
        let col = endogenous.column(j).into_owned();
        let fit = ols(&col, &z)?;
        x_hat.set_column(j, &fit.fitted(&col));
        x.set_column(j, &col);
        first_stage.push(fit);
    }
    for j in 0..kx {
        x_hat.set_column(ke + j, &exog.column(j));
        x.set_column(ke + j, &exog.column(j));
    }
    let mut second = ols(y, &x_hat)?;
    let residuals = y - &x * &second.coefficients;
    second.covariance = newey_west(&x_hat, &residuals, bandwidth)?;
    second.residuals = residuals;

    let effective_f = if ke == 1 {
        match effective_f(endogenous, instruments, exog, bandwidth) {
            Ok(f) => Some(f),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(IvResult {
        second_stage: second,
        first_stage,
        effective_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    fn col(v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v.as_slice())
    }

    #[test]
    fn critical_value_single_instrument() {
        assert!((mop_critical_value(1.0).unwrap() - 23.1085).abs() < 1e-3);
        assert!(mop_critical_value(2.5).is_err());
        let mid = mop_critical_value(1.025).unwrap();
        assert!(mid < MOP_TAU10_TABLE[0] && mid > MOP_TAU10_TABLE[1]);
    }

    #[test]
    fn exact_instrument_reproduces_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200;
        let x = normal(&mut rng, n);
        let w = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.1).sin() });
        let y = &x * 0.7 + &w.column(1) * 0.3 + normal(&mut rng, n);
        let iv = tsls(&y, &col(&x), &col(&x), &w, 2).unwrap();
        let full = DMatrix::from_fn(n, 3, |i, j| if j == 0 { x[i] } else { w[(i, j - 1)] });
        let o = ols(&y, &full).unwrap();
        assert!((iv.second_stage.coefficients - o.coefficients).amax() < 1e-10);
    }

    #[test]
    fn wald_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 300;
        let z = normal(&mut rng, n);
        let u = normal(&mut rng, n);
        let x = &z * 0.8 + &u * 0.5 + normal(&mut rng, n);
        let y = &x * 1.5 + &u;
        let iv = tsls(&y, &col(&x), &col(&z), &DMatrix::zeros(n, 0), 0).unwrap();
        let wald = z.dot(&y) / z.dot(&x);
        assert!((iv.second_stage.coefficients[0] - wald).abs() < 1e-10);
    }

    #[test]
    fn under_identified() {
        let n = 50;
        let e = DMatrix::from_element(n, 2, 1.0);
        let z = DMatrix::from_element(n, 1, 1.0);
        assert!(tsls(&DVector::zeros(n), &e, &z, &DMatrix::zeros(n, 0), 0).is_err());
    }

    #[test]
    fn irrelevant_instrument_flagged_weak() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 500;
        let x = normal(&mut rng, n);
        let z = normal(&mut rng, n);
        let y = &x * 2.0 + normal(&mut rng, n);
        let ones = DMatrix::from_element(n, 1, 1.0);
        let iv = tsls(&y, &col(&x), &col(&z), &ones, 3).unwrap();
        assert!(iv.effective_f.unwrap().is_weak());
    }

    #[test]
    fn zero_first_stage_gives_small_statistic() {
        let zz = DMatrix::from_element(1, 1, 100.0);
        let v = DMatrix::from_element(1, 1, 0.01);
        let f = effective_f_from_parts(&DVector::from_element(1, 0.0), &zz, &v).unwrap();
        assert!(f.statistic.abs() < 1e-15);
        assert!(f.margin() < 0.0);
    }

    #[test]
    fn more_than_one_endogenous_is_unsupported() {
        let n = 20;
        let e = DMatrix::from_element(n, 2, 1.0);
        let z = DMatrix::from_element(n, 2, 1.0);
        assert!(matches!(
            effective_f(&e, &z, &DMatrix::zeros(n, 0), 0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn homoskedastic_effective_f_matches_conventional() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let n = 5000;
        let (mut eff, mut conv) = (0.0, 0.0);
        for _ in 0..40 {
            let z = normal(&mut rng, n);
            let x = &z * 0.1 + normal(&mut rng, n);
            let ones = DMatrix::from_element(n, 1, 1.0);
            let f = effective_f(&col(&x), &col(&z), &ones, 0).unwrap();
            // textbook first-stage F for one instrument: squared t statistic
            let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { z[i] });
            let fit = ols(&x, &design).unwrap();
            let t = fit.coefficients[1] / fit.covariance[(1, 1)].sqrt();
            eff += f.statistic;
            conv += t * t;
            assert!((f.k_eff - 1.0).abs() < 1e-12);
        }
        assert!((eff / conv - 1.0).abs() < 0.02, "ratio {}", eff / conv);
    }

    proptest! {
        #[test]
        fn just_identified_equals_ratio_of_slopes(seed in 0u64..5_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 80;
            let z = normal(&mut rng, n);
            let x = &z * 0.9 + normal(&mut rng, n);
            let y = &x * -0.4 + normal(&mut rng, n);
            let w = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64).cos() });
            let iv = tsls(&y, &col(&x), &col(&z), &w, 1).unwrap();
            let design = DMatrix::from_fn(n, 3, |i, j| if j == 0 { z[i] } else { w[(i, j - 1)] });
            let reduced = ols(&y, &design).unwrap().coefficients[0];
            let first = ols(&x, &design).unwrap().coefficients[0];
            prop_assert!((iv.second_stage.coefficients[0] - reduced / first).abs() < 1e-10 * (1.0 + (reduced / first).abs()));
        }
    }
}
