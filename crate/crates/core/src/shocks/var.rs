use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Quarter};
use crate::error::{Error, Result};

/// Extra observations required beyond `variables * lags`.
const MIN_EXTRA_OBS: usize = 12;

/// Regression form of a VAR(p) with intercept: `Y = X B + U`, rows `t`,
/// `X_t = [1, y_{t-1}', ..., y_{t-p}']`.
#[derive(Debug, Clone)]
pub struct VarData {
    pub variables: Vec<String>,
    pub lags: usize,
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Quarter of each row of `y`.
    pub quarters: Vec<Quarter>,
}

impl VarData {
    /// Builds the VAR over the span where every variable is observed.
    pub fn new(ds: &Dataset, variables: &[String], lags: usize) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidArgument("a VAR needs at least one variable".into()));
        }
        if lags < 1 {
            return Err(Error::InvalidArgument("a VAR needs at least one lag".into()));
        }
        let cols = variables
            .iter()
            .map(|v| ds.values(v))
            .collect::<Result<Vec<_>>>()?;
        let complete = |t: usize| cols.iter().all(|c| c[t].is_finite());
        let first = (0..ds.len()).find(|&t| complete(t));
        let last = (0..ds.len()).rev().find(|&t| complete(t));
        let (Some(first), Some(last)) = (first, last) else {
            return Err(Error::InsufficientSample {
                rows: 0,
                columns: variables.len() * lags + 1,
                required: variables.len() * lags + MIN_EXTRA_OBS + 1,
            });
        };
        if let Some(gap) = (first..=last).find(|&t| !complete(t)) {
            return Err(Error::Domain(format!(
                "VAR variables have a missing value inside the sample at {}",
                ds.quarter(gap)
            )));
        }
        let n = variables.len();
        let span = last + 1 - first;
        let required = n * lags + MIN_EXTRA_OBS + lags;
        if span <= required {
            return Err(Error::InsufficientSample {
                rows: span,
                columns: n * lags + 1,
                required: required + 1,
            });
        }
        let rows: Vec<usize> = (first + lags..=last).collect();
        let y = DMatrix::from_fn(rows.len(), n, |i, j| cols[j][rows[i]]);
        let x = DMatrix::from_fn(rows.len(), 1 + n * lags, |i, j| {
            if j == 0 {
                1.0
            } else {
                let (l, v) = ((j - 1) / n + 1, (j - 1) % n);
                cols[v][rows[i] - l]
            }
        });
        Ok(Self {
            variables: variables.to_vec(),
            lags,
            y,
            x,
            quarters: rows.iter().map(|&t| ds.quarter(t)).collect(),
        })
    }

    pub fn nvars(&self) -> usize {
        self.y.ncols()
    }

    pub fn nobs(&self) -> usize {
        self.y.nrows()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    /// Row of quarter `q`, if it is in the estimation sample.
    pub fn row_of(&self, q: Quarter) -> Option<usize> {
        let i = q.since(*self.quarters.first()?);
        (0..self.nobs() as i64).contains(&i).then_some(i as usize)
    }

    /// OLS coefficients `(X'X)^-1 X'Y`, `(1 + n p) x n`.
    pub fn ols(&self) -> Result<DMatrix<f64>> {
        let xtx = self.x.transpose() * &self.x;
        let chol = xtx
            .cholesky()
            .ok_or_else(|| Error::Singular("VAR regressors are collinear".into()))?;
        Ok(chol.solve(&(self.x.transpose() * &self.y)))
    }

    pub fn residuals(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        &self.y - &self.x * b
    }
}

/// Lag matrices `A_j` of `y_t = c + sum_j A_j y_{t-j} + u_t` from stacked
/// coefficients `B`.
pub fn lag_matrices(b: &DMatrix<f64>, nvars: usize, lags: usize) -> Vec<DMatrix<f64>> {
    (0..lags)
        .map(|j| b.view((1 + j * nvars, 0), (nvars, nvars)).transpose())
        .collect()
}

/// Reduced-form moving-average matrices `Psi_0 = I, ..., Psi_H`.
pub fn ma_matrices(b: &DMatrix<f64>, nvars: usize, lags: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let a = lag_matrices(b, nvars, lags);
    let mut psi: Vec<DMatrix<f64>> = vec![DMatrix::identity(nvars, nvars)];
    for h in 1..=horizon {
        let mut m = DMatrix::zeros(nvars, nvars);
        for j in 1..=h.min(lags) {
            m += &a[j - 1] * &psi[h - j];
        }
        psi.push(m);
    }
    psi
}

/// Response of every variable at horizons `0..=H` to the structural shock
/// with impact column `impact`, as an `(H + 1) x n` matrix.
pub fn impulse_responses(b: &DMatrix<f64>, nvars: usize, lags: usize, impact: &DVector<f64>, horizon: usize) -> DMatrix<f64> {
    let psi = ma_matrices(b, nvars, lags, horizon);
    let mut out = DMatrix::zeros(horizon + 1, nvars);
    for (h, m) in psi.iter().enumerate() {
        out.set_row(h, &(m * impact).transpose());
    }
    out
}
