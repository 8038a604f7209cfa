use super::var::VarData;
use crate::data::{standardize_shock, Dataset, Series, ShockSeries};
use crate::error::{Error, Result};

/// Recursive identification with spending ordered first: spending does not
/// respond within the quarter to the other innovations, so its structural
/// shock is the spending innovation scaled by its standard deviation.
/// The result is standardized.
pub fn timing_shocks(ds: &Dataset, variables: &[String], spending: &str, lags: usize) -> Result<ShockSeries> {
    let mut ordered = vec![spending.to_string()];
    ordered.extend(variables.iter().filter(|v| v.as_str() != spending).cloned());
    if ordered.len() == variables.len() + 1 {
        return Err(Error::MissingSeries(spending.to_string()));
    }
    let data = VarData::new(ds, &ordered, lags)?;
    let b = data.ols()?;
    let u = data.residuals(&b);
    let dof = (data.nobs() - data.x.ncols()) as f64;
    let sigma = u.transpose() * &u / dof;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance is not positive definite".into()))?;
    let l = chol.l();
    let eps = l
        .solve_lower_triangular(&u.transpose())
        .ok_or_else(|| Error::Singular("innovation covariance is singular".into()))?;
    let shock: Vec<f64> = eps.row(0).iter().copied().collect();
    standardize_shock(&Series::new(data.quarters[0], shock))
}
