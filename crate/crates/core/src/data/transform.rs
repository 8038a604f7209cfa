//! Series transformations: fiscal cost of debt, potential-output scaling,
//! linear detrending and the Hodrick-Prescott filter.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Series;
use super::quarter::Quarter;
use crate::error::{Error, Result};

/// Holding of one federal security in one quarter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityRecord {
    pub security_id: String,
    pub quarter: Quarter,
    /// Amount outstanding, in the same currency units as GDP.
    pub outstanding: f64,
    /// Annual coupon as a fraction (0.05 = 5%).
    pub coupon_rate: f64,
}

#[derive(Deserialize)]
struct RawRecord {
    security_id: String,
    quarter: String,
    outstanding: f64,
    coupon_rate: f64,
}

/// Reads `security_id,quarter,outstanding,coupon_rate` records.
///
/// The period column accepts `YYYYQn` or monthly `YYYY-MM`; monthly snapshots
/// are down-sampled to the quarter-end month (March, June, September,
/// December) and other months are skipped.
pub fn load_securities(path: impl AsRef<Path>) -> Result<Vec<SecurityRecord>> {
    load_securities_from_reader(std::fs::File::open(path)?)
}

pub fn load_securities_from_reader<R: Read>(reader: R) -> Result<Vec<SecurityRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRecord>().enumerate() {
        let row = i + 2;
        let raw = rec.map_err(|e| Error::Ingestion {
            row,
            message: e.to_string(),
        })?;
        let (quarter, keep) = Quarter::parse_period(&raw.quarter).map_err(|_| Error::Ingestion {
            row,
            message: format!("malformed period `{}`", raw.quarter),
        })?;
        if !keep {
            continue;
        }
        if !(raw.outstanding >= 0.0) || !(raw.coupon_rate >= 0.0) {
            return Err(Error::Ingestion {
                row,
                message: "outstanding and coupon_rate must be non-negative".into(),
            });
        }
        out.push(SecurityRecord {
            security_id: raw.security_id,
            quarter,
            outstanding: raw.outstanding,
            coupon_rate: raw.coupon_rate,
        });
    }
    Ok(out)
}

/// Total interest charge over outstanding securities divided by GDP, per
/// quarter of the GDP series. Quarters without records yield 0.
pub fn compute_fiscal_cost(records: &[SecurityRecord], gdp: &Series) -> Result<Series> {
    let mut charge: BTreeMap<Quarter, f64> = BTreeMap::new();
    for r in records {
        if r.outstanding < 0.0 || r.coupon_rate < 0.0 {
            return Err(Error::Domain(format!(
                "security {} at {} has negative amount or rate",
                r.security_id, r.quarter
            )));
        }
        if r.quarter < gdp.start || r.quarter > gdp.end() {
            return Err(Error::Domain(format!(
                "security {} dated {} lies outside the GDP range {}..{}",
                r.security_id,
                r.quarter,
                gdp.start,
                gdp.end()
            )));
        }
        *charge.entry(r.quarter).or_insert(0.0) += r.outstanding * r.coupon_rate;
    }
    let values = gdp
        .quarters()
        .zip(&gdp.values)
        .map(|(q, &y)| {
            if y.is_nan() {
                return Ok(f64::NAN);
            }
            if y <= 0.0 {
                return Err(Error::Domain(format!("nonpositive GDP {y} at {q}")));
            }
            Ok(charge.get(&q).copied().unwrap_or(0.0) / y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Series::new(gdp.start, values))
}

/// Divides a series by potential GDP, element by element.
pub fn gordon_krenn_scale(series: &[f64], potential_gdp: &[f64]) -> Result<Vec<f64>> {
    if series.len() != potential_gdp.len() {
        return Err(Error::InvalidArgument(format!(
            "series length {} differs from potential GDP length {}",
            series.len(),
            potential_gdp.len()
        )));
    }
    series
        .iter()
        .zip(potential_gdp)
        .enumerate()
        .map(|(i, (&x, &p))| {
            if p.is_nan() || x.is_nan() {
                Ok(f64::NAN)
            } else if p <= 0.0 {
                Err(Error::Domain(format!("nonpositive potential GDP {p} at position {i}")))
            } else {
                Ok(x / p)
            }
        })
        .collect()
}

/// OLS fit of the series on a constant and a linear time index.
///
/// Returns `(trend, residual)`; missing entries stay missing in the residual
/// but the trend is extrapolated over them.
pub fn linear_detrend(series: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let obs: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(t, &v)| (t as f64, v))
        .collect();
    if obs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "linear detrending needs at least 3 observations, got {}",
            obs.len()
        )));
    }
    let n = obs.len() as f64;
    let t_mean = obs.iter().map(|o| o.0).sum::<f64>() / n;
    let y_mean = obs.iter().map(|o| o.1).sum::<f64>() / n;
    let sxx: f64 = obs.iter().map(|o| (o.0 - t_mean).powi(2)).sum();
    let sxy: f64 = obs.iter().map(|o| (o.0 - t_mean) * (o.1 - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let trend: Vec<f64> = (0..series.len())
        .map(|t| intercept + slope * t as f64)
        .collect();
    let residual = series.iter().zip(&trend).map(|(y, tr)| y - tr).collect();
    Ok((trend, residual))
}

/// Hodrick-Prescott filter. Returns `(trend, cycle)` with the trend solving
/// `(I + lambda D2'D2) trend = y`.
pub fn hp_filter(series: &[f64], lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "HP smoothing parameter must be positive, got {lambda}"
        )));
    }
    let n = series.len();
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "HP filter needs at least 5 observations, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "HP filter input must not contain missing values".into(),
        ));
    }
    let (mut d0, mut d1, mut d2) = (vec![1.0; n], vec![0.0; n - 1], vec![0.0; n - 2]);
    const STENCIL: [f64; 3] = [1.0, -2.0, 1.0];
    for r in 0..n - 2 {
        for a in 0..3 {
            d0[r + a] += lambda * STENCIL[a] * STENCIL[a];
            for b in a + 1..3 {
                let v = lambda * STENCIL[a] * STENCIL[b];
                if b - a == 1 {
                    d1[r + a] += v;
                } else {
                    d2[r + a] += v;
                }
            }
        }
    }
    let trend = solve_symmetric_pentadiagonal(&d0, &d1, &d2, series)?;
    let cycle = series.iter().zip(&trend).map(|(y, t)| y - t).collect();
    Ok((trend, cycle))
}

/// Solves `A x = rhs` for a symmetric positive definite pentadiagonal `A`
/// given its main diagonal `d0` and the first and second super-diagonals
/// `d1`, `d2`, via an LDL' factorization.
pub fn solve_symmetric_pentadiagonal(
    d0: &[f64],
    d1: &[f64],
    d2: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = d0.len();
    assert!(d1.len() + 1 >= n && d2.len() + 2 >= n && rhs.len() == n);
    let mut d = vec![0.0; n];
    // l1[i] = L[i][i-1], l2[i] = L[i][i-2]
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        let mut di = d0[i];
        if i >= 1 {
            di -= l1[i] * l1[i] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i] * l2[i] * d[i - 2];
        }
        if !(di > 0.0) {
            return Err(Error::Singular(format!(
                "pentadiagonal system is not positive definite at row {i}"
            )));
        }
        d[i] = di;
        if i + 2 < n {
            l2[i + 2] = d2[i] / di;
        }
        if i + 1 < n {
            let mut v = d1[i];
            if i >= 1 {
                v -= l2[i + 1] * l1[i] * d[i - 1];
            }
            l1[i + 1] = v / di;
        }
    }
    // forward: L z = rhs
    let mut x = rhs.to_vec();
    for i in 0..n {
        if i >= 1 {
            x[i] -= l1[i] * x[i - 1];
        }
        if i >= 2 {
            x[i] -= l2[i] * x[i - 2];
        }
    }
    for (xi, di) in x.iter_mut().zip(&d) {
        *xi /= di;
    }
    // backward: L' x = z
    for i in (0..n).rev() {
        if i + 1 < n {
            x[i] -= l1[i + 1] * x[i + 1];
        }
        if i + 2 < n {
            x[i] -= l2[i + 2] * x[i + 2];
        }
    }
    Ok(x)
}
