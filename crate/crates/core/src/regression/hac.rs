//! Newey-West heteroskedasticity and autocorrelation consistent covariance.
//!
//! ```text
//! V = (X'X)^-1 S (X'X)^-1
//! S = sum_t s_t s_t' + sum_{l=1}^{L} w_l sum_{t>l} (s_t s_{t-l}' + s_{t-l} s_t')
//! w_l = 1 - l / (L + 1)
//! ```
//! where `s_t = x_t e_t` is the score of observation `t` and `L` the
//! bandwidth. `L = 0` gives the White (HC0) estimator.

use nalgebra::{DMatrix, DVector};

use super::ols::xtx_inverse;
use crate::error::{Error, Result};

/// Bartlett-weighted long-run covariance of the rows of `scores`.
pub fn hac_meat(scores: &DMatrix<f64>, bandwidth: usize) -> Result<DMatrix<f64>> {
    let (n, p) = scores.shape();
    if bandwidth >= n {
        return Err(Error::InvalidArgument(format!(
            "HAC bandwidth {bandwidth} must be smaller than the number of observations {n}"
        )));
    }
    let mut meat = scores.transpose() * scores;
    for lag in 1..=bandwidth {
        let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        let lead = scores.rows(lag, n - lag);
        let lagged = scores.rows(0, n - lag);
        let gamma = lead.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * w;
    }
    debug_assert_eq!(meat.shape(), (p, p));
    Ok(meat)
}

/// Sandwich `bread * S * bread` with `S` built from scores `x_t e_t`.
pub fn newey_west_with_bread(
    bread: &DMatrix<f64>,
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    bandwidth: usize,
) -> Result<DMatrix<f64>> {
    if x.nrows() != residuals.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but {} residuals",
            x.nrows(),
            residuals.len()
        )));
    }
    let mut scores = x.clone();
    for (mut row, e) in scores.row_iter_mut().zip(residuals.iter()) {
        row *= *e;
    }
    let meat = hac_meat(&scores, bandwidth)?;
    let v = bread * meat * bread;
    Ok((&v + v.transpose()) * 0.5)
}

/// Newey-West covariance of OLS coefficients.
pub fn newey_west(x: &DMatrix<f64>, residuals: &DVector<f64>, bandwidth: usize) -> Result<DMatrix<f64>> {
    if bandwidth >= x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "HAC bandwidth {bandwidth} must be smaller than the number of observations {}",
            x.nrows()
        )));
    }
    let bread = xtx_inverse(x)?;
    newey_west_with_bread(&bread, x, residuals, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::ols;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn draw(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(rng) });
        let e = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        (x, e)
    }

    /// Term-by-term double sum over observation pairs.
    fn brute_force(x: &DMatrix<f64>, e: &DVector<f64>, bw: usize) -> DMatrix<f64> {
        let (n, p) = x.shape();
        let mut s = DMatrix::zeros(p, p);
        for t in 0..n {
            for u in 0..n {
                let lag = t.abs_diff(u);
                if lag > bw {
                    continue;
                }
                let w = 1.0 - lag as f64 / (bw as f64 + 1.0);
                for i in 0..p {
                    for j in 0..p {
                        s[(i, j)] += w * x[(t, i)] * e[t] * e[u] * x[(u, j)];
                    }
                }
            }
        }
        let bread = (x.transpose() * x).try_inverse().unwrap();
        &bread * s * &bread
    }

    #[test]
    fn zero_bandwidth_is_white() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, e) = draw(&mut rng, 40, 3);
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let mut s = DMatrix::zeros(3, 3);
        for t in 0..40 {
            let xt = x.row(t).transpose();
            s += &xt * xt.transpose() * e[t] * e[t];
        }
        let white = &bread * s * &bread;
        assert!((newey_west(&x, &e, 0).unwrap() - white).amax() < 1e-13);
    }

    #[test]
    fn matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (x, e) = draw(&mut rng, 30, 3);
        let got = newey_west(&x, &e, 4).unwrap();
        let want = brute_force(&x, &e, 4);
        assert!((got - want).amax() < 1e-12);
    }

    #[test]
    fn bandwidth_must_be_below_nobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, e) = draw(&mut rng, 10, 2);
        assert!(newey_west(&x, &e, 10).is_err());
        assert!(newey_west(&x, &e, 9).is_ok());
    }

    #[test]
    fn iid_close_to_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (x, e) = draw(&mut rng, 10_000, 2);
        let y = &x * DVector::from_vec(vec![0.5, -1.0]) + e;
        let fit = ols(&y, &x).unwrap();
        let nw = newey_west(&x, &fit.residuals, 5).unwrap();
        for i in 0..2 {
            let ratio = nw[(i, i)] / fit.covariance[(i, i)];
            assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn positive_semidefinite(seed in 0u64..100_000, bw in 0usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, e) = draw(&mut rng, 30, 4);
            let v = newey_west(&x, &e, bw).unwrap();
            prop_assert!((&v - v.transpose()).amax() < 1e-14);
            let min = v.symmetric_eigen().eigenvalues.min();
            prop_assert!(min > -1e-10);
        }
    }
}
