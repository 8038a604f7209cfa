use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of R used to flag rank deficiency.
pub(crate) const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Coefficient covariance. Classical `s^2 (X'X)^-1` from [`ols`]; callers
    /// that need robust inference replace it with a HAC estimate.
    pub covariance: DMatrix<f64>,
    /// `(X'X)^-1`, the bread of sandwich estimators.
    pub xtx_inv: DMatrix<f64>,
    pub nobs: usize,
    pub dof: usize,
}

impl RegressionResult {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.covariance.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn fitted(&self, y: &DVector<f64>) -> DVector<f64> {
        y - &self.residuals
    }
}

struct Factored {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn factor(x: &DMatrix<f64>, labels: Option<&[String]>) -> Result<Factored> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientSample {
            rows: n,
            columns: p,
            required: p + 1,
        });
    }
    let tol = RANK_TOL * x.norm();
    let (q, r) = x.clone().qr().unpack();
    let deficient: Vec<String> = (0..p)
        .filter(|&j| !(r[(j, j)].abs() > tol))
        .map(|j| match labels.and_then(|l| l.get(j)) {
            Some(name) => name.clone(),
            None => format!("#{j}"),
        })
        .collect();
    if !deficient.is_empty() {
        return Err(Error::SingularDesign { columns: deficient });
    }
    Ok(Factored { q, r })
}

fn r_inverse_gram(r: &DMatrix<f64>) -> DMatrix<f64> {
    let p = r.ncols();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("nonsingular triangular factor");
    let m = &r_inv * r_inv.transpose();
    (&m + m.transpose()) * 0.5
}

/// `(X'X)^-1` computed from a QR factorization of `X`.
pub fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = factor(x, None)?;
    Ok(r_inverse_gram(&f.r))
}

/// Ordinary least squares via Householder QR.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<RegressionResult> {
    ols_impl(y, x, None)
}

/// Like [`ols`] but names offending columns on rank deficiency.
pub fn ols_labeled(y: &DVector<f64>, x: &DMatrix<f64>, labels: &[String]) -> Result<RegressionResult> {
    ols_impl(y, x, Some(labels))
}

fn ols_impl(y: &DVector<f64>, x: &DMatrix<f64>, labels: Option<&[String]>) -> Result<RegressionResult> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "response has {} rows but design has {n}",
            y.len()
        )));
    }
    let f = factor(x, labels)?;
    let qty = f.q.transpose() * y;
    let coefficients = f
        .r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let residuals = y - x * &coefficients;
    let xtx_inv = r_inverse_gram(&f.r);
    let dof = n - p;
    let s2 = residuals.norm_squared() / dof as f64;
    Ok(RegressionResult {
        coefficients,
        residuals,
        covariance: &xtx_inv * s2,
        xtx_inv,
        nobs: n,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 20, 2);
        let y = &x * DVector::from_vec(vec![1.0, 2.0]);
        let fit = ols(&y, &x).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn orthogonal_response() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 0.0, 3.0, -1.0]);
        let fit = ols(&y, &x).unwrap();
        assert!(fit.coefficients.amax() < 1e-15);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(&mut rng, 50, 3);
        let y = DVector::from_fn(50, |_, _| StandardNormal.sample(&mut rng));
        let oracle = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let fit = ols(&y, &x).unwrap();
        assert!((fit.coefficients - oracle).amax() < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = random_matrix(&mut rng, 30, 3);
        let dup = x.column(0) * 2.0;
        x.set_column(2, &dup);
        let labels: Vec<String> = ["const", "shock", "copy"].iter().map(|s| s.to_string()).collect();
        let err = ols_labeled(&DVector::zeros(30), &x, &labels).unwrap_err();
        match err {
            Error::SingularDesign { columns } => assert_eq!(columns, vec!["copy".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(ols(&DVector::zeros(2), &x).is_err());
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_to_design(seed in 0u64..10_000, n in 8usize..60, p in 1usize..6) {
            prop_assume!(n > p + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_matrix(&mut rng, n, p);
            let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let fit = ols(&y, &x).unwrap();
            let g = x.transpose() * &fit.residuals;
            prop_assert!(g.amax() < 1e-10 * (1.0 + y.norm() * x.norm()));
        }
    }
}
