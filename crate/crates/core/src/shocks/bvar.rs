use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use super::var::VarData;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Attempts per draw before a non positive definite covariance is fatal.
const MAX_REDRAWS: usize = 100;

/// Stream tags separating the random sequences of posterior and rotation
/// draws.
pub(crate) const STREAM_POSTERIOR: u64 = 0;
pub(crate) const STREAM_ROTATION: u64 = 1;

/// Independent generator for draw `index` of sequence `tag`; identical for
/// any thread schedule.
pub(crate) fn draw_rng(seed: u64, tag: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) | index as u64);
    rng
}

/// One posterior draw of the reduced form.
#[derive(Debug, Clone)]
pub struct VarDraw {
    /// Stacked coefficients `(1 + n p) x n`.
    pub b: DMatrix<f64>,
    /// Innovation covariance.
    pub sigma: DMatrix<f64>,
}

/// Posterior draws of a reduced-form VAR under the diffuse normal-inverse
/// Wishart prior `p(B, Sigma) ~ |Sigma|^{-(n+1)/2}`.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub data: VarData,
    pub b_ols: DMatrix<f64>,
    pub draws: Vec<VarDraw>,
    /// Covariance draws rejected as not positive definite and redrawn.
    pub redraws: usize,
    pub seed: u64,
}

/// Inverse Wishart draw `IW(scale, dof)` through the Bartlett decomposition
/// of `W ~ Wishart(scale^-1, dof)`.
fn inverse_wishart(scale_inv_chol: &DMatrix<f64>, dof: f64, rng: &mut ChaCha8Rng) -> Option<DMatrix<f64>> {
    let n = scale_inv_chol.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(dof - i as f64).ok()?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = scale_inv_chol * a;
    let w = &la * la.transpose();
    let sigma = w.cholesky()?.inverse();
    Some((&sigma + sigma.transpose()) * 0.5)
}

/// Draws `n_draws` reduced-form parameter sets.
///
/// `Sigma | Y ~ IW(S, T - k)` with `S` the OLS residual cross product and
/// `vec(B) | Sigma, Y ~ N(vec(B_ols), Sigma (x) (X'X)^-1)`. Draw `i` uses
/// its own generator stream, so results depend only on `seed`.
pub fn estimate_bvar(ds: &Dataset, variables: &[String], lags: usize, n_draws: usize, seed: u64) -> Result<VarModel> {
    let data = VarData::new(ds, variables, lags)?;
    let (t, k, n) = (data.nobs(), data.x.ncols(), data.nvars());
    let b_ols = data.ols()?;
    let u = data.residuals(&b_ols);
    let s = u.transpose() * &u;
    let dof = (t - k) as f64;
    if dof <= (n - 1) as f64 {
        return Err(Error::InsufficientSample {
            rows: t,
            columns: k,
            required: k + n,
        });
    }
    let s_inv_chol = s
        .cholesky()
        .ok_or_else(|| Error::Singular("VAR residual covariance is not positive definite".into()))?
        .inverse()
        .cholesky()
        .ok_or_else(|| Error::Singular("VAR residual covariance is not positive definite".into()))?
        .l();
    let xtx_inv_chol = (data.x.transpose() * &data.x)
        .cholesky()
        .ok_or_else(|| Error::Singular("VAR regressors are collinear".into()))?
        .inverse()
        .cholesky()
        .ok_or_else(|| Error::Singular("VAR regressors are collinear".into()))?
        .l();

    let results: Vec<(VarDraw, usize)> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, STREAM_POSTERIOR, i);
            for attempt in 0..MAX_REDRAWS {
                let Some(sigma) = inverse_wishart(&s_inv_chol, dof, &mut rng) else {
                    continue;
                };
                let Some(chol) = sigma.clone().cholesky() else {
                    continue;
                };
                let z = DMatrix::from_fn(k, n, |_, _| StandardNormal.sample(&mut rng));
                let b = &b_ols + &xtx_inv_chol * z * chol.l().transpose();
                return Ok((VarDraw { b, sigma }, attempt));
            }
            Err(Error::Singular(format!(
                "posterior draw {i}: no positive definite covariance in {MAX_REDRAWS} attempts"
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    let redraws = results.iter().map(|r| r.1).sum();
    if redraws > 0 {
        log::warn!("{redraws} covariance draws were not positive definite and were redrawn");
    }
    Ok(VarModel {
        data,
        b_ols,
        draws: results.into_iter().map(|r| r.0).collect(),
        redraws,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quarter;

    fn simulate(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a, mut b) = (0.0, 0.0);
        let mut xa = Vec::with_capacity(n);
        let mut xb = Vec::with_capacity(n);
        for _ in 0..n {
            let (e1, e2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let na = 0.5 * a + 0.2 * b + e1;
            let nb = -0.1 * a + 0.4 * b + 0.5 * e1 + e2;
            a = na;
            b = nb;
            xa.push(a);
            xb.push(b);
        }
        let q0: Quarter = "1900Q1".parse().unwrap();
        Dataset::from_columns(q0, [("a", xa), ("b", xb)]).unwrap()
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn posterior_mean_near_truth() {
        let ds = simulate(2000, 1);
        let m = estimate_bvar(&ds, &names(), 1, 400, 7).unwrap();
        let mut mean = DMatrix::zeros(3, 2);
        for d in &m.draws {
            mean += &d.b;
        }
        mean /= m.draws.len() as f64;
        let truth = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, -0.1, 0.2, 0.4]);
        assert!((mean - truth).amax() < 0.05);
        assert_eq!(m.redraws, 0);
    }

    #[test]
    fn covariance_draws_are_positive_definite() {
        let ds = simulate(300, 2);
        let m = estimate_bvar(&ds, &names(), 2, 200, 3).unwrap();
        for d in &m.draws {
            assert!((&d.sigma - d.sigma.transpose()).amax() == 0.0);
            assert!(d.sigma.clone().cholesky().is_some());
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let ds = simulate(300, 3);
        let a = estimate_bvar(&ds, &names(), 2, 50, 11).unwrap();
        let b = estimate_bvar(&ds, &names(), 2, 50, 11).unwrap();
        let c = estimate_bvar(&ds, &names(), 2, 50, 12).unwrap();
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert_eq!(x.b, y.b);
            assert_eq!(x.sigma, y.sigma);
        }
        assert_ne!(a.draws[0].b, c.draws[0].b);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let d = single.install(|| estimate_bvar(&ds, &names(), 2, 50, 11).unwrap());
        assert_eq!(a.draws[49].sigma, d.draws[49].sigma);
    }

    #[test]
    fn inverse_wishart_mean() {
        // E[IW(S, v)] = S / (v - n - 1)
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = s.clone().cholesky().unwrap().inverse().cholesky().unwrap().l();
        let v = 30.0;
        let mut mean = DMatrix::zeros(2, 2);
        let reps = 20_000;
        for i in 0..reps {
            mean += inverse_wishart(&l, v, &mut draw_rng(5, 0, i)).unwrap();
        }
        mean /= reps as f64;
        let expect = s / (v - 3.0);
        assert!((mean - &expect).amax() < 0.02 * expect.amax(), "{expect}");
    }
}
