use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::kfold_splits;

/// Pivots below this fraction of the largest are treated as singular.
const PIVOT_TOL: f64 = 1e-14;
/// Relative singular value cutoff of minimum-norm solves.
const PINV_TOL: f64 = 1e-10;
/// Losses within this fraction of `||Z||^2` of the minimum count as ties.
const TIE_TOL: f64 = 1e-12;

/// Orthogonal change of coordinates that diagonalizes the penalty. Only the
/// coordinates touched by `P` are rotated.
#[derive(Debug, Clone)]
pub(crate) struct PenaltyFrame {
    active: Vec<usize>,
    v: DMatrix<f64>,
}

impl PenaltyFrame {
    pub fn new(p: &DMatrix<f64>) -> Self {
        let active: Vec<usize> = (0..p.nrows()).filter(|&i| p.row(i).iter().any(|v| *v != 0.0)).collect();
        let sub = p.select_rows(&active).select_columns(&active);
        let v = if active.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            sub.symmetric_eigen().eigenvectors
        };
        Self { active, v }
    }

    /// `Q' m` when `forward`, `Q m` otherwise.
    fn rotate_rows(&self, m: &DMatrix<f64>, forward: bool) -> DMatrix<f64> {
        let mut out = m.clone();
        if self.active.is_empty() {
            return out;
        }
        let sub = m.select_rows(&self.active);
        let rot = if forward { self.v.tr_mul(&sub) } else { &self.v * sub };
        for (j, &i) in self.active.iter().enumerate() {
            out.set_row(i, &rot.row(j));
        }
        out
    }

    /// `Q' a Q`.
    fn to_frame(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let half = self.rotate_rows(a, true).transpose();
        self.rotate_rows(&half, true).transpose()
    }
}

/// Factorization of a normal-equation matrix.
pub(crate) enum Factor {
    /// Cholesky factor of `S Q' A Q S`, with `S` the inverse square roots of
    /// the diagonal of `Q' A Q`.
    Cholesky {
        chol: Cholesky<f64, Dyn>,
        scale: DVector<f64>,
        frame: PenaltyFrame,
    },
    /// Explicit pseudo-inverse.
    Pinv(DMatrix<f64>),
}

impl Factor {
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Cholesky { chol, scale, frame } => {
                let mut y = frame.rotate_rows(b, true);
                for (mut row, s) in y.row_iter_mut().zip(scale.iter()) {
                    row *= *s;
                }
                let mut x = chol.solve(&y);
                for (mut row, s) in x.row_iter_mut().zip(scale.iter()) {
                    row *= *s;
                }
                frame.rotate_rows(&x, false)
            }
            Factor::Pinv(p) => p * b,
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve(&m).column(0).into_owned()
    }
}

/// Cholesky factor of `a + c N N'`, where the columns of `null` span
/// directions annihilated by both the data and the penalty. Solving with it
/// gives the minimum-norm solution of `a theta = b` for `b` orthogonal to
/// those directions. `None` when the augmented matrix is still singular.
///
/// The factorization runs in the eigenbasis of the penalty with unit
/// diagonal scaling, so heavy shrinkage does not degrade the conditioning.
pub(crate) fn factor_augmented(a: &DMatrix<f64>, null: &DMatrix<f64>, frame: &PenaltyFrame) -> Option<Factor> {
    let dim = a.nrows();
    let mut m = a.clone();
    if null.ncols() > 0 {
        // scale to the diagonal where the null directions live, not the
        // penalized coordinates
        let support: Vec<usize> = (0..dim).filter(|&i| null.row(i).iter().any(|v| *v != 0.0)).collect();
        let c = (support.iter().map(|&i| a[(i, i)]).sum::<f64>() / support.len().max(1) as f64).max(f64::MIN_POSITIVE);
        m += null * null.transpose() * c;
    }
    let mut m = frame.to_frame(&m);
    let d = m.diagonal();
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let scale = d.map(|v| 1.0 / v.sqrt());
    for j in 0..dim {
        for i in 0..dim {
            m[(i, j)] *= scale[i] * scale[j];
        }
    }
    let chol = m.cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    if !(lo * lo > PIVOT_TOL * hi * hi) {
        return None;
    }
    Some(Factor::Cholesky {
        chol,
        scale,
        frame: frame.clone(),
    })
}

/// Eigen-based pseudo-inverse of a symmetric PSD matrix.
pub(crate) fn factor_min_norm(a: &DMatrix<f64>) -> Factor {
    let eig = a.clone().symmetric_eigen();
    let cutoff = PINV_TOL * eig.eigenvalues.amax();
    let mut pinv = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / l;
        }
    }
    Factor::Pinv(pinv)
}

pub(crate) fn solve_augmented(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    null: &DMatrix<f64>,
    frame: &PenaltyFrame,
) -> Option<DVector<f64>> {
    factor_augmented(a, null, frame).map(|f| f.solve_vec(b))
}

/// Minimum-norm solution of `a theta = b` for symmetric PSD `a`.
pub(crate) fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = a.clone().symmetric_eigen();
    let cutoff = PINV_TOL * eig.eigenvalues.amax();
    let mut out = DVector::zeros(b.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            let v = eig.eigenvectors.column(i);
            out += v * (v.dot(b) / l);
        }
    }
    out
}

/// Penalized least squares `argmin |Z - X theta|^2 + mu theta' P theta`.
///
/// At `mu = 0` a rank-deficient `X` yields the minimum-norm least-squares
/// solution. For `mu > 0` a singular `X'X + mu P` is an error.
pub fn penalized_ls(z: &DVector<f64>, x: &DMatrix<f64>, p: &DMatrix<f64>, mu: f64) -> Result<DVector<f64>> {
    check_dims(z, x, p)?;
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("shrinkage must be finite and non-negative, got {mu}")));
    }
    let a = x.transpose() * x + p * mu;
    let b = x.transpose() * z;
    let frame = PenaltyFrame::new(p);
    if let Some(theta) = solve_augmented(&a, &b, &DMatrix::zeros(a.nrows(), 0), &frame) {
        return Ok(theta);
    }
    if mu == 0.0 {
        let svd = x.clone().svd(true, true);
        let eps = PINV_TOL * svd.singular_values.max();
        return svd
            .solve(z, eps)
            .map_err(|e| Error::Singular(e.to_string()));
    }
    Err(Error::Singular(format!("X'X + mu P is singular at mu = {mu}")))
}

/// `|Z - X theta|^2 + mu theta' P theta`.
pub fn penalized_objective(z: &DVector<f64>, x: &DMatrix<f64>, p: &DMatrix<f64>, mu: f64, theta: &DVector<f64>) -> f64 {
    (z - x * theta).norm_squared() + mu * (theta.transpose() * p * theta)[(0, 0)]
}

fn check_dims(z: &DVector<f64>, x: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != z.len() || p.shape() != (x.ncols(), x.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "inconsistent shapes: Z {}, X {}x{}, P {}x{}",
            z.len(),
            x.nrows(),
            x.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(())
}

/// Log-spaced shrinkage grid over `[1e-4, 1e6]` scaled by
/// `||X'X||_F / ||P||_F`.
pub fn mu_grid(xtx: &DMatrix<f64>, p: &DMatrix<f64>, points: usize) -> Vec<f64> {
    let pn = p.norm();
    let scale = if pn > 0.0 { xtx.norm() / pn } else { 1.0 };
    let (lo, hi) = (-4.0f64, 6.0f64);
    match points {
        0 => Vec::new(),
        1 => vec![scale],
        n => (0..n)
            .map(|i| scale * 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub mu: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mu_star: f64,
    pub curve: Vec<CvPoint>,
}

/// Training normal equations and held-out rows of one fold.
pub(crate) struct Fold {
    pub xtx: DMatrix<f64>,
    pub xtz: DVector<f64>,
    pub test_x: DMatrix<f64>,
    pub test_z: DVector<f64>,
}

pub(crate) fn cv_over_folds(
    folds: &[Fold],
    p: &DMatrix<f64>,
    null: &DMatrix<f64>,
    grid: &[f64],
    zz: f64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty shrinkage grid".into()));
    }
    if let Some(bad) = grid.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid shrinkage {bad}")));
    }
    let frame = PenaltyFrame::new(p);
    let pairs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|m| (0..folds.len()).map(move |f| (m, f)))
        .collect();
    let losses: Vec<f64> = pairs
        .par_iter()
        .map(|&(m, f)| {
            let fold = &folds[f];
            let a = &fold.xtx + p * grid[m];
            let theta = solve_augmented(&a, &fold.xtz, null, &frame).unwrap_or_else(|| {
                log::debug!("fold {f}: singular training system at mu = {}, using minimum norm", grid[m]);
                solve_min_norm(&a, &fold.xtz)
            });
            (&fold.test_z - &fold.test_x * theta).norm_squared()
        })
        .collect();
    let curve: Vec<CvPoint> = grid
        .iter()
        .enumerate()
        .map(|(m, &mu)| CvPoint {
            mu,
            loss: losses[m * folds.len()..(m + 1) * folds.len()].iter().sum(),
        })
        .collect();
    let best = curve.iter().map(|c| c.loss).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Singular("cross-validation loss is not finite".into()));
    }
    let mu_star = curve
        .iter()
        .filter(|c| c.loss <= best + TIE_TOL * zz)
        .map(|c| c.mu)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CvResult { mu_star, curve })
}

/// k-fold cross-validation of the shrinkage.
///
/// `groups[i]` is the fold unit of row `i` (e.g. its quarter); rows sharing
/// a unit are always held out together. Units are split into `k` contiguous
/// blocks, or shuffled with `seed` when `contiguous` is false. The selected
/// shrinkage is the largest grid value attaining the minimal loss.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    p: &DMatrix<f64>,
    mu_grid: &[f64],
    groups: &[usize],
    k: usize,
    contiguous: bool,
    seed: u64,
) -> Result<CvResult> {
    check_dims(z, x, p)?;
    if groups.len() != z.len() {
        return Err(Error::InvalidArgument("one fold unit per row is required".into()));
    }
    let units = groups.iter().max().map_or(0, |m| m + 1);
    let splits = kfold_splits(units, k, contiguous, seed)?;
    let mut fold_of = vec![0; units];
    for (f, members) in splits.iter().enumerate() {
        for &u in members {
            fold_of[u] = f;
        }
    }
    let xtx = x.transpose() * x;
    let xtz = x.transpose() * z;
    let folds: Vec<Fold> = (0..k)
        .map(|f| {
            let rows: Vec<usize> = (0..z.len()).filter(|&i| fold_of[groups[i]] == f).collect();
            let test_x = x.select_rows(&rows);
            let test_z = z.select_rows(&rows);
            Fold {
                xtx: &xtx - test_x.transpose() * &test_x,
                xtz: &xtz - test_x.transpose() * &test_z,
                test_x,
                test_z,
            }
        })
        .collect();
    cv_over_folds(&folds, p, &DMatrix::zeros(x.ncols(), 0), mu_grid, z.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn penalty(k: usize) -> DMatrix<f64> {
        let d = crate::slp::difference_operator(k, 2);
        d.transpose() * d
    }

    #[test]
    fn matches_dense_normal_equation_solve() {
        let x = random(40, 12, 1);
        let z = random(40, 1, 2).column(0).into_owned();
        let p = penalty(12);
        let theta = penalized_ls(&z, &x, &p, 3.7).unwrap();
        let a = x.transpose() * &x + &p * 3.7;
        let oracle = a.lu().solve(&(x.transpose() * &z)).unwrap();
        assert!((theta - oracle).amax() < 1e-10);
    }

    #[test]
    fn zero_penalty_is_ols() {
        let x = random(30, 5, 3);
        let z = random(30, 1, 4).column(0).into_owned();
        let theta = penalized_ls(&z, &x, &DMatrix::zeros(5, 5), 0.0).unwrap();
        let ols = crate::regression::ols(&z, &x).unwrap();
        assert!((theta - ols.coefficients).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_zero_penalty_is_minimum_norm() {
        let mut x = random(25, 4, 5);
        let c = x.column(0) + x.column(1);
        x = x.insert_column(4, 0.0);
        x.set_column(4, &c);
        let z = random(25, 1, 6).column(0).into_owned();
        let theta = penalized_ls(&z, &x, &DMatrix::zeros(5, 5), 0.0).unwrap();
        let pinv = x.clone().pseudo_inverse(1e-10).unwrap() * &z;
        assert!((&theta - pinv).amax() < 1e-9);
        // direction (1, 1, 0, 0, -1) is in the null space; min norm is orthogonal to it
        let n = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, -1.0]);
        assert!(theta.dot(&n).abs() < 1e-9);
        assert!(matches!(
            penalized_ls(&z, &x, &DMatrix::zeros(5, 5), 1.0),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn augmented_solve_matches_pseudo_inverse() {
        let x = random(20, 6, 7);
        let n = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]).normalize();
        let proj = DMatrix::identity(6, 6) - &n * n.transpose();
        let xs = &x * &proj;
        let a = xs.transpose() * &xs;
        let b = xs.transpose() * random(20, 1, 8).column(0);
        let frame = PenaltyFrame::new(&DMatrix::zeros(6, 6));
        let aug = solve_augmented(&a, &b, &DMatrix::from_column_slice(6, 1, n.as_slice()), &frame).unwrap();
        assert!((aug - solve_min_norm(&a, &b)).amax() < 1e-9);
        assert!(solve_augmented(&a, &b, &DMatrix::zeros(6, 0), &frame).is_none());
    }

    #[test]
    fn frame_rotation_round_trips() {
        let mut p = DMatrix::zeros(6, 6);
        let d = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 1.0, 0.0, 1.0, -1.0]);
        p.view_mut((2, 2), (3, 3)).copy_from(&(d.transpose() * &d));
        let frame = PenaltyFrame::new(&p);
        let m = random(6, 4, 3);
        let back = frame.rotate_rows(&frame.rotate_rows(&m, true), false);
        assert!((back - &m).amax() < 1e-12);
        let rotated = frame.to_frame(&p);
        let off = rotated.clone() - DMatrix::from_diagonal(&rotated.diagonal());
        assert!(off.amax() < 1e-12);
    }

    #[test]
    fn heavy_shrinkage_stays_solvable() {
        let x = random(80, 6, 11);
        let z = random(80, 1, 12).column(0).into_owned();
        let d = DMatrix::from_fn(4, 6, |i, j| match j as i64 - i as i64 {
            0 => -1.0,
            1 => 3.0,
            2 => -3.0,
            3 => 1.0,
            _ => 0.0,
        }) * -1.0;
        let p = d.transpose() * &d;
        let theta = penalized_ls(&z, &x, &p, 1e12).unwrap();
        assert!((&d * &theta).amax() < 1e-6 * theta.amax());
    }

    #[test]
    fn grid_shape() {
        let xtx = DMatrix::identity(4, 4) * 8.0;
        let p = DMatrix::identity(4, 4) * 2.0;
        let g = mu_grid(&xtx, &p, 25);
        assert_eq!(g.len(), 25);
        assert!((g[0] - 4e-4).abs() < 1e-16);
        assert!((g[24] - 4e6).abs() < 1e-6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_point_grid() {
        let x = random(30, 4, 9);
        let z = random(30, 1, 10).column(0).into_owned();
        let groups: Vec<usize> = (0..30).collect();
        let cv = cross_validate(&z, &x, &penalty(4), &[2.5], &groups, 5, true, 0).unwrap();
        assert_eq!(cv.mu_star, 2.5);
        assert_eq!(cv.curve.len(), 1);
        assert!(cv.curve[0].loss.is_finite());
    }

    #[test]
    fn costless_shrinkage_selects_top_of_grid() {
        // the truth lies in the penalty null space, so every mu fits exactly
        let x = random(60, 6, 11);
        let theta = DVector::from_fn(6, |i, _| 1.0 + 0.5 * i as f64);
        let z = &x * theta;
        let groups: Vec<usize> = (0..60).collect();
        let grid = [1e-3, 1.0, 1e3, 1e6];
        let cv = cross_validate(&z, &x, &penalty(6), &grid, &groups, 5, true, 0).unwrap();
        assert_eq!(cv.mu_star, 1e6);
    }

    #[test]
    fn folds_keep_groups_together() {
        let x = random(40, 3, 12);
        let z = random(40, 1, 13).column(0).into_owned();
        let groups: Vec<usize> = (0..40).map(|i| i % 10).collect();
        let a = cross_validate(&z, &x, &penalty(3), &[0.5], &groups, 5, true, 0).unwrap();
        let b = cross_validate(&z, &x, &penalty(3), &[0.5], &groups, 5, false, 3).unwrap();
        assert!(a.curve[0].loss.is_finite() && b.curve[0].loss.is_finite());
        assert!(cross_validate(&z, &x, &penalty(3), &[0.5], &groups, 11, true, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solution_beats_perturbations(seed in 0u64..1000, mu in 0.0f64..50.0) {
            let x = random(30, 8, seed);
            let z = random(30, 1, seed + 1).column(0).into_owned();
            let p = penalty(8);
            let theta = penalized_ls(&z, &x, &p, mu).unwrap();
            let best = penalized_objective(&z, &x, &p, mu, &theta);
            let deltas = random(100, 8, seed + 2);
            for i in 0..100 {
                let d = deltas.row(i).transpose() * 1e-3;
                prop_assert!(best <= penalized_objective(&z, &x, &p, mu, &(&theta + d)) + 1e-12);
            }
        }

        #[test]
        fn penalty_term_decreases_with_mu(seed in 0u64..1000) {
            let x = random(30, 8, seed);
            let z = random(30, 1, seed + 1).column(0).into_owned();
            let p = penalty(8);
            let grid = mu_grid(&(x.transpose() * &x), &p, 25);
            let terms: Vec<f64> = grid
                .iter()
                .map(|&mu| {
                    let t = penalized_ls(&z, &x, &p, mu).unwrap();
                    (t.transpose() * &p * &t)[(0, 0)]
                })
                .collect();
            for w in terms.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-8) + 1e-14);
            }
        }
    }
}
