use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const CUBIC: usize = 3;

/// Cubic B-splines on equally spaced knots, evaluated at horizons `0..=H`.
///
/// The `H - 1` interior segments span `[0, H]`, which gives `K = H + 2`
/// functions forming a partition of unity on every evaluated horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub horizon_max: usize,
    pub degree: usize,
    /// Full knot vector, `K + degree + 1` equally spaced points.
    pub knots: Vec<f64>,
    /// `(H + 1) x K` matrix of `B_k(h)`.
    pub matrix: DMatrix<f64>,
}

impl BasisSet {
    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row `B(h, .)` as a vector.
    pub fn row(&self, h: usize) -> DVector<f64> {
        self.matrix.row(h).transpose()
    }

    /// All `K` basis functions at `x` in `[0, H]`.
    pub fn eval(&self, x: f64) -> DVector<f64> {
        eval_basis(&self.knots, self.degree, self.k(), x)
    }

    /// Unit vector spanning the null space of `matrix`: coefficient changes
    /// that leave every evaluated horizon unchanged.
    pub fn null_vector(&self) -> DVector<f64> {
        let k = self.k();
        // pad to square so the SVD exposes all K right singular vectors
        let mut m = DMatrix::zeros(k, k);
        m.rows_mut(0, self.matrix.nrows()).copy_from(&self.matrix);
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        let (i, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        v_t.row(i).transpose()
    }
}

fn eval_basis(knots: &[f64], p: usize, k: usize, x: f64) -> DVector<f64> {
    // span j with knots[j] <= x < knots[j+1], clamped to the domain
    let mut j = p;
    while j + 1 < k && x >= knots[j + 1] {
        j += 1;
    }
    // Cox-de Boor triangle for the p+1 nonzero functions
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for d in 1..=p {
        left[d] = x - knots[j + 1 - d];
        right[d] = knots[j + d] - x;
        let mut saved = 0.0;
        for r in 0..d {
            let tmp = n[r] / (right[r + 1] + left[d - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        n[d] = saved;
    }
    let mut out = DVector::zeros(k);
    for (r, v) in n.into_iter().enumerate() {
        out[j - p + r] = v;
    }
    out
}

/// Cubic B-spline basis for horizons `0..=H`, `K = H + 2`.
///
/// Needs `H >= 2`: with one segment fewer than `H` there is no cubic spline
/// space of dimension `H + 2` for `H = 1`.
pub fn bspline_basis(horizon_max: usize) -> Result<BasisSet> {
    if horizon_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "smooth projections need a maximum horizon of at least 2, got {horizon_max}"
        )));
    }
    let h = horizon_max as f64;
    let segments = horizon_max - 1;
    let k = segments + CUBIC;
    let dx = h / segments as f64;
    let knots: Vec<f64> = (0..k + CUBIC + 1)
        .map(|i| (i as f64 - CUBIC as f64) * dx)
        .collect();
    let mut matrix = DMatrix::zeros(horizon_max + 1, k);
    for row in 0..=horizon_max {
        matrix.set_row(row, &eval_basis(&knots, CUBIC, k, row as f64).transpose());
    }
    Ok(BasisSet {
        horizon_max,
        degree: CUBIC,
        knots,
        matrix,
    })
}

/// `r`-th order difference operator, shape `(K - r) x K`.
pub fn difference_operator(k: usize, r: usize) -> DMatrix<f64> {
    let mut d = DMatrix::identity(k, k);
    for _ in 0..r {
        let rows = d.nrows() - 1;
        d = DMatrix::from_fn(rows, k, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    d
}

/// Difference penalty `D_r' D_r` on a block of `K` spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub order: usize,
    pub d: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn k(&self) -> usize {
        self.p.nrows()
    }

    /// `b' P b`.
    pub fn quadratic(&self, b: &DVector<f64>) -> f64 {
        (&self.d * b).norm_squared()
    }

    /// Penalty over a `total`-dimensional parameter with copies of `P` on
    /// the blocks starting at `starts` and zeros elsewhere.
    pub fn embed(&self, total: usize, starts: &[usize]) -> DMatrix<f64> {
        let k = self.k();
        let mut full = DMatrix::zeros(total, total);
        for &s in starts {
            full.view_mut((s, s), (k, k)).copy_from(&self.p);
        }
        full
    }
}

pub fn difference_penalty(k: usize, r: usize) -> Result<PenaltyMatrix> {
    if r < 1 || r >= k {
        return Err(Error::InvalidArgument(format!(
            "difference order must satisfy 1 <= r < K = {k}, got {r}"
        )));
    }
    let d = difference_operator(k, r);
    let p = d.transpose() * &d;
    Ok(PenaltyMatrix { order: r, d, p })
}
