use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::basis::{BasisSet, PenaltyMatrix};
use crate::data::{Dataset, Quarter};
use crate::error::{Error, Result};
use crate::lp::{build_design, Block, Design, Layout, LpSpec};

/// All horizon regressions stacked, with every coefficient expanded in the
/// spline basis: column `c` of the horizon-`h` design contributes the `K`
/// columns `x_c B_k(h)`, so `theta` holds `K` coefficients per column.
///
/// The stacked matrix is kept implicit; [`StackedSystem::matrix`]
/// materializes it.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub basis: BasisSet,
    /// Horizon designs `0..=H`.
    pub designs: Vec<Design>,
    /// Column labels shared by every horizon design.
    pub labels: Vec<String>,
    pub blocks: Vec<Block>,
    pub layout: Layout,
}

impl StackedSystem {
    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn ncols(&self) -> usize {
        self.labels.len() * self.k()
    }

    pub fn nrows(&self) -> usize {
        self.designs.iter().map(|d| d.y.len()).sum()
    }

    /// First `theta` entry of design column `c`.
    pub fn theta_start(&self, column: usize) -> usize {
        column * self.k()
    }

    /// Starts of the penalized shock-coefficient blocks, one per state block.
    pub fn penalized_starts(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| self.theta_start(b.key_col)).collect()
    }

    pub fn penalty(&self, pen: &PenaltyMatrix) -> DMatrix<f64> {
        pen.embed(self.ncols(), &self.penalized_starts())
    }

    /// Directions of `theta` that leave every fitted value unchanged: the
    /// basis null vector placed in each column's block. Penalized blocks are
    /// included only when `with_penalized` is set.
    pub fn null_space(&self, with_penalized: bool) -> DMatrix<f64> {
        let k = self.k();
        let n = self.basis.null_vector();
        let keys: Vec<usize> = self.blocks.iter().map(|b| b.key_col).collect();
        let cols: Vec<usize> = (0..self.labels.len())
            .filter(|c| with_penalized || !keys.contains(c))
            .collect();
        let mut out = DMatrix::zeros(self.ncols(), cols.len());
        for (j, &c) in cols.iter().enumerate() {
            out.view_mut((c * k, j), (k, 1)).copy_from(&n);
        }
        out
    }

    /// `X'X` and `X'Z` over stacked rows whose quarter passes `keep`.
    pub fn normal_equations(&self, keep: impl Fn(Quarter) -> bool) -> (DMatrix<f64>, DVector<f64>) {
        let (k, p0) = (self.k(), self.labels.len());
        let mut xtx = DMatrix::zeros(self.ncols(), self.ncols());
        let mut xtz = DVector::zeros(self.ncols());
        for d in &self.designs {
            let rows: Vec<usize> = (0..d.y.len()).filter(|&i| keep(d.quarters[i])).collect();
            if rows.is_empty() {
                continue;
            }
            let x = d.x.select_rows(&rows);
            let y = d.y.select_rows(&rows);
            let g = x.transpose() * &x;
            let gz = x.transpose() * y;
            let b = self.basis.row(d.horizon);
            let bb = &b * b.transpose();
            for c in 0..p0 {
                xtz.rows_mut(c * k, k).axpy(gz[c], &b, 1.0);
                for e in 0..p0 {
                    let mut v = xtx.view_mut((c * k, e * k), (k, k));
                    v += &bb * g[(c, e)];
                }
            }
        }
        (xtx, xtz)
    }

    /// Stacked rows whose quarter passes `keep`.
    pub fn rows(&self, keep: impl Fn(Quarter) -> bool) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.k();
        let mut data = Vec::new();
        let mut z = Vec::new();
        for d in &self.designs {
            let b = self.basis.row(d.horizon);
            for i in (0..d.y.len()).filter(|&i| keep(d.quarters[i])) {
                for c in 0..self.labels.len() {
                    data.extend(b.iter().map(|bk| d.x[(i, c)] * bk));
                }
                z.push(d.y[i]);
            }
        }
        let n = z.len();
        debug_assert_eq!(data.len(), n * self.labels.len() * k);
        (DMatrix::from_row_slice(n, self.ncols(), &data), DVector::from_vec(z))
    }

    /// The full stacked system `(Z, X)`, horizon by horizon.
    pub fn matrix(&self) -> (DVector<f64>, DMatrix<f64>) {
        let (x, z) = self.rows(|_| true);
        (z, x)
    }

    /// Quarter `t` of every stacked row, in [`StackedSystem::matrix`] order.
    pub fn row_quarters(&self) -> Vec<Quarter> {
        self.designs.iter().flat_map(|d| d.quarters.iter().copied()).collect()
    }

    /// Coefficients of design column `c` at horizon `h`, `B(h, .) theta_c`.
    pub fn horizon_coefficients(&self, theta: &DVector<f64>, h: usize) -> DVector<f64> {
        let k = self.k();
        let b = self.basis.row(h);
        DVector::from_fn(self.labels.len(), |c, _| b.dot(&theta.rows(c * k, k)))
    }

    /// Earliest and latest quarter appearing in any row.
    pub fn quarter_span(&self) -> (Quarter, Quarter) {
        let qs = self.row_quarters();
        let lo = *qs.iter().min().expect("nonempty system");
        let hi = *qs.iter().max().expect("nonempty system");
        (lo, hi)
    }
}

/// Builds the horizon designs of `spec` and stacks them over `basis`.
pub fn stack_system(ds: &Dataset, spec: &LpSpec, basis: &BasisSet) -> Result<StackedSystem> {
    if basis.horizon_max != spec.horizon_max {
        return Err(Error::InvalidArgument(format!(
            "basis covers horizons 0..={} but the specification asks for 0..={}",
            basis.horizon_max, spec.horizon_max
        )));
    }
    let designs = (0..=spec.horizon_max)
        .into_par_iter()
        .map(|h| build_design(ds, spec, h).map_err(|e| e.at_horizon(h)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let first = &designs[0];
    if let Some(d) = designs.iter().find(|d| d.labels != first.labels) {
        return Err(Error::Unsupported(format!(
            "state blocks differ between horizon 0 and horizon {}; smoothing needs the same blocks at every horizon",
            d.horizon
        )));
    }
    Ok(StackedSystem {
        basis: basis.clone(),
        labels: first.labels.clone(),
        blocks: first.blocks.clone(),
        layout: first.layout,
        designs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slp::{bspline_basis, difference_penalty};

    fn toy(n: usize) -> Dataset {
        let q0: Quarter = "1960Q1".parse().unwrap();
        Dataset::from_columns(
            q0,
            [
                ("z", (0..n).map(|i| ((i * 13) % 7) as f64 + 0.1 * i as f64).collect::<Vec<_>>()),
                ("e", (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()),
                ("x", (0..n).map(|i| ((i * 3) % 11) as f64).collect()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dimension_bookkeeping() {
        let ds = toy(60);
        let spec = LpSpec::new("z", "e").with_controls(["x"]).with_lags(2).with_horizon(2);
        let basis = bspline_basis(2).unwrap();
        let sys = stack_system(&ds, &spec, &basis).unwrap();
        // constant, shock, 2 lags -> K (2 + p) columns
        assert_eq!(sys.ncols(), 4 * 4);
        let (z, x) = sys.matrix();
        assert_eq!(x.nrows(), 58 + 57 + 56);
        assert_eq!(z.len(), x.nrows());
        assert_eq!(sys.row_quarters().len(), x.nrows());
        assert_eq!(sys.penalized_starts(), vec![4]);
    }

    #[test]
    fn implicit_normal_equations_match_dense() {
        let ds = toy(50);
        let spec = LpSpec::new("z", "e").with_controls(["x", "z"]).with_lags(1).with_horizon(4);
        let sys = stack_system(&ds, &spec, &bspline_basis(4).unwrap()).unwrap();
        let (z, x) = sys.matrix();
        let (xtx, xtz) = sys.normal_equations(|_| true);
        assert!((xtx - x.transpose() * &x).amax() < 1e-9);
        assert!((xtz - x.transpose() * &z).amax() < 1e-9);
        let cut: Quarter = "1965Q1".parse().unwrap();
        let (xs, zs) = sys.rows(|q| q < cut);
        let (a, b) = sys.normal_equations(|q| q < cut);
        assert!((a - xs.transpose() * &xs).amax() < 1e-9);
        assert!((b - xs.transpose() * zs).amax() < 1e-9);
    }

    #[test]
    fn null_space_is_annihilated() {
        let ds = toy(50);
        let spec = LpSpec::new("z", "e").with_controls(["x"]).with_lags(1).with_horizon(5);
        let sys = stack_system(&ds, &spec, &bspline_basis(5).unwrap()).unwrap();
        let (_, x) = sys.matrix();
        let all = sys.null_space(true);
        assert_eq!(all.ncols(), 3);
        assert!((&x * &all).amax() < 1e-10);
        assert_eq!(sys.null_space(false).ncols(), 2);
        let pen = difference_penalty(sys.k(), 3).unwrap();
        let p = sys.penalty(&pen);
        assert!((&p * sys.null_space(false)).amax() < 1e-12);
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let ds = toy(50);
        let spec = LpSpec::new("z", "e").with_controls(["x"]).with_horizon(5);
        assert!(stack_system(&ds, &spec, &bspline_basis(4).unwrap()).is_err());
    }
}
