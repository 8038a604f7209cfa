//! Smooth local projections: cubic B-spline expansion of the horizon
//! coefficients, a difference penalty on the shock response and k-fold
//! selection of the shrinkage.

mod basis;
mod fit;
mod solve;
mod system;

pub use basis::{bspline_basis, difference_operator, difference_penalty, BasisSet, PenaltyMatrix};
pub use fit::{estimate_slp, fit_stacked, slp_irf, SlpFit, SlpSpec};
pub use solve::{cross_validate, mu_grid, penalized_ls, penalized_objective, CvPoint, CvResult};
pub use system::{stack_system, StackedSystem};
