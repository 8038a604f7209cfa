//! Estimation primitives shared by the projection engines.

mod folds;
mod hac;
mod iv;
mod ols;

pub use folds::kfold_splits;
pub use hac::{hac_meat, newey_west, newey_west_with_bread};
pub use iv::{
    effective_f, effective_f_from_parts, mop_critical_value, tsls, EffectiveF, IvResult,
    MOP_BIAS_THRESHOLD,
};
pub use ols::{ols, ols_labeled, xtx_inverse, RegressionResult};
