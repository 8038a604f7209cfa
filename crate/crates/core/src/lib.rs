//! State-dependent impulse responses from quarterly macro data.
//!
//! The crate is organised in five layers:
//!
//! * [`data`]: quarter arithmetic, dataset ingestion, fiscal-cost construction,
//!   detrending (linear and Hodrick-Prescott) and regime weights.
//! * [`regression`]: OLS, Newey-West HAC covariance, 2SLS, effective F and
//!   cross-validation folds.
//! * [`lp`]: local projection designs and estimators (linear, two-state,
//!   horse race, continuous interaction, LP-IV multipliers).
//! * [`slp`]: smooth local projections (B-spline expansion, difference
//!   penalties, penalized least squares, k-fold selection of the shrinkage).
//! * [`shocks`]: Bayesian VAR posterior sampling and spending-shock
//!   identification by timing, sign and narrative sign restrictions.

pub mod data;
pub mod error;
pub mod lp;
pub mod regression;
pub mod shocks;
pub mod slp;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
