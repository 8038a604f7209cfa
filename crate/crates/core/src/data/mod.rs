//! Ingestion of quarterly series and construction of state variables.

mod dataset;
mod quarter;
mod state;
mod transform;

pub use dataset::{load_dataset, load_dataset_from_reader, Dataset, Schema, Series};
pub use quarter::Quarter;
pub use state::{build_state, logit_weight, standardize_shock, ShockSeries, StateMode, StateSeries};
pub use transform::{
    compute_fiscal_cost, gordon_krenn_scale, hp_filter, linear_detrend, load_securities,
    load_securities_from_reader, solve_symmetric_pentadiagonal, SecurityRecord,
};
