//! Local projections: design construction and estimators for linear,
//! two-state, horse-race and continuous-interaction impulse responses, plus
//! LP-IV cumulative multipliers.

mod design;
pub(crate) mod estimate;
mod multiplier;
pub(crate) mod result;
mod spec;
mod table;

pub use design::{build_design, sample_sizes, Block, Design, Layout};
pub use estimate::{
    estimate_continuous, estimate_horse_race, estimate_lp, fit_horizons, HorizonFit,
};
pub use multiplier::{estimate_multiplier, FirstStageDiagnostic, MultiplierResult};
pub use result::{DiffPoint, DifferenceIrf, IrfPoint, IrfResult, StateIrf};
pub use spec::LpSpec;
pub use table::{difference_table, format_table, TableRow, DEFAULT_REPORT_HORIZONS};
