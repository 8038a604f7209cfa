//! Spending-shock identification: recursive timing restriction, and sign
//! plus narrative sign restrictions on a Bayesian VAR.

mod bvar;
mod identify;
mod timing;
mod var;

pub use bvar::{estimate_bvar, VarDraw, VarModel};
pub use identify::{
    check_narrative, check_sign, historical_decomposition, narrative_shocks, random_rotation,
    structural_draw, ColumnRule, IdentificationConfig, NarrativeRestriction, NarrativeResult,
    ShockSign, StructuralDraw,
};
pub use timing::timing_shocks;
pub use var::{impulse_responses, lag_matrices, ma_matrices, VarData};
