use serde::{Deserialize, Serialize};

use super::result::IrfResult;

/// Horizons shown in summary tables.
pub const DEFAULT_REPORT_HORIZONS: [usize; 5] = [0, 4, 8, 12, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub horizon: usize,
    /// Response in the reference state (the small-cost state `B` for
    /// two-state runs).
    pub small_state_estimate: f64,
    pub difference: f64,
    pub pvalue: f64,
    pub stars: String,
}

/// Rows of a difference table for the first difference test of `result`.
///
/// The reference state is `B` when present, otherwise the first state.
/// Horizons missing from the result are skipped.
pub fn difference_table(result: &IrfResult, horizons: &[usize]) -> Vec<TableRow> {
    let Some(diff) = result.differences.first() else {
        return Vec::new();
    };
    let Some(reference) = result.state("B").or_else(|| result.states.first()) else {
        return Vec::new();
    };
    horizons
        .iter()
        .filter_map(|&h| {
            let d = diff.at(h)?;
            let s = reference.at(h)?;
            Some(TableRow {
                horizon: h,
                small_state_estimate: s.estimate,
                difference: d.estimate,
                pvalue: d.pvalue,
                stars: d.stars.clone(),
            })
        })
        .collect()
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = format!("{:>7} {:>12} {:>12} {:>8}\n", "horizon", "estimate", "difference", "p-value");
    for r in rows {
        let diff = format!("{:.4}{}", r.difference, r.stars);
        out.push_str(&format!(
            "{:>7} {:>12.4} {:>12} {:>8.3}\n",
            r.horizon, r.small_state_estimate, diff, r.pvalue
        ));
    }
    out
}
