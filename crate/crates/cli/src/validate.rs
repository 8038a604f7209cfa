use std::fmt;

use serde::{Deserialize, Serialize};
use statelp::data::{Dataset, Series};
use statelp::lp::build_design;

use crate::config::{RunConfig, ShockConfig, ShockSource};
use crate::pipeline::{build_states, lp_spec, prepare_dataset, restrictions, SHOCK_COLUMN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Dry-run outcome: problems found plus the usable sample per horizon of
/// every response variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    pub sample_sizes: Vec<(String, Vec<usize>)>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    fn error(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warning(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

/// Schema and sample-coverage checks without estimating anything.
pub fn validate(cfg: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_settings(cfg, &mut report);
    let ds = match prepare_dataset(cfg) {
        Ok(ds) => ds,
        Err(e) => {
            report.error(e.to_string());
            return report;
        }
    };
    check_series(cfg, &ds, &mut report);
    if report.has_errors() {
        return report;
    }
    check_samples(cfg, &ds, &mut report);
    report
}

fn check_settings(cfg: &RunConfig, report: &mut ValidationReport) {
    let irf = &cfg.irf;
    if !(irf.ci_level > 0.0 && irf.ci_level < 1.0) {
        report.error(format!("irf.ci_level must lie in (0, 1), got {}", irf.ci_level));
    }
    if irf.control_lags == 0 {
        report.error("irf.control_lags must be at least 1");
    }
    if irf.slp.folds < 2 {
        report.error("irf.slp.folds must be at least 2");
    }
    if irf.slp.grid_points == 0 {
        report.error("irf.slp.grid_points must be positive");
    }
    let k = irf.horizon + 2;
    if irf.slp.order == 0 || irf.slp.order >= k {
        report.error(format!("irf.slp.order must lie in 1..{k}, got {}", irf.slp.order));
    }
    for state in [&cfg.state, &cfg.second_state].into_iter().flatten() {
        if !(state.gamma > 0.0) {
            report.error(format!("state gamma must be positive, got {}", state.gamma));
        }
        if !(state.hp_lambda > 0.0) {
            report.error(format!("state hp_lambda must be positive, got {}", state.hp_lambda));
        }
    }
    if cfg.identification.draws == 0 {
        report.error("identification.draws must be positive");
    }
    if let Err(e) = restrictions(cfg) {
        report.error(e.to_string());
    }
    let mut sources = vec![&cfg.shock];
    if let Some(m) = &cfg.multiplier {
        if m.instruments.len() > 2 {
            report.error(format!(
                "multiplier takes one or two instruments, got {}",
                m.instruments.len()
            ));
        }
        sources.extend(&m.instruments);
    }
    for s in sources {
        check_shock_source(s, report);
    }
}

fn check_shock_source(source: &ShockConfig, report: &mut ValidationReport) {
    if matches!(source.source, ShockSource::File | ShockSource::NewsFile) {
        match &source.file {
            None => report.error("shock source needs `file`"),
            Some(p) if !p.exists() => report.error(format!("shock file {} not found", p.display())),
            Some(_) => {}
        }
    }
}

fn check_series(cfg: &RunConfig, ds: &Dataset, report: &mut ValidationReport) {
    let mut required: Vec<(String, &str)> = Vec::new();
    required.extend(cfg.dependents().into_iter().map(|n| (n, "irf.dependent")));
    required.extend(cfg.controls().into_iter().map(|n| (n, "irf.controls")));
    let needs_var = std::iter::once(&cfg.shock)
        .chain(cfg.multiplier.iter().flat_map(|m| &m.instruments))
        .any(|s| matches!(s.source, ShockSource::Timing | ShockSource::NarrativeSign));
    if needs_var {
        required.extend(cfg.var_variables().into_iter().map(|n| (n, "identification.variables")));
        required.push((cfg.variables.spending.clone(), "variables.spending"));
    }
    for state in [&cfg.state, &cfg.second_state].into_iter().flatten() {
        if state.enabled {
            required.push((cfg.state_source(state), "state.source"));
        }
    }
    if let Some(m) = &cfg.multiplier {
        required.push((m.output.clone().unwrap_or_else(|| cfg.variables.output.clone()), "multiplier.output"));
        required.push((
            m.spending.clone().unwrap_or_else(|| cfg.variables.spending.clone()),
            "multiplier.spending",
        ));
    }
    let mut seen = Vec::new();
    for (name, field) in required {
        if !ds.contains(&name) && !seen.contains(&name) {
            report.error(format!("series `{name}` referenced by {field} is not in the dataset"));
            seen.push(name);
        }
    }
}

fn check_samples(cfg: &RunConfig, ds: &Dataset, report: &mut ValidationReport) {
    let states = match build_states(cfg, ds) {
        Ok(s) => s,
        Err(e) => {
            report.error(e.to_string());
            return;
        }
    };
    // a placeholder shock over the whole range bounds the usable rows from above
    let ds = ds
        .clone()
        .with_series(SHOCK_COLUMN, &Series::new(ds.start(), vec![0.0; ds.len()]));
    for dep in cfg.dependents() {
        let spec = lp_spec(cfg, &dep, &states);
        let mut sizes = Vec::with_capacity(spec.horizon_max + 1);
        for h in 0..=spec.horizon_max {
            match build_design(&ds, &spec, h) {
                Ok(d) => sizes.push(d.y.len()),
                Err(statelp::Error::InsufficientSample { rows, required, .. }) => {
                    report.warning(format!(
                        "`{dep}` at horizon {h}: {rows} usable quarters, at least {required} needed"
                    ));
                    sizes.push(rows);
                }
                Err(e) => {
                    report.error(format!("`{dep}` at horizon {h}: {e}"));
                    sizes.push(0);
                }
            }
        }
        report.sample_sizes.push((dep, sizes));
    }
    if matches!(cfg.shock.source, ShockSource::NarrativeSign) {
        if let Ok(rs) = restrictions(cfg) {
            for r in rs {
                if ds.index_of(r.date).is_none() {
                    report.error(format!("narrative restriction date {} is outside the data", r.date));
                }
            }
        }
    }
}
