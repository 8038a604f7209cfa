use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use statelp::data::Series;
use statelp::lp::{FirstStageDiagnostic, IrfResult};
use statelp::slp::CvResult;

use crate::error::CliError;

/// Single writer for everything a run emits; remembers the file names for
/// the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Output { path, source })?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("results serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_series(&mut self, name: &str, column: &str, series: &Series) -> Result<(), CliError> {
        let mut buf = Vec::new();
        series.write_csv(column, &mut buf).map_err(|e| CliError::Output {
            path: self.root.join(name),
            source: io::Error::other(e.to_string()),
        })?;
        self.write(name, &buf)
    }
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        String::new()
    }
}

/// `horizon,state,estimate,ci_low,ci_high`, one row per state and horizon.
pub fn figure_csv(result: &IrfResult) -> String {
    let mut out = String::from("horizon,state,estimate,ci_low,ci_high\n");
    for state in &result.states {
        for p in &state.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.horizon,
                state.label,
                cell(p.estimate),
                cell(p.ci_low),
                cell(p.ci_high)
            );
        }
    }
    out
}

/// Writes the figure data of `result` to `path`.
pub fn emit_figure_data(result: &IrfResult, path: &Path) -> io::Result<()> {
    fs::write(path, figure_csv(result))
}

/// `mu,loss` pairs of the cross-validation curve.
pub fn cv_csv(cv: &CvResult) -> String {
    let mut out = String::from("mu,loss\n");
    for p in &cv.curve {
        let _ = writeln!(out, "{},{}", cell(p.mu), cell(p.loss));
    }
    out
}

pub fn first_stage_csv(diagnostics: &[FirstStageDiagnostic]) -> String {
    let mut out = String::from("state,horizon,effective_f,critical,k_eff,weak\n");
    for d in diagnostics {
        match &d.effective_f {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    d.state,
                    d.horizon,
                    cell(f.statistic),
                    cell(f.critical),
                    cell(f.k_eff),
                    f.is_weak()
                );
            }
            None => {
                let _ = writeln!(out, "{},{},,,,", d.state, d.horizon);
            }
        }
    }
    out
}
