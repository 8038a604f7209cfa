//! Configuration-driven front end for the `statelp` estimators.
//!
//! A run reads one TOML file ([`RunConfig`]), then executes some prefix of
//! data preparation, state construction, shock identification, impulse
//! response estimation and multiplier estimation, writing every result into
//! the output directory together with a [`RunManifest`].

pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod pipeline;
pub mod validate;

use std::path::PathBuf;

pub use config::RunConfig;
pub use error::CliError;
pub use manifest::RunManifest;
pub use output::emit_figure_data;
pub use pipeline::Run;
pub use validate::{validate, Diagnostic, Severity, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    States,
    Identify,
    Irf,
    Multiplier,
    RunAll,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
    }
}

/// Runs `verb` with its prerequisite stages and writes the manifest.
pub fn execute(verb: Verb, config: RunConfig, threads: Option<usize>) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config, threads)?;
    let ds = run.load_data()?;
    match verb {
        Verb::States => {
            run.states(&ds)?;
        }
        Verb::Identify => {
            let source = run.config.shock.clone();
            run.shock(&ds, &source)?;
        }
        Verb::Irf => {
            let states = run.states(&ds)?;
            let source = run.config.shock.clone();
            let shock = run.shock(&ds, &source)?;
            run.irf(&ds, &states, &shock)?;
        }
        Verb::Multiplier => {
            let states = run.states(&ds)?;
            run.multiplier(&ds, &states)?;
        }
        Verb::RunAll => {
            let states = run.states(&ds)?;
            let source = run.config.shock.clone();
            let shock = run.shock(&ds, &source)?;
            run.irf(&ds, &states, &shock)?;
            if run.config.multiplier.is_some() {
                run.multiplier(&ds, &states)?;
            }
        }
    }
    run.finish()
}
