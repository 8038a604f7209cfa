use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statelp::data::StateMode;
use statelp::shocks::ColumnRule;

use crate::error::CliError;

/// Full run configuration. Every field has a default, so an empty file plus
/// a data path reproduces the baseline pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub variables: Variables,
    pub state: Option<StateConfig>,
    /// Second regime for the horse-race model.
    pub second_state: Option<StateConfig>,
    pub shock: ShockConfig,
    pub identification: IdentificationSettings,
    pub irf: IrfConfig,
    pub multiplier: Option<MultiplierConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            variables: Variables::default(),
            state: Some(StateConfig::default()),
            second_state: None,
            shock: ShockConfig::default(),
            identification: IdentificationSettings::default(),
            irf: IrfConfig::default(),
            multiplier: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub quarter_column: String,
    pub delimiter: char,
    /// File column -> series name; empty keeps every column under its header.
    pub columns: BTreeMap<String, String>,
    /// Security-level debt file used to build the fiscal cost series.
    pub securities: Option<PathBuf>,
    /// Nominal GDP series dividing the aggregated interest cost.
    pub nominal_gdp: String,
    /// Name of the constructed fiscal cost series.
    pub fiscal_cost: String,
    /// Potential GDP series used to rescale `scale`.
    pub potential_gdp: String,
    /// Series rescaled by potential GDP before estimation.
    pub scale: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data.csv"),
            quarter_column: "quarter".into(),
            delimiter: ',',
            columns: BTreeMap::new(),
            securities: None,
            nominal_gdp: "nominal_gdp".into(),
            fiscal_cost: "fiscal_cost".into(),
            potential_gdp: "potential_gdp".into(),
            scale: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Variables {
    pub output: String,
    pub spending: String,
    pub tax: String,
    pub debt: String,
}

impl Default for Variables {
    fn default() -> Self {
        Self {
            output: "gdp".into(),
            spending: "g".into(),
            tax: "tax".into(),
            debt: "debt".into(),
        }
    }
}

impl Variables {
    pub fn all(&self) -> Vec<String> {
        vec![self.output.clone(), self.spending.clone(), self.tax.clone(), self.debt.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Linear,
    Hp,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    /// `false` estimates the linear model.
    pub enabled: bool,
    /// Source series; defaults to the fiscal cost.
    pub source: Option<String>,
    pub trend: Trend,
    pub hp_lambda: f64,
    pub mode: StateMode,
    pub gamma: f64,
    pub lag: usize,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            source: None,
            trend: Trend::Linear,
            hp_lambda: 1600.0,
            mode: StateMode::Logit,
            gamma: 10.0,
            lag: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockSource {
    Timing,
    NarrativeSign,
    File,
    NewsFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShockConfig {
    pub source: ShockSource,
    /// Two-column quarter/value CSV for `file` and `news_file` sources.
    pub file: Option<PathBuf>,
}

impl Default for ShockConfig {
    fn default() -> Self {
        Self {
            source: ShockSource::Timing,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestrictionConfig {
    pub date: String,
    pub positive: bool,
    pub dominance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationSettings {
    /// VAR variables; empty uses output, spending, tax and debt.
    pub variables: Vec<String>,
    pub lags: usize,
    pub draws: usize,
    pub sign_horizons: usize,
    pub rule: ColumnRule,
    pub restrictions: Vec<RestrictionConfig>,
}

impl Default for RestrictionConfig {
    fn default() -> Self {
        Self {
            date: String::new(),
            positive: true,
            dominance: true,
        }
    }
}

impl Default for IdentificationSettings {
    fn default() -> Self {
        let restriction = |date: &str| RestrictionConfig {
            date: date.into(),
            ..RestrictionConfig::default()
        };
        Self {
            variables: Vec::new(),
            lags: 4,
            draws: 50_000,
            sign_horizons: 4,
            rule: ColumnRule::First,
            restrictions: vec![restriction("1917Q2"), restriction("1941Q4")],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lp,
    Slp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlpConfig {
    pub order: usize,
    /// Fixed shrinkage; omitted selects it by cross-validation.
    pub mu: Option<f64>,
    pub grid_points: usize,
    pub folds: usize,
    pub contiguous: bool,
}

impl Default for SlpConfig {
    fn default() -> Self {
        Self {
            order: 3,
            mu: None,
            grid_points: 25,
            folds: 5,
            contiguous: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrfConfig {
    /// Response variables; empty uses output and spending.
    pub dependent: Vec<String>,
    /// Controls; empty uses output, spending, tax and debt.
    pub controls: Vec<String>,
    pub control_lags: usize,
    pub horizon: usize,
    pub ci_level: f64,
    pub bandwidth: Option<usize>,
    pub cumulative: bool,
    pub estimator: Estimator,
    pub slp: SlpConfig,
    /// Evaluation points for a continuous state.
    pub eval_points: Option<Vec<f64>>,
    pub report_horizons: Vec<usize>,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self {
            dependent: Vec::new(),
            controls: Vec::new(),
            control_lags: 4,
            horizon: 16,
            ci_level: 0.90,
            bandwidth: None,
            cumulative: false,
            estimator: Estimator::Lp,
            slp: SlpConfig::default(),
            eval_points: None,
            report_horizons: statelp::lp::DEFAULT_REPORT_HORIZONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierConfig {
    /// Defaults to the output variable.
    pub output: Option<String>,
    /// Defaults to the spending variable.
    pub spending: Option<String>,
    /// One or two instruments; empty uses the configured shock.
    pub instruments: Vec<ShockConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.path);
        if let Some(p) = self.data.securities.as_mut() {
            fix(p);
        }
        if let Some(p) = self.shock.file.as_mut() {
            fix(p);
        }
        if let Some(m) = self.multiplier.as_mut() {
            for inst in &mut m.instruments {
                if let Some(p) = inst.file.as_mut() {
                    fix(p);
                }
            }
        }
    }

    pub fn dependents(&self) -> Vec<String> {
        if self.irf.dependent.is_empty() {
            vec![self.variables.output.clone(), self.variables.spending.clone()]
        } else {
            self.irf.dependent.clone()
        }
    }

    pub fn controls(&self) -> Vec<String> {
        if self.irf.controls.is_empty() {
            self.variables.all()
        } else {
            self.irf.controls.clone()
        }
    }

    pub fn var_variables(&self) -> Vec<String> {
        if self.identification.variables.is_empty() {
            self.variables.all()
        } else {
            self.identification.variables.clone()
        }
    }

    pub fn state_source(&self, state: &StateConfig) -> String {
        state.source.clone().unwrap_or_else(|| self.data.fiscal_cost.clone())
    }

    /// Canonical JSON of the effective configuration; the manifest hashes it.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
