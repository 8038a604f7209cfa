use std::fs::File;
use std::time::Instant;

use statelp::data::{
    build_state, compute_fiscal_cost, gordon_krenn_scale, hp_filter, linear_detrend, load_dataset, load_securities,
    standardize_shock, Dataset, Quarter, Schema, Series, ShockSeries, StateSeries,
};
use statelp::lp::{
    difference_table, estimate_continuous, estimate_horse_race, estimate_lp, estimate_multiplier, format_table,
    IrfResult, Layout, LpSpec,
};
use statelp::shocks::{
    estimate_bvar, narrative_shocks, timing_shocks, IdentificationConfig, NarrativeRestriction, ShockSign,
};
use statelp::slp::{bspline_basis, estimate_slp, slp_irf, SlpSpec};

use crate::config::{Estimator, RunConfig, ShockConfig, ShockSource, StateConfig, Trend};
use crate::error::CliError;
use crate::manifest::{IdentificationCounts, RunManifest};
use crate::output::{cv_csv, figure_csv, first_stage_csv, OutputDir};

/// Name under which the identified shock enters the estimation dataset.
pub const SHOCK_COLUMN: &str = "identified_shock";

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default)]
pub struct States {
    pub first: Option<StateSeries>,
    pub second: Option<StateSeries>,
}

/// One pipeline invocation: shared state between stages plus the manifest
/// being filled in.
pub struct Run {
    pub config: RunConfig,
    pub manifest: RunManifest,
    out: OutputDir,
    shocks: Vec<(ShockConfig, ShockSeries)>,
}

impl Run {
    pub fn new(config: RunConfig, threads: Option<usize>) -> Result<Self> {
        let out = OutputDir::create(&config.output_dir)?;
        let manifest = RunManifest::new(&config, threads);
        Ok(Self {
            config,
            manifest,
            out,
            shocks: Vec::new(),
        })
    }

    fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        log::info!("stage {stage}");
        let start = Instant::now();
        let value = f(self)?;
        self.manifest.record_stage(stage, start.elapsed().as_secs_f64());
        Ok(value)
    }

    /// Loads the dataset, builds the fiscal cost series and rescales the
    /// configured series by potential GDP.
    pub fn load_data(&mut self) -> Result<Dataset> {
        self.timed("data", |run| prepare_dataset(&run.config))
    }

    pub fn states(&mut self, ds: &Dataset) -> Result<States> {
        self.timed("states", |run| {
            let states = build_states(&run.config, ds)?;
            if let Some(s) = &states.first {
                run.out.write_series("state.csv", "state", &s.as_series())?;
            }
            if let Some(s) = &states.second {
                run.out.write_series("second_state.csv", "state", &s.as_series())?;
            }
            Ok(states)
        })
    }

    /// Identifies (or reads) the shock of `source`, caching it for later
    /// stages of the same run.
    pub fn shock(&mut self, ds: &Dataset, source: &ShockConfig) -> Result<ShockSeries> {
        if let Some((_, s)) = self.shocks.iter().find(|(c, _)| c == source) {
            return Ok(s.clone());
        }
        let shock = self.timed("identify", |run| run.identify(ds, source))?;
        self.shocks.push((source.clone(), shock.clone()));
        Ok(shock)
    }

    fn identify(&mut self, ds: &Dataset, source: &ShockConfig) -> Result<ShockSeries> {
        let cfg = &self.config;
        let stage = CliError::stage;
        let (name, shock) = match source.source {
            ShockSource::Timing => {
                let s = timing_shocks(ds, &cfg.var_variables(), &cfg.variables.spending, cfg.identification.lags)
                    .map_err(stage("identify"))?;
                ("timing", s)
            }
            ShockSource::NarrativeSign => {
                let id = &cfg.identification;
                let model = estimate_bvar(ds, &cfg.var_variables(), id.lags, id.draws, cfg.seed)
                    .map_err(stage("identify"))?;
                let settings = IdentificationConfig {
                    spending: cfg.variables.spending.clone(),
                    sign_horizons: id.sign_horizons,
                    restrictions: restrictions(cfg)?,
                    rule: id.rule,
                    seed: cfg.seed,
                };
                let result = narrative_shocks(&model, &settings).map_err(stage("identify"))?;
                let counts = IdentificationCounts {
                    draws: result.draws,
                    accepted_sign: result.accepted_sign,
                    accepted_narrative: result.accepted_narrative,
                    ambiguous: result.ambiguous,
                    covariance_redraws: model.redraws,
                };
                self.out.write_json("identification.json", &counts)?;
                self.manifest.identification = Some(counts);
                ("narrative_sign", result.shock)
            }
            ShockSource::File | ShockSource::NewsFile => {
                let series = read_shock_file(source)?;
                if source.source == ShockSource::NewsFile {
                    ("news", standardize_shock(&series).map_err(stage("identify"))?)
                } else {
                    ("file", ShockSeries(series))
                }
            }
        };
        let file = format!("shock_{name}.csv");
        self.out.write_series(&file, "shock", &shock)?;
        Ok(shock)
    }

    /// Impulse responses of every configured dependent variable.
    pub fn irf(&mut self, ds: &Dataset, states: &States, shock: &ShockSeries) -> Result<Vec<(String, IrfResult)>> {
        self.timed("irf", |run| {
            let ds = ds.clone().with_series(SHOCK_COLUMN, shock);
            let mut results = Vec::new();
            for dep in run.config.dependents() {
                let spec = lp_spec(&run.config, &dep, states);
                let result = match run.config.irf.estimator {
                    Estimator::Lp => estimate_irf(&run.config, &ds, &spec)?,
                    Estimator::Slp => run.estimate_smooth(&ds, spec, &dep)?,
                };
                run.write_result(&format!("irf_{dep}"), &result)?;
                results.push((dep, result));
            }
            Ok(results)
        })
    }

    fn estimate_smooth(&mut self, ds: &Dataset, lp: LpSpec, dep: &str) -> Result<IrfResult> {
        let c = &self.config.irf.slp;
        let mut spec = SlpSpec::new(lp).with_order(c.order).with_folds(c.folds, c.contiguous, self.config.seed);
        spec.grid_points = c.grid_points;
        spec.mu = c.mu;
        let stage = CliError::stage("irf");
        let mut fit = estimate_slp(ds, &spec).map_err(stage)?;
        if let (Layout::Continuous, Some(points)) = (fit.layout, &self.config.irf.eval_points) {
            fit.eval_points = points.clone();
        }
        if let Some(cv) = &fit.cv {
            self.out.write(&format!("cv_{dep}.csv"), cv_csv(cv).as_bytes())?;
        }
        let basis = bspline_basis(spec.lp.horizon_max).map_err(CliError::stage("irf"))?;
        slp_irf(&fit, &basis).map_err(CliError::stage("irf"))
    }

    /// State-dependent cumulative multipliers by LP-IV.
    pub fn multiplier(&mut self, ds: &Dataset, states: &States) -> Result<()> {
        let Some(m) = self.config.multiplier.clone() else {
            return Err(CliError::Config("no [multiplier] section".into()));
        };
        let sources = if m.instruments.is_empty() {
            vec![self.config.shock.clone()]
        } else {
            m.instruments.clone()
        };
        if sources.len() > 2 {
            return Err(CliError::Config(format!(
                "a multiplier run takes one or two instruments, got {}",
                sources.len()
            )));
        }
        let instruments = sources
            .iter()
            .map(|s| self.shock(ds, s))
            .collect::<Result<Vec<_>>>()?;
        self.timed("multiplier", |run| {
            let output = m.output.clone().unwrap_or_else(|| run.config.variables.output.clone());
            let spending = m.spending.clone().unwrap_or_else(|| run.config.variables.spending.clone());
            let spec = lp_spec(&run.config, &output, states);
            let result = estimate_multiplier(ds, &spec, &spending, &instruments)
                .map_err(CliError::stage("multiplier"))?;
            run.write_result("multiplier", &result.irf)?;
            run.out.write("first_stage.csv", first_stage_csv(&result.first_stage).as_bytes())?;
            run.out.write_json("multiplier_first_stage.json", &result.first_stage)?;
            Ok(())
        })
    }

    fn write_result(&mut self, stem: &str, result: &IrfResult) -> Result<()> {
        self.out.write_json(&format!("{stem}.json"), result)?;
        self.out.write(&format!("{stem}_figure.csv"), figure_csv(result).as_bytes())?;
        if !result.differences.is_empty() {
            let rows = difference_table(result, &self.config.irf.report_horizons);
            self.out.write(&format!("{stem}_table.txt"), format_table(&rows).as_bytes())?;
        }
        self.manifest
            .warnings
            .extend(result.warnings.iter().map(|w| format!("{stem}: {w}")));
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.outputs = self.out.written().to_vec();
        self.manifest.outputs.sort();
        self.out.write_json("manifest.json", &self.manifest)?;
        Ok(self.manifest)
    }
}

pub fn prepare_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let stage = CliError::stage;
    let schema = Schema {
        quarter_column: cfg.data.quarter_column.clone(),
        columns: cfg.data.columns.clone(),
        delimiter: cfg.data.delimiter,
    };
    let mut ds = load_dataset(&cfg.data.path, &schema).map_err(stage("data"))?;
    if let Some(path) = &cfg.data.securities {
        let records = load_securities(path).map_err(stage("data"))?;
        let gdp = ds.series(&cfg.data.nominal_gdp).map_err(stage("data"))?;
        let cost = compute_fiscal_cost(&records, &gdp).map_err(stage("data"))?;
        ds.insert(cfg.data.fiscal_cost.clone(), &cost);
    }
    if !cfg.data.scale.is_empty() {
        let potential = ds.values(&cfg.data.potential_gdp).map_err(stage("data"))?.to_vec();
        for name in &cfg.data.scale {
            let values = ds.values(name).map_err(stage("data"))?;
            let scaled = gordon_krenn_scale(values, &potential).map_err(stage("data"))?;
            ds.insert(name.clone(), &Series::new(ds.start(), scaled));
        }
    }
    Ok(ds)
}

pub fn build_states(cfg: &RunConfig, ds: &Dataset) -> Result<States> {
    let build = |state: &Option<StateConfig>| -> Result<Option<StateSeries>> {
        match state {
            Some(s) if s.enabled => build_one(cfg, ds, s).map(Some),
            _ => Ok(None),
        }
    };
    let first = build(&cfg.state)?;
    let second = build(&cfg.second_state)?;
    if second.is_some() && first.is_none() {
        return Err(CliError::Config("second_state requires state".into()));
    }
    Ok(States { first, second })
}

fn build_one(cfg: &RunConfig, ds: &Dataset, state: &StateConfig) -> Result<StateSeries> {
    let stage = CliError::stage("states");
    let source = cfg.state_source(state);
    let series = ds.series(&source).map_err(stage)?;
    let Some((lo, hi)) = series.valid_range() else {
        return Err(CliError::Config(format!("state source `{source}` has no observations")));
    };
    let start = lo.since(series.start) as usize;
    let len = hi.since(lo) as usize + 1;
    let raw = &series.values[start..start + len];
    let cycle = match state.trend {
        Trend::Linear => linear_detrend(raw).map_err(CliError::stage("states"))?.1,
        Trend::Hp => hp_filter(raw, state.hp_lambda).map_err(CliError::stage("states"))?.1,
        Trend::None => raw.to_vec(),
    };
    build_state(&Series::new(lo, cycle), state.mode, state.gamma, state.lag).map_err(CliError::stage("states"))
}

pub fn lp_spec(cfg: &RunConfig, dependent: &str, states: &States) -> LpSpec {
    let irf = &cfg.irf;
    let mut spec = LpSpec::new(dependent, SHOCK_COLUMN)
        .with_controls(cfg.controls())
        .with_lags(irf.control_lags)
        .with_horizon(irf.horizon)
        .cumulative(irf.cumulative);
    spec.ci_level = irf.ci_level;
    spec.bandwidth = irf.bandwidth;
    spec.state = states.first.clone();
    spec.second_state = states.second.clone();
    spec
}

fn estimate_irf(cfg: &RunConfig, ds: &Dataset, spec: &LpSpec) -> Result<IrfResult> {
    let stage = CliError::stage("irf");
    match Layout::of(spec) {
        Layout::Continuous => estimate_continuous(ds, spec, cfg.irf.eval_points.as_deref()),
        Layout::HorseRace => estimate_horse_race(ds, spec),
        _ => estimate_lp(ds, spec),
    }
    .map_err(stage)
}

pub fn restrictions(cfg: &RunConfig) -> Result<Vec<NarrativeRestriction>> {
    cfg.identification
        .restrictions
        .iter()
        .map(|r| {
            let date: Quarter = r
                .date
                .parse()
                .map_err(|e| CliError::Config(format!("narrative restriction date: {e}")))?;
            Ok(NarrativeRestriction {
                date,
                sign: if r.positive { ShockSign::Positive } else { ShockSign::Negative },
                dominance: r.dominance,
            })
        })
        .collect()
}

fn read_shock_file(source: &ShockConfig) -> Result<Series> {
    let Some(path) = &source.file else {
        return Err(CliError::Config("shock source needs `file`".into()));
    };
    let file = File::open(path).map_err(|e| CliError::Config(format!("opening {}: {e}", path.display())))?;
    let (_, series) = Series::read_csv(file).map_err(CliError::stage("identify"))?;
    Ok(series)
}
