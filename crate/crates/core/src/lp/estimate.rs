use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::design::{build_design, Design, Layout};
use super::result::{assemble, Contrast, IrfResult, KeyEstimates};
use super::spec::LpSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regression::{newey_west_with_bread, ols_labeled, RegressionResult};
use crate::stats;

/// OLS fit with HAC covariance at one horizon.
#[derive(Debug, Clone)]
pub struct HorizonFit {
    pub design: Design,
    pub fit: RegressionResult,
    pub bandwidth: usize,
}

impl HorizonFit {
    pub(crate) fn keys(&self) -> KeyEstimates {
        let idx: Vec<usize> = self.design.blocks.iter().map(|b| b.key_col).collect();
        KeyEstimates {
            horizon: self.design.horizon,
            labels: self.design.blocks.iter().map(|b| b.label.clone()).collect(),
            coef: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.fit.coefficients[i])),
            cov: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.fit.covariance[(idx[a], idx[b])]),
        }
    }
}

fn fit_horizon(ds: &Dataset, spec: &LpSpec, h: usize) -> Result<HorizonFit> {
    let design = build_design(ds, spec, h)?;
    let mut fit = ols_labeled(&design.y, &design.x, &design.labels)?;
    let bandwidth = spec.bandwidth_at(h);
    fit.covariance = newey_west_with_bread(&fit.xtx_inv, &design.x, &fit.residuals, bandwidth)?;
    Ok(HorizonFit {
        design,
        fit,
        bandwidth,
    })
}

/// Runs the horizon regressions `0..=H` (in parallel) and returns them in
/// horizon order.
pub fn fit_horizons(ds: &Dataset, spec: &LpSpec) -> Result<Vec<HorizonFit>> {
    spec.validate()?;
    (0..=spec.horizon_max)
        .into_par_iter()
        .map(|h| fit_horizon(ds, spec, h).map_err(|e| e.at_horizon(h)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub(crate) fn layout_contrasts(layout: Layout, eval_points: &[f64]) -> (Vec<Contrast>, Vec<Contrast>) {
    match layout {
        Layout::Linear => (vec![Contrast::new("linear", &[("linear", 1.0)])], vec![]),
        Layout::TwoState => (
            vec![
                Contrast::new("A", &[("A", 1.0)]),
                Contrast::new("B", &[("B", 1.0)]),
            ],
            vec![Contrast::new("A-B", &[("A", 1.0), ("B", -1.0)])],
        ),
        Layout::HorseRace => (
            vec![
                Contrast::new("A", &[("A", 1.0)]),
                Contrast::new("B", &[("B", 1.0)]),
                Contrast::new("C", &[("C", 1.0)]),
            ],
            vec![
                Contrast::new("B", &[("B", 1.0)]),
                Contrast::new("C", &[("C", 1.0)]),
            ],
        ),
        Layout::Continuous => {
            let states = eval_points
                .iter()
                .map(|&c| Contrast::new(format!("state={c}"), &[("base", 1.0), ("interaction", c)]))
                .collect();
            let mut diffs = vec![Contrast::new("interaction", &[("interaction", 1.0)])];
            if let (Some(&lo), Some(&hi)) = (eval_points.first(), eval_points.last()) {
                if eval_points.len() > 1 {
                    diffs.push(Contrast::new(
                        format!("state={hi}-state={lo}"),
                        &[("interaction", hi - lo)],
                    ));
                }
            }
            (states, diffs)
        }
    }
}

/// Default evaluation points of a continuous state: its 10th and 90th
/// percentiles over the horizon-0 estimation sample.
pub(crate) fn default_eval_points(ds: &Dataset, spec: &LpSpec, sample: &[crate::data::Quarter]) -> Vec<f64> {
    let state = spec.state.as_ref().expect("continuous layout has a state");
    let _ = ds;
    let values: Vec<f64> = sample.iter().map(|&q| state.get(q)).collect();
    [0.10, 0.90]
        .iter()
        .filter_map(|&p| stats::quantile(&values, p))
        .collect()
}

pub(crate) fn range_warnings(spec: &LpSpec, sample: &[crate::data::Quarter], points: &[f64]) -> Vec<String> {
    let Some(state) = spec.state.as_ref() else {
        return vec![];
    };
    let values: Vec<f64> = sample.iter().map(|&q| state.get(q)).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .filter(|&&c| c < lo || c > hi)
        .map(|c| {
            let msg = format!("evaluation point {c} lies outside the observed state range [{lo}, {hi}]; response is extrapolated");
            log::warn!("{msg}");
            msg
        })
        .collect()
}

fn finish(fits: &[HorizonFit], spec: &LpSpec, states: Vec<Contrast>, diffs: Vec<Contrast>, mut warnings: Vec<String>) -> IrfResult {
    let keys: Vec<KeyEstimates> = fits.iter().map(HorizonFit::keys).collect();
    for f in fits {
        warnings.extend(f.design.warnings.iter().cloned());
    }
    let nobs = fits.iter().map(|f| f.fit.nobs).collect();
    assemble(&keys, &states, &diffs, spec.ci_level, nobs, warnings)
}

/// State-dependent (or linear) local projection impulse responses.
///
/// Two-state runs report states `A` (weight `I`) and `B` (weight `1 - I`)
/// and the contrast `A-B`; continuous states are evaluated at their 10th and
/// 90th percentiles; horse-race runs report `A`, `B`, `C`.
pub fn estimate_lp(ds: &Dataset, spec: &LpSpec) -> Result<IrfResult> {
    match Layout::of(spec) {
        Layout::Continuous => estimate_continuous(ds, spec, None),
        layout => {
            let fits = fit_horizons(ds, spec)?;
            let (states, diffs) = layout_contrasts(layout, &[]);
            Ok(finish(&fits, spec, states, diffs, vec![]))
        }
    }
}

/// Baseline block plus two interacted regime blocks. Reports the baseline
/// response `A` and the interaction effects `B` and `C`, each tested
/// against zero.
pub fn estimate_horse_race(ds: &Dataset, spec: &LpSpec) -> Result<IrfResult> {
    if Layout::of(spec) != Layout::HorseRace {
        return Err(Error::InvalidArgument(
            "horse race needs both state and second_state".into(),
        ));
    }
    estimate_lp(ds, spec)
}

/// Continuous interaction model; the response at state value `c` is
/// `beta_base + c * beta_interaction`. `eval_points = None` uses the 10th and
/// 90th percentiles of the state.
pub fn estimate_continuous(ds: &Dataset, spec: &LpSpec, eval_points: Option<&[f64]>) -> Result<IrfResult> {
    if Layout::of(spec) != Layout::Continuous {
        return Err(Error::InvalidArgument(
            "continuous estimation needs a continuous state".into(),
        ));
    }
    let fits = fit_horizons(ds, spec)?;
    let sample = &fits[0].design.quarters;
    let points = match eval_points {
        Some(p) => p.to_vec(),
        None => default_eval_points(ds, spec, sample),
    };
    let warnings = range_warnings(spec, sample, &points);
    let (states, diffs) = layout_contrasts(Layout::Continuous, &points);
    Ok(finish(&fits, spec, states, diffs, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Quarter, StateMode, StateSeries};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn q0() -> Quarter {
        "1950Q1".parse().unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn static_dgp_recovers_impact_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 2000;
        let e = noise(&mut rng, n);
        let u = noise(&mut rng, n);
        let z: Vec<f64> = (0..n).map(|t| 0.5 * e[t] + u[t]).collect();
        let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
        let spec = LpSpec::new("z", "e").with_controls(["z"]).with_lags(1).with_horizon(4);
        let r = estimate_lp(&ds, &spec).unwrap();
        let s = r.state("linear").unwrap();
        assert!((s.points[0].estimate - 0.5).abs() < 3.0 * s.points[0].se);
        for p in &s.points[1..] {
            assert!(p.estimate.abs() < 3.0 * p.se, "h={} {}", p.horizon, p.estimate);
        }
        assert!(r.differences.is_empty());
    }

    #[test]
    fn regime_specific_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 2000;
        let e = noise(&mut rng, n);
        let u = noise(&mut rng, n);
        let regime: Vec<f64> = (0..n).map(|t| ((t / 25) % 2) as f64).collect();
        let z: Vec<f64> = (0..n).map(|t| regime[t] * e[t] + 0.5 * u[t]).collect();
        let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
        let state = StateSeries::new(q0(), regime, StateMode::Dummy);
        let spec = LpSpec::new("z", "e")
            .with_controls(["z"])
            .with_lags(1)
            .with_horizon(2)
            .with_state(state);
        let r = estimate_lp(&ds, &spec).unwrap();
        let a = r.state("A").unwrap().at(0).unwrap();
        let b = r.state("B").unwrap().at(0).unwrap();
        assert!((a.estimate - 1.0).abs() < 3.0 * a.se);
        assert!(b.estimate.abs() < 3.0 * b.se);
        assert!(r.difference("A-B").unwrap().at(0).unwrap().pvalue < 0.01);
    }

    #[test]
    fn collinear_horse_race_states_are_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 300;
        let e = noise(&mut rng, n);
        let z = noise(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|t| ((t / 10) % 2) as f64).collect();
        let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
        let s = StateSeries::new(q0(), w, StateMode::Dummy);
        let spec = LpSpec::new("z", "e")
            .with_controls(["z"])
            .with_lags(1)
            .with_horizon(1)
            .with_state(s.clone())
            .with_second_state(s);
        let err = estimate_horse_race(&ds, &spec).unwrap_err();
        assert!(matches!(
            err,
            Error::AtHorizon { ref source, .. } if matches!(**source, Error::SingularDesign { .. })
        ), "{err}");
    }

    #[test]
    fn continuous_zero_point_is_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let n = 600;
        let e = noise(&mut rng, n);
        let x = noise(&mut rng, n);
        let u = noise(&mut rng, n);
        let z: Vec<f64> = (0..n).map(|t| (1.0 + 2.0 * x[t]) * e[t] + u[t]).collect();
        let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
        let state = StateSeries::new(q0(), x, StateMode::Continuous);
        let spec = LpSpec::new("z", "e")
            .with_controls(["z"])
            .with_lags(1)
            .with_horizon(1)
            .with_state(state);
        let r = estimate_continuous(&ds, &spec, Some(&[0.0, 1.0])).unwrap();
        let fits = fit_horizons(&ds, &spec).unwrap();
        let base = fits[0].fit.coefficients[fits[0].design.blocks[0].key_col];
        let at0 = r.state("state=0").unwrap().at(0).unwrap().estimate;
        assert!((at0 - base).abs() < 1e-12);
        let at1 = r.state("state=1").unwrap().at(0).unwrap().estimate;
        let se = r.difference("interaction").unwrap().at(0).unwrap().se;
        assert!((at1 - at0 - 2.0).abs() < 3.0 * se);
    }

    #[test]
    fn continuous_default_points_and_extrapolation_warning() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let n = 400;
        let e = noise(&mut rng, n);
        let x = noise(&mut rng, n);
        let z = noise(&mut rng, n);
        let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
        let spec = LpSpec::new("z", "e")
            .with_controls(["z"])
            .with_lags(1)
            .with_horizon(0)
            .with_state(StateSeries::new(q0(), x, StateMode::Continuous));
        let r = estimate_lp(&ds, &spec).unwrap();
        assert_eq!(r.states.len(), 2);
        assert!(r.warnings.is_empty());
        let r = estimate_continuous(&ds, &spec, Some(&[100.0])).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
