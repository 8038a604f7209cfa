use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statelp::data::{Dataset, Quarter, StateMode, StateSeries};
use statelp::lp::{estimate_horse_race, estimate_lp, fit_horizons, LpSpec};

fn q0() -> Quarter {
    "1947Q1".parse().unwrap()
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Bivariate VAR(1) driven by an observed shock in the first equation.
fn var1(n: usize, seed: u64) -> (Dataset, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = normals(&mut rng, n);
    let u = normals(&mut rng, n);
    let mut y = DVector::zeros(2);
    let (mut y1, mut y2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        let shock = DVector::from_vec(vec![e[t] + 0.3 * u[t], 0.4 * e[t] + u[t]]);
        y = &a * y + shock;
        y1.push(y[0]);
        y2.push(y[1]);
    }
    let ds = Dataset::from_columns(q0(), [("y1", y1), ("y2", y2), ("e", e)]).unwrap();
    (ds, a)
}

fn regime(n: usize, period: usize) -> Vec<f64> {
    (0..n).map(|t| ((t / period) % 2) as f64).collect()
}

#[test]
fn lp_converges_to_var_irf() {
    let (ds, a) = var1(50_000, 1);
    let spec = LpSpec::new("y1", "e")
        .with_controls(["y1", "y2"])
        .with_lags(1)
        .with_horizon(8);
    let r = estimate_lp(&ds, &spec).unwrap();
    let b = DVector::from_vec(vec![1.0, 0.4]);
    let mut ah = DMatrix::identity(2, 2);
    let mut worst = 0.0f64;
    for p in &r.state("linear").unwrap().points {
        let truth = (&ah * &b)[0];
        worst = worst.max((p.estimate - truth).abs());
        ah = &a * ah;
    }
    assert!(worst < 0.02, "max deviation {worst}");
}

#[test]
fn horse_race_nests_two_state_model() {
    let (ds, _) = var1(600, 2);
    let w = regime(600, 15);
    let state = StateSeries::new(q0(), w.clone(), StateMode::Dummy);
    let never = StateSeries::new(q0(), vec![0.0; 600], StateMode::Dummy);
    let base = LpSpec::new("y1", "e").with_controls(["y1", "y2"]).with_lags(2).with_horizon(4);
    let two = estimate_lp(&ds, &base.clone().with_state(state.clone())).unwrap();
    let horse = estimate_horse_race(&ds, &base.with_state(state).with_second_state(never)).unwrap();
    assert!(horse.state("C").is_none());
    for h in 0..=4 {
        let ha = horse.state("A").unwrap().at(h).unwrap().estimate;
        let hb = horse.state("B").unwrap().at(h).unwrap().estimate;
        let ta = two.state("A").unwrap().at(h).unwrap().estimate;
        let tb = two.state("B").unwrap().at(h).unwrap().estimate;
        assert!((ha - tb).abs() < 1e-8, "h={h}");
        assert!((ha + hb - ta).abs() < 1e-8, "h={h}");
    }
}

#[test]
fn horse_race_recovers_independent_interactions() {
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = normals(&mut rng, n);
    let u = normals(&mut rng, n);
    let wb = regime(n, 10);
    let wc = regime(n, 7);
    let z: Vec<f64> = (0..n)
        .map(|t| (0.5 + wb[t] - wc[t]) * e[t] + u[t])
        .collect();
    let ds = Dataset::from_columns(q0(), [("z", z), ("e", e)]).unwrap();
    let spec = LpSpec::new("z", "e")
        .with_controls(["z"])
        .with_lags(1)
        .with_horizon(0)
        .with_state(StateSeries::new(q0(), wb, StateMode::Dummy))
        .with_second_state(StateSeries::new(q0(), wc, StateMode::Dummy));
    let r = estimate_horse_race(&ds, &spec).unwrap();
    for (label, truth) in [("A", 0.5), ("B", 1.0), ("C", -1.0)] {
        let p = r.state(label).unwrap().at(0).unwrap();
        assert!((p.estimate - truth).abs() < 3.0 * p.se, "{label}: {}", p.estimate);
    }
    assert!(r.difference("B").unwrap().at(0).unwrap().pvalue < 0.01);
}

#[test]
fn horse_race_with_empty_states_is_linear() {
    let (ds, _) = var1(400, 4);
    let zero = StateSeries::new(q0(), vec![0.0; 400], StateMode::Dummy);
    let base = LpSpec::new("y1", "e").with_controls(["y1"]).with_lags(1).with_horizon(3);
    let lin = estimate_lp(&ds, &base).unwrap();
    let horse = estimate_horse_race(&ds, &base.with_state(zero.clone()).with_second_state(zero)).unwrap();
    assert_eq!(horse.states.len(), 1);
    for (a, b) in horse.states[0].points.iter().zip(&lin.states[0].points) {
        assert!((a.estimate - b.estimate).abs() < 1e-10);
        assert!((a.se - b.se).abs() < 1e-10);
    }
}

#[test]
fn never_switching_dummy_equals_linear() {
    let (ds, _) = var1(500, 5);
    let base = LpSpec::new("y1", "e").with_controls(["y1", "y2"]).with_lags(4).with_horizon(6);
    let ones = StateSeries::new(q0(), vec![1.0; 500], StateMode::Dummy);
    let lin = fit_horizons(&ds, &base).unwrap();
    let st = fit_horizons(&ds, &base.with_state(ones)).unwrap();
    for (l, s) in lin.iter().zip(&st) {
        assert_eq!(s.design.blocks.len(), 1);
        assert_eq!(s.design.warnings.len(), 1);
        let d = (&l.fit.coefficients - &s.fit.coefficients).amax();
        assert!(d < 1e-12, "h={} diff {d}", l.design.horizon);
    }
}

#[test]
fn difference_pvalue_invariant_to_label_swap() {
    let (ds, _) = var1(500, 6);
    let w = regime(500, 12);
    let flipped: Vec<f64> = w.iter().map(|v| 1.0 - v).collect();
    let base = LpSpec::new("y1", "e").with_controls(["y1", "y2"]).with_lags(2).with_horizon(8);
    let r = estimate_lp(&ds, &base.clone().with_state(StateSeries::new(q0(), w, StateMode::Dummy))).unwrap();
    let s = estimate_lp(&ds, &base.with_state(StateSeries::new(q0(), flipped, StateMode::Dummy))).unwrap();
    let (d, e) = (r.difference("A-B").unwrap(), s.difference("A-B").unwrap());
    for (p, q) in d.points.iter().zip(&e.points) {
        assert!((p.estimate + q.estimate).abs() < 1e-10);
        assert!((p.pvalue - q.pvalue).abs() < 1e-10);
        assert_eq!(p.stars, q.stars);
    }
}

#[test]
fn confidence_bands_bracket_estimates() {
    let (ds, _) = var1(300, 7);
    let logit: Vec<f64> = normals(&mut ChaCha8Rng::seed_from_u64(8), 300)
        .iter()
        .map(|x| 1.0 / (1.0 + (-3.0 * x).exp()))
        .collect();
    let spec = LpSpec::new("y1", "e")
        .with_controls(["y1"])
        .with_lags(2)
        .with_horizon(8)
        .with_state(StateSeries::new(q0(), logit, StateMode::Logit));
    let r = estimate_lp(&ds, &spec).unwrap();
    for s in &r.states {
        for p in &s.points {
            assert!(p.ci_low <= p.estimate && p.estimate <= p.ci_high);
        }
    }
    assert_eq!(r.nobs.len(), 9);
    assert!(r.nobs.windows(2).all(|w| w[1] + 1 == w[0]));
}
