#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statelp::data::{Dataset, Quarter};

pub const START_YEAR: i32 = 1900;
pub const QUARTERS: usize = 240;
/// 1917Q2 and 1941Q4, the default narrative dates.
pub const PLANTED: [usize; 2] = [69, 167];

pub fn a1() -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, &[
        0.5, 0.2, 0.0, 0.0, //
        0.0, 0.8, 0.0, 0.0, //
        0.1, 0.1, 0.4, 0.0, //
        0.0, 0.2, -0.1, 0.6,
    ])
}

pub fn a0() -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, &[
        1.0, 0.5, -0.3, 0.2, //
        0.3, 1.0, 0.2, -0.2, //
        0.2, 0.2, 1.0, 0.1, //
        -0.1, 0.4, 0.2, 1.0,
    ])
}

/// The same structural VAR as a dataset of `t` quarters from 1900Q1, with
/// spending shocks of 4 at `dates`; also returns the structural shocks.
pub fn planted_svar(t: usize, dates: &[usize], seed: u64) -> (Dataset, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps = DMatrix::from_fn(t, 4, |_, _| StandardNormal.sample(&mut rng));
    for &d in dates {
        eps[(d, 1)] = 4.0;
    }
    let (a1, a0) = (a1(), a0());
    let mut y = DVector::zeros(4);
    let mut cols = vec![Vec::with_capacity(t); 4];
    for s in 0..t {
        y = &a1 * y + &a0 * eps.row(s).transpose();
        for (v, c) in cols.iter_mut().enumerate() {
            c.push(y[v]);
        }
    }
    let start = Quarter::new(START_YEAR, 1).unwrap();
    let names = ["gdp", "g", "tax", "debt"];
    let ds = Dataset::from_columns(start, names.into_iter().zip(cols)).unwrap();
    (ds, eps)
}

fn quarter_label(i: usize) -> String {
    format!("{}Q{}", START_YEAR + (i / 4) as i32, i % 4 + 1)
}

/// Structural VAR(1) in gdp, g, tax, debt with large positive spending
/// shocks at the planted dates, plus a persistent fiscal cost series.
pub fn synthetic_csv(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a1, a0) = (a1(), a0());
    let mut y = DVector::zeros(4);
    let mut cost = 0.0;
    let mut out = String::from("quarter,gdp,g,tax,debt,fiscal_cost\n");
    for t in 0..QUARTERS {
        let mut eps = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
        if PLANTED.contains(&t) {
            eps[1] = 4.0;
        }
        y = &a1 * y + &a0 * eps;
        let nu: f64 = StandardNormal.sample(&mut rng);
        cost = 0.9 * cost + 0.3 * nu;
        let level = 2.0 + 0.01 * t as f64 + cost;
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            quarter_label(t),
            y[0],
            y[1],
            y[2],
            y[3],
            level
        );
    }
    out
}

/// Config exercising every stage: narrative identification, two-state
/// smooth local projections and a multiplier instrumented by timing shocks.
pub fn full_config(data: &Path, out: &Path) -> String {
    format!(
        r#"seed = 7
output_dir = "{out}"

[data]
path = "{data}"

[state]
mode = "logit"
gamma = 10.0

[shock]
source = "narrative_sign"

[identification]
draws = 300

[irf]
horizon = 8
estimator = "slp"

[multiplier]
instruments = [{{ source = "timing" }}]
"#,
        out = out.display(),
        data = data.display()
    )
}

/// Writes the synthetic dataset and a config into `dir`; returns the config
/// path.
pub fn write_fixture(dir: &Path, config: impl Fn(&Path, &Path) -> String) -> PathBuf {
    let data = dir.join("data.csv");
    fs::write(&data, synthetic_csv(3)).unwrap();
    let path = dir.join("run.toml");
    fs::write(&path, config(&data, &dir.join("out"))).unwrap();
    path
}

/// All regular files under `dir` except the manifest, sorted by name.
pub fn numeric_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
