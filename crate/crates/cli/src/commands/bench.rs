//! `bench`: wall-clock scaling reports.

use std::time::Instant;

use clap::{Args, ValueEnum};
use pathwise::flsa1d::{flsa_visit_path, FlsaConfig, PathSchedule};
use pathwise::flsa2d::{flsa2d_visit_path, Flsa2dConfig, PixelGrid};
use pathwise::lasso_family::{fit_path, log_grid, CdOptions, Penalty, SeparableProblem};
use pathwise::numeric::{standardize, DesignMatrix, ResponseVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Common;
use crate::error::{CliError, CliResult};
use crate::gen::{plus_image, regression};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    LassoScaling,
    FlsaPath,
    Flsa2dGrid,
}

#[derive(Debug, Args, Clone)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Timed repetitions per size; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Sizes to time: n for lasso-scaling and flsa-path, the side for
    /// flsa2d-grid.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Predictor counts for the p series of lasso-scaling.
    #[arg(long, value_delimiter = ',')]
    pub p_sizes: Option<Vec<usize>>,
    /// Predictors in the n series of lasso-scaling.
    #[arg(long, default_value_t = 100)]
    pub fixed_p: usize,
    /// Observations in the p series of lasso-scaling.
    #[arg(long, default_value_t = 2000)]
    pub fixed_n: usize,
    /// Accepted slope band for lasso-scaling.
    #[arg(long, default_value_t = 0.7)]
    pub slope_min: f64,
    #[arg(long, default_value_t = 1.4)]
    pub slope_max: f64,
    /// Time limit in seconds for the largest flsa2d-grid size.
    #[arg(long, default_value_t = 30.0)]
    pub ceiling: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub series: String,
    pub n: usize,
    pub p: usize,
    pub median_seconds: f64,
    pub seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub suite: Suite,
    pub runs: usize,
    pub timings: Vec<Timing>,
    pub checks: Vec<Check>,
}

/// Least-squares slope of `ln t` on `ln s`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(s, t)| (s.ln(), t.ln())).collect();
    let m = logs.len() as f64;
    let (mx, my) = logs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn time_runs(runs: usize, mut job: impl FnMut() -> CliResult<()>) -> CliResult<(f64, Vec<f64>)> {
    let mut secs = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        job()?;
        secs.push(start.elapsed().as_secs_f64());
    }
    let mut sorted = secs.clone();
    Ok((median(&mut sorted), secs))
}

/// Lasso path setting: 100 log-spaced values down to this fraction of lambda_max.
const LASSO_PATH_RATIO: f64 = 0.05;
const LASSO_PATH_LEN: usize = 100;

fn lasso_problem(n: usize, p: usize, seed: u64) -> CliResult<SeparableProblem> {
    let d = regression(n, p, 0.0, 3.0, seed);
    let x = standardize(&DesignMatrix::from_rows(&d.x)?)?;
    let mean = d.y.iter().sum::<f64>() / n as f64;
    let y = ResponseVector::new(d.y.iter().map(|v| v - mean).collect())?;
    Ok(SeparableProblem::new(x, y, Penalty::Lasso { lambda: 0.0 })?)
}

fn time_lasso(n: usize, p: usize, args: &BenchArgs, seed: u64, tol: f64) -> CliResult<(f64, Vec<f64>)> {
    let problem = lasso_problem(n, p, seed)?;
    let grid = log_grid(problem.lambda_max(), LASSO_PATH_RATIO, LASSO_PATH_LEN);
    let opts = CdOptions::with_tol(tol);
    time_runs(args.runs, || fit_path(&problem, &grid, &opts).map(|_| ()).map_err(CliError::from))
}

/// Piecewise-constant chain with segments of about 100 points plus N(0, 1) noise.
fn chain_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    (0..n)
        .map(|i| {
            if i % 100 == 0 {
                level = rng.gen_range(-2.0..2.0);
            }
            level + rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

pub fn run_suite(args: &BenchArgs) -> CliResult<BenchReport> {
    if args.runs == 0 {
        return Err(CliError::input("--runs must be positive"));
    }
    let seed = args.common.seed.unwrap_or(1);
    let mut timings = Vec::new();
    let mut checks = Vec::new();
    let band = |name: &str, v: f64| Check {
        name: name.to_string(),
        value: v,
        pass: v >= args.slope_min && v <= args.slope_max,
    };
    match args.suite {
        Suite::LassoScaling => {
            let tol = args.common.tol.unwrap_or(1e-6);
            let ns = args.sizes.clone().unwrap_or_else(|| vec![200, 400, 800, 1600, 3200]);
            let ps = args.p_sizes.clone().unwrap_or_else(|| vec![100, 200, 400, 800]);
            for &n in &ns {
                let (median_seconds, seconds) = time_lasso(n, args.fixed_p, args, seed, tol)?;
                timings.push(Timing { series: "n".into(), n, p: args.fixed_p, median_seconds, seconds });
            }
            for &p in &ps {
                let (median_seconds, seconds) = time_lasso(args.fixed_n, p, args, seed, tol)?;
                timings.push(Timing { series: "p".into(), n: args.fixed_n, p, median_seconds, seconds });
            }
            let pts = |series: &str, size: fn(&Timing) -> usize| -> Vec<(f64, f64)> {
                timings
                    .iter()
                    .filter(|t| t.series == series)
                    .map(|t| (size(t) as f64, t.median_seconds))
                    .collect()
            };
            if ns.len() >= 2 {
                checks.push(band("slope vs n", log_log_slope(&pts("n", |t| t.n))));
            }
            if ps.len() >= 2 {
                checks.push(band("slope vs p", log_log_slope(&pts("p", |t| t.p))));
            }
        }
        Suite::FlsaPath => {
            let tol = args.common.tol.unwrap_or(pathwise::numeric::CONVERGENCE_TOL);
            let config = FlsaConfig::with_tol(tol);
            for &n in args.sizes.as_deref().unwrap_or(&[10_000, 100_000]) {
                let y = chain_signal(n, seed);
                let schedule = match args.common.delta {
                    Some(d) => PathSchedule::new(0.0, 1.0, d)?,
                    None => PathSchedule::with_default_delta(0.0, 1.0)?,
                };
                let (median_seconds, seconds) = time_runs(args.runs, || {
                    flsa_visit_path(&y, &schedule, &config, |_, _| ()).map(|_| ()).map_err(CliError::from)
                })?;
                timings.push(Timing { series: "n".into(), n, p: 1, median_seconds, seconds });
            }
            checks.push(Check { name: "completed".into(), value: timings.len() as f64, pass: true });
        }
        Suite::Flsa2dGrid => {
            let tol = args.common.tol.unwrap_or(pathwise::numeric::CONVERGENCE_TOL);
            let config = Flsa2dConfig::with_tol(tol);
            for &side in args.sizes.as_deref().unwrap_or(&[8, 16, 32]) {
                let img = plus_image(side, 1.0, seed);
                let grid = PixelGrid::new(side, side, img.noisy)?;
                let schedule = match args.common.delta {
                    Some(d) => PathSchedule::new(0.1, 0.5, d)?,
                    None => PathSchedule::with_default_delta(0.1, 0.5)?,
                };
                let (median_seconds, seconds) = time_runs(args.runs, || {
                    flsa2d_visit_path(&grid, &schedule, &config, |_, _| ()).map_err(CliError::from)
                })?;
                timings.push(Timing { series: "side".into(), n: side, p: side, median_seconds, seconds });
            }
            let monotone = timings.windows(2).all(|w| w[1].median_seconds >= w[0].median_seconds);
            checks.push(Check { name: "monotone in size".into(), value: monotone as u8 as f64, pass: monotone });
            if let Some(last) = timings.last() {
                checks.push(Check {
                    name: format!("largest size under {} s", args.ceiling),
                    value: last.median_seconds,
                    pass: last.median_seconds <= args.ceiling,
                });
            }
        }
    }
    Ok(BenchReport { suite: args.suite, runs: args.runs, timings, checks })
}

pub fn markdown(report: &BenchReport) -> String {
    let mut s = String::from("| series | n | p | median s | runs |\n|---|---:|---:|---:|---:|\n");
    for t in &report.timings {
        s.push_str(&format!(
            "| {} | {} | {} | {:.6} | {} |\n",
            t.series,
            t.n,
            t.p,
            t.median_seconds,
            t.seconds.len()
        ));
    }
    s.push_str("\n| check | value | pass |\n|---|---:|---|\n");
    for c in &report.checks {
        s.push_str(&format!("| {} | {:.4} | {} |\n", c.name, c.value, if c.pass { "yes" } else { "no" }));
    }
    s
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let report = run_suite(args)?;
    print!("{}", markdown(&report));
    if let Some(out) = args.common.output.as_deref() {
        io::write_json(out, &report)?;
    }
    Ok(())
}
