//! `denoise`: 2D fused lasso on a graymap.

use std::path::PathBuf;

use clap::Args;
use pathwise::flsa1d::PathSchedule;
use pathwise::flsa2d::{flsa2d_solve, flsa2d_solve_path_with, two_fold_validate, Flsa2dConfig, Flsa2dSolution, PixelGrid};
use serde::Serialize;

use super::Common;
use crate::error::{CliError, CliResult};
use crate::io;

/// Default grids, in units of the image's standard deviation.
const LAMBDA1_UNITS: [f64; 7] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
const LAMBDA2_UNITS: [f64; 11] = [0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Args, Clone)]
pub struct DenoiseArgs {
    /// P2 or P5 graymap.
    #[arg(long)]
    pub input: PathBuf,
    /// Affine sample mapping; defaults to the sidecar next to the input.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    /// Choose the penalties by two-fold validation over the grids.
    #[arg(long)]
    pub two_fold: bool,
    /// Comma-separated lambda1 values for --two-fold.
    #[arg(long, value_delimiter = ',')]
    pub lambda1_grid: Option<Vec<f64>>,
    /// Comma-separated lambda2 values for --two-fold.
    #[arg(long, value_delimiter = ',')]
    pub lambda2_grid: Option<Vec<f64>>,
    /// Fix lambda1 = 0.
    #[arg(long)]
    pub pure_fusion: bool,
    /// Vertical fusion penalty as a multiple of lambda2.
    #[arg(long, default_value_t = 1.0)]
    pub vertical_ratio: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
struct GroupRecord {
    group: usize,
    value: f64,
    size: usize,
    /// `[row, column]` pairs.
    pixels: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    selected_by: &'a str,
    groups: usize,
    objective: f64,
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn solve(grid: &PixelGrid, l1: f64, l2: f64, delta: Option<f64>, config: &Flsa2dConfig) -> CliResult<Flsa2dSolution> {
    match delta {
        None => Ok(flsa2d_solve(grid, l1, l2, config)?),
        Some(d) => {
            let schedule = PathSchedule::new(l1, l2, d)?;
            let mut path = flsa2d_solve_path_with(grid, &schedule, config)?;
            let mut s = path.pop().expect("grid is never empty");
            s.lambda2 = l2;
            s.lambda3 = l2 * config.vertical_ratio;
            Ok(s)
        }
    }
}

pub fn denoise(args: &DenoiseArgs) -> CliResult<()> {
    let output = args
        .common
        .output
        .as_deref()
        .ok_or_else(|| CliError::input("denoise needs --output"))?;
    let (img, meta, grid) = io::read_image(&args.input, args.meta.as_deref())?;
    let mut config = Flsa2dConfig {
        vertical_ratio: args.vertical_ratio,
        ..Flsa2dConfig::default()
    };
    if let Some(tol) = args.common.tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(CliError::input(format!("--tol must be >= 0, got {tol}")));
        }
        config.tol = tol;
    }
    let (l1, l2, selected_by) = if args.two_fold {
        let sd = std_dev(grid.values()).max(f64::MIN_POSITIVE);
        let l1s = if args.pure_fusion {
            vec![0.0]
        } else {
            args.lambda1_grid
                .clone()
                .unwrap_or_else(|| LAMBDA1_UNITS.iter().map(|u| u * sd).collect())
        };
        let l2s = args
            .lambda2_grid
            .clone()
            .unwrap_or_else(|| LAMBDA2_UNITS.iter().map(|u| u * sd).collect());
        let v = two_fold_validate(&grid, &l1s, &l2s, &config)?;
        (v.best_lambda1, v.best_lambda2, "two-fold")
    } else {
        let l1 = if args.pure_fusion { 0.0 } else { args.lambda1 };
        (l1, args.lambda2, "flags")
    };
    let solution = solve(&grid, l1, l2, args.common.delta, &config)?;
    let (out_img, out_meta) = io::quantize(&solution.beta, img.height, img.width, img.maxval, img.format, Some(&meta));
    out_img.write(output)?;
    io::write_json(&io::sidecar_path(output), &out_meta)?;
    let part = &solution.partition;
    let groups = part.group_ids().iter().enumerate().map(|(k, &id)| {
        let g = part.group(id);
        GroupRecord {
            group: k,
            value: g.gamma,
            size: g.size(),
            pixels: g.members.iter().map(|&p| [p / img.width, p % img.width]).collect(),
        }
    });
    io::write_jsonl(&io::partition_path(output), groups)?;
    let report = Report {
        lambda1: solution.lambda1,
        lambda2: solution.lambda2,
        lambda3: solution.lambda3,
        selected_by,
        groups: part.len(),
        objective: solution.objective(&grid),
    };
    println!("{}", serde_json::to_string(&report).expect("plain data serializes"));
    Ok(())
}
