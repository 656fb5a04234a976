//! `fit` and `validate`: penalized regression on CSV data with a JSONL path
//! file, one certified record per grid point.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pathwise::fused_general::{fused_cd_solve, GeneralFusedProblem};
use pathwise::flsa1d::PathSchedule;
use pathwise::lasso_family::{
    fit_path, least_squares, log_grid, orthonormalize_groups, CdOptions, Penalty, SeparableProblem,
};
use pathwise::numeric::{standardize, DesignMatrix, ResponseVector};
use pathwise::oracle::{kkt_check_chain_gradient, kkt_check_regression, KKT_TOL};
use serde::{Deserialize, Serialize};

use super::Common;
use crate::error::{exit, CliError, CliResult};
use crate::io;

/// Default coordinate-descent tolerance for the command line.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lasso,
    Enet,
    Garotte,
    Lad,
    Ladlasso,
    Grouplasso,
    Berhu,
    Fused,
}

impl Method {
    fn uses_intercept(self) -> bool {
        matches!(self, Method::Lad | Method::Ladlasso)
    }
}

/// Input data shared by `fit` and `validate`.
#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Predictor matrix, one observation per line.
    #[arg(long)]
    pub x: PathBuf,
    /// Response, one value per line.
    #[arg(long)]
    pub y: PathBuf,
    /// Both CSV files start with a header line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Single penalty value; otherwise a log-spaced grid from lambda_max.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Lasso penalty for enet and fused (the path parameter for enet).
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Ridge penalty for enet, fusion penalty for fused.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Grid length when no single penalty is given.
    #[arg(long, default_value_t = 20)]
    pub nlambda: usize,
    /// Smallest grid value as a fraction of lambda_max.
    #[arg(long, default_value_t = 0.01)]
    pub lambda_min_ratio: f64,
    /// Berhu threshold between the absolute and quadratic parts.
    #[arg(long, default_value_t = 1.0)]
    pub berhu_delta: f64,
    /// Groups as comma-separated 0-based columns, separated by ';'.
    #[arg(long)]
    pub groups: Option<String>,
    /// Consecutive groups of this size when --groups is absent.
    #[arg(long, default_value_t = 2)]
    pub group_size: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Path file written by `fit`.
    #[arg(long)]
    pub path: PathBuf,
    /// KKT tolerance relative to max(1, lambda_max).
    #[arg(long, default_value_t = KKT_TOL)]
    pub kkt_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

/// One grid point of a path file. Coefficients live on the standardized
/// (and, for grouped lasso, group-orthonormalized) design; `raw_*` give the
/// same fit on the original predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: usize,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub berhu_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub raw_intercept: Option<f64>,
    #[serde(default)]
    pub raw_coefficients: Option<Vec<f64>>,
    pub objective: f64,
    pub sweeps: usize,
    pub certified: bool,
    pub kkt_violation: f64,
}

struct Dataset {
    raw: DesignMatrix,
    x: DesignMatrix,
    y: Vec<f64>,
    mean_y: f64,
}

fn load(data: &DataArgs) -> CliResult<Dataset> {
    let rows = io::read_matrix(&data.x, data.header)?;
    let y = io::read_vector(&data.y, data.header)?;
    let raw = DesignMatrix::from_rows(&rows).map_err(|e| CliError::input(format!("{}: {e}", data.x.display())))?;
    if y.len() != raw.n() {
        return Err(CliError::input(format!(
            "{} has {} values but {} has {} rows",
            data.y.display(),
            y.len(),
            data.x.display(),
            raw.n()
        )));
    }
    let x = standardize(&raw).map_err(|e| CliError::input(format!("{}: {e}", data.x.display())))?;
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    Ok(Dataset { raw, x, y, mean_y })
}

fn parse_groups(spec: Option<&str>, size: usize, p: usize) -> CliResult<Vec<Vec<usize>>> {
    match spec {
        Some(s) => s
            .split(';')
            .map(|g| {
                g.split(',')
                    .map(|c| c.trim().parse::<usize>().map_err(|_| CliError::input(format!("bad group column {c:?}"))))
                    .collect()
            })
            .collect(),
        None if size == 0 => Err(CliError::input("group size must be positive")),
        None => Ok((0..p).collect::<Vec<_>>().chunks(size).map(<[usize]>::to_vec).collect()),
    }
}

/// Penalty of a separable record at its primary value.
fn penalty_of(r: &PathRecord) -> CliResult<Penalty> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::input(format!("record lacks {name}")));
    Ok(match r.method {
        Method::Lasso => Penalty::Lasso { lambda: need(r.lambda, "lambda")? },
        Method::Enet => Penalty::ElasticNet {
            lambda1: need(r.lambda1, "lambda1")?,
            lambda2: need(r.lambda2, "lambda2")?,
        },
        Method::Garotte => Penalty::Garotte { lambda: need(r.lambda, "lambda")? },
        Method::Lad | Method::Ladlasso => Penalty::Lad { lambda: need(r.lambda, "lambda")? },
        Method::Berhu => Penalty::Berhu {
            lambda: need(r.lambda, "lambda")?,
            delta: need(r.berhu_delta, "berhu_delta")?,
        },
        Method::Grouplasso => Penalty::GroupedLasso {
            lambda: need(r.lambda, "lambda")?,
            groups: r.groups.clone().ok_or_else(|| CliError::input("record lacks groups"))?,
        },
        Method::Fused => return Err(CliError::input("fused records have no separable penalty")),
    })
}

/// The design the coefficients refer to.
fn model_design(data: &Dataset, method: Method, groups: Option<&[Vec<usize>]>) -> CliResult<DesignMatrix> {
    match (method, groups) {
        (Method::Grouplasso, Some(g)) => Ok(orthonormalize_groups(&data.x, g)?),
        (Method::Grouplasso, None) => Err(CliError::input("grouped lasso needs groups")),
        _ => Ok(data.x.clone()),
    }
}

fn model_response(data: &Dataset, method: Method) -> CliResult<ResponseVector> {
    let y = if method.uses_intercept() {
        data.y.clone()
    } else {
        data.y.iter().map(|v| v - data.mean_y).collect()
    };
    Ok(ResponseVector::new(y)?)
}

/// Fitted values on the original predictors.
fn raw_fit(data: &Dataset, design: &DesignMatrix, method: Method, beta: &[f64], intercept: f64) -> (Option<f64>, Option<Vec<f64>>) {
    let std_beta = if method == Method::Grouplasso {
        match least_squares(&data.x, &design.multiply(beta)) {
            Ok(b) => b,
            Err(_) => return (None, None),
        }
    } else {
        beta.to_vec()
    };
    let (shift, raw) = data.x.to_raw_coefficients(&std_beta);
    debug_assert_eq!(raw.len(), data.raw.p());
    (Some(intercept - shift), Some(raw))
}

struct Check {
    feasible: bool,
    violation: f64,
}

/// Re-derives a record's optimality conditions from the data.
fn certify(data: &Dataset, record: &PathRecord, rel_tol: f64) -> CliResult<Check> {
    let p = data.x.p();
    if record.coefficients.len() != p {
        return Err(CliError::input(format!(
            "record has {} coefficients, data has {p} predictors",
            record.coefficients.len()
        )));
    }
    if record.coefficients.iter().any(|v| !v.is_finite()) || !record.intercept.is_finite() {
        return Err(CliError::input("record has non-finite values"));
    }
    let y = model_response(data, record.method)?;
    if record.method == Method::Fused {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::input(format!("record lacks {name}")));
        let (l1, l2) = (need(record.lambda1, "lambda1")?, need(record.lambda2, "lambda2")?);
        let dot = |c: &[f64], v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let r = data.x.residual(&y, &record.coefficients);
        let grad: Vec<f64> = data.x.columns().map(|c| -dot(c, &r)).collect();
        let scale = data.x.columns().fold(1.0f64, |m, c| m.max(dot(c, &y).abs()));
        let cert = kkt_check_chain_gradient(&grad, &record.coefficients, l1, l2, rel_tol * scale);
        return Ok(intercept_check(data, record, cert.feasible(), cert.max_violation));
    }
    let design = model_design(data, record.method, record.groups.as_deref())?;
    let problem = SeparableProblem::new(design, y, penalty_of(record)?)?;
    let scale = problem.with_primary(0.0)?.lambda_max().max(1.0);
    let intercept = if record.method.uses_intercept() { record.intercept } else { 0.0 };
    let cert = kkt_check_regression(&problem, &record.coefficients, intercept, rel_tol * scale);
    Ok(intercept_check(data, record, cert.feasible, cert.max_violation))
}

/// Squared-error fits on centered data have intercept `mean(y)`.
fn intercept_check(data: &Dataset, record: &PathRecord, feasible: bool, violation: f64) -> Check {
    if record.method.uses_intercept() {
        return Check { feasible, violation };
    }
    let off = (record.intercept - data.mean_y).abs();
    let ok = off <= 1e-9 * (1.0 + data.mean_y.abs());
    Check {
        feasible: feasible && ok,
        violation: if ok { violation } else { violation.max(off) },
    }
}

fn positive_tol(common: &Common) -> CliResult<f64> {
    let tol = common.tol.unwrap_or(DEFAULT_TOL);
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(CliError::input(format!("--tol must be positive, got {tol}")))
    }
}

fn finite_nonneg(v: f64, name: &str) -> CliResult<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::input(format!("--{name} must be finite and >= 0, got {v}")))
    }
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let output = args
        .common
        .output
        .as_deref()
        .ok_or_else(|| CliError::input("fit needs --output"))?;
    let tol = positive_tol(&args.common)?;
    let data = load(&args.data)?;
    let records = if args.method == Method::Fused {
        fit_fused(args, &data, tol)?
    } else {
        fit_separable(args, &data, tol)?
    };
    let uncertified = records.iter().filter(|r| !r.certified).count();
    if uncertified > 0 {
        log::warn!("{uncertified} of {} records fail the optimality check", records.len());
    }
    io::write_jsonl(output, &records)?;
    println!(
        "{} records written to {} ({} certified)",
        records.len(),
        output.display(),
        records.len() - uncertified
    );
    Ok(())
}

fn fit_separable(args: &FitArgs, data: &Dataset, tol: f64) -> CliResult<Vec<PathRecord>> {
    let p = data.x.p();
    let groups = match args.method {
        Method::Grouplasso => Some(parse_groups(args.groups.as_deref(), args.group_size, p)?),
        _ => None,
    };
    let fixed = args.lambda.or(if args.method == Method::Enet { args.lambda1 } else { None });
    let fixed = fixed.map(|v| finite_nonneg(v, "lambda")).transpose()?;
    let lambda2 = finite_nonneg(args.lambda2.unwrap_or(0.0), "lambda2")?;
    let template = PathRecord {
        index: 0,
        method: args.method,
        lambda: None,
        lambda1: None,
        lambda2: None,
        berhu_delta: None,
        groups: groups.clone(),
        intercept: 0.0,
        coefficients: Vec::new(),
        raw_intercept: None,
        raw_coefficients: None,
        objective: 0.0,
        sweeps: 0,
        certified: false,
        kkt_violation: 0.0,
    };
    let penalty = match args.method {
        Method::Lasso => Penalty::Lasso { lambda: 0.0 },
        Method::Enet => Penalty::ElasticNet { lambda1: 0.0, lambda2 },
        Method::Garotte => Penalty::Garotte { lambda: 0.0 },
        Method::Lad | Method::Ladlasso => Penalty::Lad { lambda: 0.0 },
        Method::Berhu => Penalty::Berhu {
            lambda: 0.0,
            delta: args.berhu_delta,
        },
        Method::Grouplasso => Penalty::GroupedLasso {
            lambda: 0.0,
            groups: groups.clone().expect("set above"),
        },
        Method::Fused => unreachable!("handled by fit_fused"),
    };
    let design = model_design(data, args.method, groups.as_deref())?;
    let problem = SeparableProblem::new(design.clone(), model_response(data, args.method)?, penalty)?;
    let grid = match (args.method, fixed) {
        (Method::Lad, Some(l)) if l != 0.0 => return Err(CliError::input("lad has no penalty; use ladlasso")),
        (Method::Lad, _) => vec![0.0],
        (Method::Ladlasso, Some(l)) if l == 0.0 => return Err(CliError::input("ladlasso needs a positive penalty")),
        (_, Some(l)) => vec![l],
        (_, None) => {
            if args.nlambda == 0 || !(args.lambda_min_ratio > 0.0 && args.lambda_min_ratio < 1.0) {
                return Err(CliError::input("need --nlambda >= 1 and 0 < --lambda-min-ratio < 1"));
            }
            let max = problem.lambda_max();
            if max > 0.0 {
                log_grid(max, args.lambda_min_ratio, args.nlambda)
            } else {
                vec![0.0]
            }
        }
    };
    let path = fit_path(&problem, &grid, &CdOptions::with_tol(tol))?;
    let mut records = Vec::with_capacity(grid.len());
    for (k, (fit, &lambda)) in path.fits.iter().zip(&grid).enumerate() {
        let mut r = template.clone();
        r.index = k;
        match args.method {
            Method::Enet => {
                r.lambda1 = Some(lambda);
                r.lambda2 = Some(lambda2);
            }
            Method::Berhu => {
                r.lambda = Some(lambda);
                r.berhu_delta = Some(args.berhu_delta);
            }
            _ => r.lambda = Some(lambda),
        }
        let beta: Vec<f64> = if args.method == Method::Garotte {
            let ls = problem.ls_estimates().expect("garotte carries estimates");
            fit.coefficients.iter().zip(ls).map(|(c, b)| c * b).collect()
        } else {
            fit.coefficients.to_vec()
        };
        r.intercept = if args.method.uses_intercept() { fit.intercept } else { data.mean_y };
        r.coefficients = fit.coefficients.to_vec();
        (r.raw_intercept, r.raw_coefficients) = raw_fit(data, &design, args.method, &beta, r.intercept);
        r.objective = fit.objective;
        r.sweeps = fit.iterations;
        let check = certify(data, &r, KKT_TOL)?;
        r.certified = check.feasible;
        r.kkt_violation = check.violation;
        records.push(r);
    }
    Ok(records)
}

fn fit_fused(args: &FitArgs, data: &Dataset, tol: f64) -> CliResult<Vec<PathRecord>> {
    let l1 = finite_nonneg(args.lambda1.or(args.lambda).unwrap_or(0.0), "lambda1")?;
    let l2 = finite_nonneg(
        args.lambda2.ok_or_else(|| CliError::input("fused needs --lambda2"))?,
        "lambda2",
    )?;
    let schedule = match args.common.delta {
        Some(d) => PathSchedule::new(l1, l2, d)?,
        None => PathSchedule::with_default_delta(l1, l2)?,
    };
    let y = model_response(data, Method::Fused)?;
    let problem = GeneralFusedProblem::new(data.x.clone(), y, l1, l2)?;
    let path = fused_cd_solve(&problem, &schedule, tol)?;
    let mut records = Vec::with_capacity(path.fits.len());
    for (k, f) in path.fits.iter().enumerate() {
        let beta = f.fit.coefficients.to_vec();
        let (raw_intercept, raw_coefficients) = raw_fit(data, &data.x, Method::Fused, &beta, data.mean_y);
        let mut r = PathRecord {
            index: k,
            method: Method::Fused,
            lambda: None,
            lambda1: Some(l1),
            lambda2: Some(f.lambda2),
            berhu_delta: None,
            groups: None,
            intercept: data.mean_y,
            objective: f.fit.objective,
            coefficients: beta,
            raw_intercept,
            raw_coefficients,
            sweeps: f.fit.iterations,
            certified: false,
            kkt_violation: 0.0,
        };
        let check = certify(data, &r, KKT_TOL)?;
        r.certified = check.feasible;
        r.kkt_violation = check.violation;
        records.push(r);
    }
    Ok(records)
}

pub fn validate(args: &ValidateArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let records: Vec<(u64, PathRecord)> = io::read_jsonl(&args.path)?;
    if records.is_empty() {
        return Err(CliError::input(format!("{}: path file has no records", args.path.display())));
    }
    let mut report = Vec::with_capacity(records.len());
    let mut failure = None;
    for (line, record) in &records {
        let check = certify(&data, record, args.kkt_tol).map_err(|e| at(&args.path, *line, e))?;
        report.push(serde_json::json!({
            "line": line,
            "index": record.index,
            "certified": check.feasible,
            "kkt_violation": check.violation,
        }));
        if !check.feasible && failure.is_none() {
            failure = Some((*line, record.index, check.violation));
        }
    }
    if let Some(out) = args.common.output.as_deref() {
        io::write_jsonl(out, &report)?;
    }
    match failure {
        Some((line, index, violation)) => Err(CliError::certification(format!(
            "{}:{line}: record {index} fails the optimality check (violation {violation:e})",
            args.path.display()
        ))),
        None => {
            println!("{} records certified", records.len());
            Ok(())
        }
    }
}

fn at(path: &Path, line: u64, err: CliError) -> CliError {
    if err.code == exit::INPUT {
        CliError::at_line(path, line, err.message)
    } else {
        err
    }
}
