//! Coordinate descent for squared-error and absolute-error regression with
//! separable penalties: lasso, elastic net, nonnegative garotte, Berhu,
//! grouped lasso, LAD and LAD-lasso.
//!
//! Every solver cycles through the coordinates `j = 1, …, p` in order and
//! replaces `β_j` by the exact minimizer of the criterion with all other
//! coordinates held fixed. A fit stops when the largest coefficient change
//! over one full sweep drops below `tol`. Paths are fitted over a
//! decreasing penalty grid, each fit warm-started from the previous one.

mod lad;
mod squared;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{dot, CoefficientVector, DesignMatrix, ResponseVector};

pub use lad::LadOptions;

/// Sweep cap for a single fit.
pub const MAX_SWEEPS: usize = 100_000;

/// Penalty and its Lagrange parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    /// `λ Σ|β_j|`.
    Lasso { lambda: f64 },
    /// `λ1 Σ|β_j| + λ2 Σβ_j²/2`.
    ElasticNet { lambda1: f64, lambda2: f64 },
    /// `λ Σ c_j` with `c ≥ 0` scaling the least-squares coefficients.
    Garotte { lambda: f64 },
    /// Reverse-Huber penalty: `|β|` below `delta`, `(β² + δ²)/(2δ)` above.
    Berhu { lambda: f64, delta: f64 },
    /// Absolute-error loss with an unpenalized intercept; `lambda = 0` is
    /// plain LAD regression.
    Lad { lambda: f64 },
    /// `Σ_g λ√p_g ‖β_g‖₂` over a partition of the columns into groups.
    GroupedLasso { lambda: f64, groups: Vec<Vec<usize>> },
}

impl Penalty {
    /// The parameter varied along a path.
    pub fn primary(&self) -> f64 {
        match *self {
            Penalty::Lasso { lambda }
            | Penalty::Garotte { lambda }
            | Penalty::Berhu { lambda, .. }
            | Penalty::Lad { lambda }
            | Penalty::GroupedLasso { lambda, .. } => lambda,
            Penalty::ElasticNet { lambda1, .. } => lambda1,
        }
    }

    pub fn with_primary(&self, value: f64) -> Penalty {
        let mut p = self.clone();
        match &mut p {
            Penalty::Lasso { lambda }
            | Penalty::Garotte { lambda }
            | Penalty::Berhu { lambda, .. }
            | Penalty::Lad { lambda }
            | Penalty::GroupedLasso { lambda, .. } => *lambda = value,
            Penalty::ElasticNet { lambda1, .. } => *lambda1 = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            Penalty::Lasso { .. } => "lasso",
            Penalty::ElasticNet { .. } => "enet",
            Penalty::Garotte { .. } => "garotte",
            Penalty::Berhu { .. } => "berhu",
            Penalty::Lad { lambda } if *lambda == 0.0 => "lad",
            Penalty::Lad { .. } => "ladlasso",
            Penalty::GroupedLasso { .. } => "grouplasso",
        }
    }
}

/// Regression problem with a separable penalty.
#[derive(Debug, Clone)]
pub struct SeparableProblem {
    x: DesignMatrix,
    y: ResponseVector,
    penalty: Penalty,
    ls_estimates: Option<Vec<f64>>,
}

impl SeparableProblem {
    pub fn new(x: DesignMatrix, y: ResponseVector, penalty: Penalty) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                x.n()
            )));
        }
        validate_penalty(&penalty, &x)?;
        let ls_estimates = match penalty {
            Penalty::Garotte { .. } => Some(least_squares(&x, &y)?),
            _ => None,
        };
        Ok(SeparableProblem {
            x,
            y,
            penalty,
            ls_estimates,
        })
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    /// Full least-squares coefficients (garotte only).
    pub fn ls_estimates(&self) -> Option<&[f64]> {
        self.ls_estimates.as_deref()
    }

    /// Same data, different primary penalty value.
    pub fn with_primary(&self, value: f64) -> Result<Self> {
        let penalty = self.penalty.with_primary(value);
        validate_penalty(&penalty, &self.x)?;
        Ok(SeparableProblem {
            penalty,
            ..self.clone()
        })
    }

    /// The criterion at `coef` (and `intercept`, used by LAD only).
    pub fn objective(&self, coef: &[f64], intercept: f64) -> f64 {
        objective(&self.x, &self.y, &self.penalty, self.ls_estimates.as_deref(), coef, intercept)
    }

    /// Smallest primary parameter at which the zero vector is optimal
    /// (for LAD-lasso an upper bound).
    pub fn lambda_max(&self) -> f64 {
        let xty: Vec<f64> = self.x.columns().map(|c| dot(c, &self.y)).collect();
        match &self.penalty {
            Penalty::Lasso { .. } | Penalty::ElasticNet { .. } | Penalty::Berhu { .. } => {
                xty.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            Penalty::Garotte { .. } => {
                let ls = self.ls_estimates.as_ref().expect("garotte carries estimates");
                xty.iter().zip(ls).fold(0.0, |m, (g, b)| m.max(g * b))
            }
            Penalty::GroupedLasso { groups, .. } => groups.iter().fold(0.0, |m, g| {
                let norm = g.iter().map(|&j| xty[j] * xty[j]).sum::<f64>().sqrt();
                m.max(norm / (g.len() as f64).sqrt())
            }),
            Penalty::Lad { .. } => self
                .x
                .columns()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }
}

fn validate_penalty(penalty: &Penalty, x: &DesignMatrix) -> Result<()> {
    let nonneg = |name: &str, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
        }
    };
    match penalty {
        Penalty::Lasso { lambda } | Penalty::Garotte { lambda } | Penalty::Lad { lambda } => {
            nonneg("lambda", *lambda)?
        }
        Penalty::ElasticNet { lambda1, lambda2 } => {
            nonneg("lambda1", *lambda1)?;
            nonneg("lambda2", *lambda2)?;
        }
        Penalty::Berhu { lambda, delta } => {
            nonneg("lambda", *lambda)?;
            if !(*delta > 0.0) {
                return Err(Error::InvalidParameter(format!("berhu delta must be > 0, got {delta}")));
            }
        }
        Penalty::GroupedLasso { lambda, groups } => {
            nonneg("lambda", *lambda)?;
            let mut seen = vec![false; x.p()];
            for g in groups {
                if g.is_empty() {
                    return Err(Error::InvalidParameter("empty group".into()));
                }
                for &j in g {
                    if j >= x.p() || seen[j] {
                        return Err(Error::InvalidParameter(format!(
                            "groups must partition the {} columns (column {j})",
                            x.p()
                        )));
                    }
                    seen[j] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidParameter("groups do not cover every column".into()));
            }
        }
    }
    Ok(())
}

fn berhu(b: f64, delta: f64) -> f64 {
    let a = b.abs();
    if a < delta {
        a
    } else {
        (b * b + delta * delta) / (2.0 * delta)
    }
}

pub(crate) fn objective(
    x: &DesignMatrix,
    y: &[f64],
    penalty: &Penalty,
    ls: Option<&[f64]>,
    coef: &[f64],
    intercept: f64,
) -> f64 {
    let half_rss = |beta: &[f64]| 0.5 * x.residual(y, beta).iter().map(|r| r * r).sum::<f64>();
    let l1: f64 = coef.iter().map(|b| b.abs()).sum();
    match penalty {
        Penalty::Lasso { lambda } => half_rss(coef) + lambda * l1,
        Penalty::ElasticNet { lambda1, lambda2 } => {
            half_rss(coef) + lambda1 * l1 + 0.5 * lambda2 * coef.iter().map(|b| b * b).sum::<f64>()
        }
        Penalty::Garotte { lambda } => {
            let ls = ls.expect("garotte needs least-squares estimates");
            let beta: Vec<f64> = coef.iter().zip(ls).map(|(c, b)| c * b).collect();
            half_rss(&beta) + lambda * coef.iter().sum::<f64>()
        }
        Penalty::Berhu { lambda, delta } => {
            half_rss(coef) + lambda * coef.iter().map(|&b| berhu(b, *delta)).sum::<f64>()
        }
        Penalty::GroupedLasso { lambda, groups } => {
            half_rss(coef)
                + groups
                    .iter()
                    .map(|g| {
                        let norm = g.iter().map(|&j| coef[j] * coef[j]).sum::<f64>().sqrt();
                        lambda * (g.len() as f64).sqrt() * norm
                    })
                    .sum::<f64>()
        }
        Penalty::Lad { lambda } => {
            let r = x.residual(y, coef);
            r.iter().map(|v| (v - intercept).abs()).sum::<f64>() + lambda * l1
        }
    }
}

/// Ordinary least squares via the normal equations.
pub fn least_squares(x: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = (x.n(), x.p());
    if p > n {
        return Err(Error::RankDeficient);
    }
    let gram = DMatrix::from_fn(p, p, |j, k| dot(x.column(j), x.column(k)));
    let rhs = DVector::from_iterator(p, x.columns().map(|c| dot(c, y)));
    let scale = (0..p).map(|j| gram[(j, j)]).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let l = chol.l();
    let min_pivot = (0..p).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-12 * scale {
        return Err(Error::RankDeficient);
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Penalized coefficients; for the garotte these are the scalings `c_j`.
    pub coefficients: CoefficientVector,
    /// Unpenalized intercept (LAD variants; zero otherwise).
    pub intercept: f64,
    /// Full coordinate sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective after every sweep, when requested through [`CdOptions`].
    pub objective_trace: Vec<f64>,
}

/// Solver controls.
#[derive(Debug, Clone, PartialEq)]
pub struct CdOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub record_objective: bool,
    pub lad: LadOptions,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: crate::numeric::CONVERGENCE_TOL,
            max_sweeps: MAX_SWEEPS,
            record_objective: false,
            lad: LadOptions::default(),
        }
    }
}

impl CdOptions {
    pub fn with_tol(tol: f64) -> Self {
        CdOptions {
            tol,
            ..Default::default()
        }
    }
}

fn starting_point(problem: &SeparableProblem, init: Option<&[f64]>) -> Result<Vec<f64>> {
    let p = problem.x.p();
    match init {
        None => Ok(vec![0.0; p]),
        Some(b) if b.len() == p => Ok(b.to_vec()),
        Some(b) => Err(Error::DimensionMismatch(format!(
            "initial coefficients have length {}, expected {p}",
            b.len()
        ))),
    }
}

/// Runs the solver matching the problem's penalty.
pub fn solve(problem: &SeparableProblem, init: Option<&[f64]>, opts: &CdOptions) -> Result<FitResult> {
    solve_from(problem, init, 0.0, opts)
}

fn solve_from(
    problem: &SeparableProblem,
    init: Option<&[f64]>,
    intercept: f64,
    opts: &CdOptions,
) -> Result<FitResult> {
    let beta = starting_point(problem, init)?;
    if !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::NonFinite("initial coefficients"));
    }
    let x = &problem.x;
    let y: &[f64] = &problem.y;
    match &problem.penalty {
        Penalty::Lasso { lambda } => {
            x.check_standardized()?;
            if *lambda == 0.0 && x.p() > x.n() {
                return Err(Error::InvalidParameter(
                    "lambda = 0 with p > n has no unique solution".into(),
                ));
            }
            let lambdas = vec![*lambda; x.p()];
            let fit = squared::run(x, y, &squared::Rule::Lasso { lambdas: &lambdas }, beta, opts, |b| {
                problem.objective(b, 0.0)
            });
            Ok(fit)
        }
        Penalty::ElasticNet { lambda1, lambda2 } => {
            x.check_standardized()?;
            if *lambda1 == 0.0 && *lambda2 == 0.0 && x.p() > x.n() {
                return Err(Error::InvalidParameter(
                    "unpenalized fit with p > n has no unique solution".into(),
                ));
            }
            let rule = squared::Rule::ElasticNet {
                lambda1: *lambda1,
                lambda2: *lambda2,
            };
            Ok(squared::run(x, y, &rule, beta, opts, |b| problem.objective(b, 0.0)))
        }
        Penalty::Berhu { lambda, delta } => {
            x.check_standardized()?;
            let rule = squared::Rule::Berhu {
                lambda: *lambda,
                delta: *delta,
            };
            Ok(squared::run(x, y, &rule, beta, opts, |b| problem.objective(b, 0.0)))
        }
        Penalty::Garotte { lambda } => {
            x.check_standardized()?;
            if beta.iter().any(|&c| c < 0.0) {
                return Err(Error::InvalidParameter("garotte scalings must start >= 0".into()));
            }
            let ls = problem.ls_estimates.as_ref().expect("garotte carries estimates");
            // work in c-space on the columns x_j·β̂_j
            let scaled = DesignMatrix::from_columns(
                x.columns()
                    .zip(ls)
                    .map(|(c, b)| c.iter().map(|v| v * b).collect())
                    .collect(),
            )?;
            let rule = squared::Rule::NonNegative { lambda: *lambda };
            Ok(squared::run(&scaled, y, &rule, beta, opts, |c| problem.objective(c, 0.0)))
        }
        Penalty::GroupedLasso { lambda, groups } => {
            check_orthonormal_groups(x, groups)?;
            let rule = squared::Rule::Group {
                groups,
                lambdas: groups.iter().map(|g| lambda * (g.len() as f64).sqrt()).collect(),
            };
            Ok(squared::run(x, y, &rule, beta, opts, |b| problem.objective(b, 0.0)))
        }
        Penalty::Lad { lambda } => {
            if let Some(j) = (0..x.p()).find(|&j| x.column(j).iter().all(|&v| v == 0.0)) {
                return Err(Error::DegenerateColumn(j));
            }
            lad::run(x, y, *lambda, beta, intercept, opts)
        }
    }
}

/// Replaces the columns of each group by an orthonormal basis of their span
/// (thin QR, in column order). Centered columns stay centered.
pub fn orthonormalize_groups(x: &DesignMatrix, groups: &[Vec<usize>]) -> Result<DesignMatrix> {
    let n = x.n();
    let mut columns: Vec<Vec<f64>> = x.columns().map(<[f64]>::to_vec).collect();
    for g in groups {
        if g.iter().any(|&j| j >= columns.len()) {
            return Err(Error::InvalidParameter("group column out of range".into()));
        }
        if g.len() > n {
            return Err(Error::RankDeficient);
        }
        let a = nalgebra::DMatrix::from_fn(n, g.len(), |i, k| x.get(i, g[k]));
        let qr = a.qr();
        let r = qr.r();
        let scale = (0..g.len()).map(|k| x.column_sq_norm(g[k]).sqrt()).fold(0.0f64, f64::max).max(1.0);
        if (0..g.len()).any(|k| r[(k, k)].abs() <= 1e-10 * scale) {
            return Err(Error::RankDeficient);
        }
        let q = qr.q();
        for (k, &j) in g.iter().enumerate() {
            // fix the sign so each new column correlates positively with the old one
            let sign = if r[(k, k)] < 0.0 { -1.0 } else { 1.0 };
            columns[j] = (0..n).map(|i| sign * q[(i, k)]).collect();
        }
    }
    DesignMatrix::from_columns(columns)
}

fn check_orthonormal_groups(x: &DesignMatrix, groups: &[Vec<usize>]) -> Result<()> {
    for (gi, g) in groups.iter().enumerate() {
        for (a, &j) in g.iter().enumerate() {
            for &k in &g[a..] {
                let target = if j == k { 1.0 } else { 0.0 };
                if (dot(x.column(j), x.column(k)) - target).abs() > 1e-8 {
                    return Err(Error::NonOrthonormalGroup(gi));
                }
            }
        }
    }
    Ok(())
}

fn expect_penalty(problem: &SeparableProblem, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} solver called on a {} problem",
            problem.penalty.name()
        )))
    }
}

pub fn lasso_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::Lasso { .. }), "lasso")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

pub fn elastic_net_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::ElasticNet { .. }), "elastic net")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

pub fn garotte_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::Garotte { .. }), "garotte")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

pub fn berhu_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::Berhu { .. }), "berhu")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

pub fn grouped_lasso_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::GroupedLasso { .. }), "grouped lasso")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

/// Plain LAD regression (`lambda = 0`).
pub fn lad_cd(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::Lad { lambda } if lambda == 0.0), "LAD")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

/// LAD-lasso (`lambda > 0`), solved as LAD on the dataset augmented with
/// `p` pseudo-observations `(0, λ·e_j)`.
pub fn lad_lasso(problem: &SeparableProblem, init: Option<&[f64]>, tol: f64) -> Result<FitResult> {
    expect_penalty(problem, matches!(problem.penalty, Penalty::Lad { lambda } if lambda > 0.0), "LAD-lasso")?;
    solve(problem, init, &CdOptions::with_tol(tol))
}

/// Lasso with per-coordinate penalties `lambdas[j] ≥ 0` on an arbitrary
/// (not necessarily standardized) design. Zero-norm columns are held at 0.
pub fn weighted_lasso_cd(
    x: &DesignMatrix,
    y: &[f64],
    lambdas: &[f64],
    init: Option<&[f64]>,
    opts: &CdOptions,
) -> Result<FitResult> {
    if lambdas.len() != x.p() || y.len() != x.n() {
        return Err(Error::DimensionMismatch("weighted lasso inputs".into()));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidParameter("penalties must be >= 0".into()));
    }
    let beta = init.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; x.p()]);
    let objective = |b: &[f64]| {
        0.5 * x.residual(y, b).iter().map(|r| r * r).sum::<f64>()
            + b.iter().zip(lambdas).map(|(b, l)| l * b.abs()).sum::<f64>()
    };
    Ok(squared::run(x, y, &squared::Rule::Lasso { lambdas }, beta, opts, objective))
}

/// Fits along a regularization path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub grid: Vec<f64>,
    pub fits: Vec<FitResult>,
}

impl PathResult {
    pub fn total_sweeps(&self) -> usize {
        self.fits.iter().map(|f| f.iterations).sum()
    }
}

/// Fits `problem` at every value of the strictly decreasing `grid` of the
/// primary penalty parameter, warm-starting each fit from the previous one.
pub fn fit_path(problem: &SeparableProblem, grid: &[f64], opts: &CdOptions) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty penalty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("penalty grid must be strictly decreasing".into()));
    }
    let mut fits: Vec<FitResult> = Vec::with_capacity(grid.len());
    for (k, &lambda) in grid.iter().enumerate() {
        let prob = problem.with_primary(lambda).map_err(|e| e.at_grid_point(k))?;
        let (init, intercept) = match fits.last() {
            Some(prev) => (Some(&prev.coefficients[..]), prev.intercept),
            None => (None, 0.0),
        };
        let fit = solve_from(&prob, init, intercept, opts).map_err(|e| e.at_grid_point(k))?;
        if !fit.converged {
            return Err(Error::NotConverged {
                index: k,
                limit: opts.max_sweeps,
            });
        }
        fits.push(fit);
    }
    Ok(PathResult {
        grid: grid.to_vec(),
        fits,
    })
}

/// `count` values log-spaced from `lambda_max` down to `ratio·lambda_max`.
pub fn log_grid(lambda_max: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (count - 1) as f64;
    (0..count).map(|k| lambda_max * (step * k as f64).exp()).collect()
}

#[cfg(test)]
mod tests;
