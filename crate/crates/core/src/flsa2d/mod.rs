//! Fused lasso signal approximation on pixel grids: squared error plus
//! `λ1 Σ|β_p|` and `λ2` (horizontal) / `λ3` (vertical) times the absolute
//! differences of 4-neighbours.
//!
//! Pixels are grouped; each group carries one value. Cycles of group
//! descent and provisional pairwise fusion run to a fixed point, then a
//! minimum-cut search over sets of equal-valued groups looks for a joint
//! move the pairwise steps cannot find. Between λ2 grid points, adjacent
//! groups with equal nonzero values are merged for good.

mod mincut;
mod partition;

#[cfg(test)]
mod tests;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flsa1d::PathSchedule;
use crate::numeric::CONVERGENCE_TOL;

pub use partition::{BoundaryCount, Group, GroupPartition2D};

/// Image of `n1` rows and `n2` columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl PixelGrid {
    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || values.len() != n1 * n2 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n1}x{n2} grid",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("pixel grid"));
        }
        Ok(PixelGrid { n1, n2, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n2 = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n2) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), n2, rows.concat())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n2 + c]
    }
}

/// Pixel-level criterion.
pub fn flsa2d_objective(grid: &PixelGrid, beta: &[f64], lambda1: f64, lambda2: f64, lambda3: f64) -> f64 {
    let (n1, n2) = (grid.n1, grid.n2);
    let mut f = 0.0;
    for r in 0..n1 {
        for c in 0..n2 {
            let p = r * n2 + c;
            let d = grid.values[p] - beta[p];
            f += 0.5 * d * d + lambda1 * beta[p].abs();
            if c + 1 < n2 {
                f += lambda2 * (beta[p] - beta[p + 1]).abs();
            }
            if r + 1 < n1 {
                f += lambda3 * (beta[p] - beta[p + n2]).abs();
            }
        }
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flsa2dConfig {
    pub tol: f64,
    /// Sweeps allowed per grid point.
    pub max_sweeps: usize,
    /// Provisional pairwise fusions in the cycle.
    pub fusion: bool,
    /// Minimum-cut moves once the cycle is quiet.
    pub block_moves: bool,
    /// Permanent merging between grid points.
    pub merge: bool,
    /// Pixel-level optimality check at each grid point, splitting merged
    /// groups that should separate.
    pub split_check: bool,
    /// `λ3 / λ2`; 1 for the isotropic penalty.
    pub vertical_ratio: f64,
}

impl Default for Flsa2dConfig {
    fn default() -> Self {
        Flsa2dConfig {
            tol: CONVERGENCE_TOL,
            max_sweeps: 10_000,
            fusion: true,
            block_moves: true,
            merge: true,
            split_check: true,
            vertical_ratio: 1.0,
        }
    }
}

impl Flsa2dConfig {
    pub fn with_tol(tol: f64) -> Self {
        Flsa2dConfig {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flsa2dSolution {
    /// Row-major pixel values.
    pub beta: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub partition: GroupPartition2D,
}

impl Flsa2dSolution {
    pub fn from_partition(partition: &GroupPartition2D) -> Self {
        let (n1, n2) = partition.dims();
        Flsa2dSolution {
            beta: partition.expand(),
            n1,
            n2,
            lambda1: partition.lambda1,
            lambda2: partition.lambda2,
            lambda3: partition.lambda3,
            partition: partition.clone(),
        }
    }

    pub fn objective(&self, grid: &PixelGrid) -> f64 {
        flsa2d_objective(grid, &self.beta, self.lambda1, self.lambda2, self.lambda3)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.beta[r * self.n2 + c]
    }
}

/// Cycles at the partition's penalties until a full pass changes nothing
/// beyond `tol` and no minimum-cut move applies.
fn solve_at(partition: &mut GroupPartition2D, config: &Flsa2dConfig) -> std::result::Result<usize, ()> {
    let mut sweeps = 0;
    let mut nbs = Vec::new();
    loop {
        if sweeps >= config.max_sweeps {
            return Err(());
        }
        sweeps += 1;
        let mut change: f64 = 0.0;
        let ids = partition.group_ids().to_vec();
        for k in ids {
            let old = partition.group(k).gamma;
            let new = partition.group_descent_step(k);
            let d = (new - old).abs();
            change = change.max(d);
            if d < config.tol && config.fusion && partition.lambda2 + partition.lambda3 > 0.0 {
                nbs.clear();
                nbs.extend(partition.neighbours(k).map(|(j, _)| j));
                for &j in &nbs {
                    let (a, b) = (partition.group(k).gamma, partition.group(j).gamma);
                    if let Ok(Some(g)) = partition.group_fusion_step(k, j) {
                        change = change.max((g - a).abs()).max((g - b).abs());
                        break;
                    }
                }
            }
        }
        if change < config.tol || change == 0.0 {
            if config.block_moves && partition.lambda2 + partition.lambda3 > 0.0 && partition.plateau_pass() {
                continue;
            }
            return Ok(sweeps);
        }
    }
}

/// Solves at each λ2 of the ascending `lambda2s`, handing the partition to
/// `visit`. Stops after the first grid point with a single group: that
/// solution holds for every larger λ2.
fn visit_grid(
    grid: &PixelGrid,
    lambda1: f64,
    lambda2s: &[f64],
    config: &Flsa2dConfig,
    mut visit: impl FnMut(usize, &GroupPartition2D),
) -> Result<()> {
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidParameter("lambda1 must be finite and >= 0".into()));
    }
    if !(config.vertical_ratio >= 0.0 && config.vertical_ratio.is_finite()) {
        return Err(Error::InvalidParameter("vertical ratio must be finite and >= 0".into()));
    }
    let mut partition = GroupPartition2D::singletons(grid, lambda1, 0.0, 0.0);
    partition.reset_to_means();
    for (k, &lambda2) in lambda2s.iter().enumerate() {
        partition.lambda2 = lambda2;
        partition.lambda3 = lambda2 * config.vertical_ratio;
        let mut rounds = 0;
        loop {
            solve_at(&mut partition, config).map_err(|_| Error::NotConverged {
                index: k,
                limit: config.max_sweeps,
            })?;
            rounds += 1;
            if !(config.split_check && lambda2 > 0.0 && rounds <= config.max_sweeps && partition.split_pass()) {
                break;
            }
        }
        if config.merge && lambda2 > 0.0 {
            partition.merge_equal();
        }
        visit(k, &partition);
        if partition.len() == 1 {
            break;
        }
    }
    Ok(())
}

/// Solves along `schedule`, handing each grid point's partition to `visit`.
/// Ends early once a single group remains.
pub fn flsa2d_visit_path(
    grid: &PixelGrid,
    schedule: &PathSchedule,
    config: &Flsa2dConfig,
    visit: impl FnMut(usize, &GroupPartition2D),
) -> Result<()> {
    visit_grid(grid, schedule.lambda1, &schedule.grid(), config, visit)
}

pub fn flsa2d_solve_path_with(
    grid: &PixelGrid,
    schedule: &PathSchedule,
    config: &Flsa2dConfig,
) -> Result<Vec<Flsa2dSolution>> {
    let mut out = Vec::new();
    flsa2d_visit_path(grid, schedule, config, |_, p| out.push(Flsa2dSolution::from_partition(p)))?;
    Ok(out)
}

/// One solution per grid point of `schedule` (fewer if a single group
/// remains before the end).
pub fn flsa2d_solve_path(grid: &PixelGrid, schedule: &PathSchedule, tol: f64) -> Result<Vec<Flsa2dSolution>> {
    flsa2d_solve_path_with(grid, schedule, &Flsa2dConfig::with_tol(tol))
}

/// Solution at `(λ1, λ2)`, reached along the default λ2 grid.
pub fn flsa2d_solve(grid: &PixelGrid, lambda1: f64, lambda2: f64, config: &Flsa2dConfig) -> Result<Flsa2dSolution> {
    let schedule = PathSchedule::with_default_delta(lambda1, lambda2)?;
    let mut last = None;
    flsa2d_visit_path(grid, &schedule, config, |_, p| last = Some(Flsa2dSolution::from_partition(p)))?;
    let mut s = last.expect("grid is never empty");
    // a single group is optimal for every larger λ2
    s.lambda2 = lambda2;
    s.lambda3 = lambda2 * config.vertical_ratio;
    s.partition.lambda2 = s.lambda2;
    s.partition.lambda3 = s.lambda3;
    Ok(s)
}

/// Solution at `(lambda1_new, λ2, λ3)` by soft-thresholding a solution at
/// `(λ1, λ2, λ3)` by `lambda1_new − λ1`.
pub fn soft_threshold_path_2d(solution: &Flsa2dSolution, lambda1_new: f64) -> Result<Flsa2dSolution> {
    if !(lambda1_new >= solution.lambda1) {
        return Err(Error::InvalidPath {
            current: solution.lambda1,
            new: lambda1_new,
        });
    }
    let mut partition = solution.partition.clone();
    partition.soft_threshold(lambda1_new - solution.lambda1);
    partition.lambda1 = lambda1_new;
    Ok(Flsa2dSolution::from_partition(&partition))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationResult {
    pub best_lambda1: f64,
    pub best_lambda2: f64,
    /// Mean squared test error, `errors[i][j]` for `lambda1_grid[i]` and
    /// `lambda2_grid[j]`.
    pub errors: Vec<Vec<f64>>,
}

/// Predicts every pixel off the training lattice (even row and column,
/// counting from 0) from the fitted training values: the mean of its
/// training neighbours in the same row or column, or of its diagonal
/// neighbours when it has none.
fn predict_from_lattice(fit: &[f64], m2: usize, n1: usize, n2: usize) -> Vec<(usize, f64)> {
    let at = |r: usize, c: usize| fit[(r / 2) * m2 + c / 2];
    let mut out = Vec::new();
    for r in 0..n1 {
        for c in 0..n2 {
            if r % 2 == 0 && c % 2 == 0 {
                continue;
            }
            let rows: Vec<usize> = if r % 2 == 0 {
                vec![r]
            } else {
                [r.checked_sub(1), (r + 1 < n1).then_some(r + 1)].into_iter().flatten().collect()
            };
            let cols: Vec<usize> = if c % 2 == 0 {
                vec![c]
            } else {
                [c.checked_sub(1), (c + 1 < n2).then_some(c + 1)].into_iter().flatten().collect()
            };
            let mut sum = 0.0;
            for &rr in &rows {
                for &cc in &cols {
                    sum += at(rr, cc);
                }
            }
            out.push((r * n2 + c, sum / (rows.len() * cols.len()) as f64));
        }
    }
    out
}

/// Two-fold validation: fit on the pixels with even row and column
/// (counting from 0) taken as a contiguous grid, score squared error on the
/// rest. Ties go to the largest λ2, then the largest λ1. Each λ1 runs its own
/// path over the λ2 values in parallel.
pub fn two_fold_validate(
    grid: &PixelGrid,
    lambda1_grid: &[f64],
    lambda2_grid: &[f64],
    config: &Flsa2dConfig,
) -> Result<ValidationResult> {
    let (n1, n2) = (grid.n1, grid.n2);
    if n1 < 3 || n2 < 3 {
        return Err(Error::GridTooSmall { n1, n2 });
    }
    if lambda1_grid.is_empty() || lambda2_grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    if lambda1_grid.iter().chain(lambda2_grid).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("penalties must be finite and >= 0".into()));
    }
    let (m1, m2) = (n1.div_ceil(2), n2.div_ceil(2));
    let train: Vec<f64> = (0..m1)
        .flat_map(|i| (0..m2).map(move |j| (i, j)))
        .map(|(i, j)| grid.get(2 * i, 2 * j))
        .collect();
    let train = PixelGrid::new(m1, m2, train)?;
    let mut order: Vec<usize> = (0..lambda2_grid.len()).collect();
    order.sort_by(|&a, &b| lambda2_grid[a].total_cmp(&lambda2_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&j| lambda2_grid[j]).collect();
    let score = |fit: &[f64]| {
        let preds = predict_from_lattice(fit, m2, n1, n2);
        preds.iter().map(|&(p, v)| (grid.values[p] - v).powi(2)).sum::<f64>() / preds.len() as f64
    };
    let errors: Vec<Vec<f64>> = lambda1_grid
        .par_iter()
        .map(|&lambda1| -> Result<Vec<f64>> {
            let mut row = vec![f64::NAN; lambda2_grid.len()];
            let mut last = None;
            let mut filled = 0;
            visit_grid(&train, lambda1, &sorted, config, |k, p| {
                let fit = p.expand();
                row[order[k]] = score(&fit);
                filled = k + 1;
                last = Some(row[order[k]]);
            })?;
            let tail = last.expect("grid is never empty");
            for &j in &order[filled..] {
                row[j] = tail;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let min = errors.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * (1.0 + min.abs());
    let mut best = (0, 0);
    let mut found = false;
    for (i, row) in errors.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            if e > min + tie {
                continue;
            }
            let better = !found
                || lambda2_grid[j] > lambda2_grid[best.1]
                || (lambda2_grid[j] == lambda2_grid[best.1] && lambda1_grid[i] > lambda1_grid[best.0]);
            if better {
                best = (i, j);
                found = true;
            }
        }
    }
    Ok(ValidationResult {
        best_lambda1: lambda1_grid[best.0],
        best_lambda2: lambda2_grid[best.1],
        errors,
    })
}
