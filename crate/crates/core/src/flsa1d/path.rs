use std::ops::Range;

use crate::error::{Error, Result};
use crate::numeric::{soft_threshold, CONVERGENCE_TOL};

use super::state::FusionState1D;

/// Uniform λ2 grid `0, δ, 2δ, …, lambda2_target` at fixed λ1. The last step
/// is shortened so the grid ends exactly at the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSchedule {
    pub delta: f64,
    pub lambda2_target: f64,
    pub lambda1: f64,
}

impl PathSchedule {
    pub fn new(lambda1: f64, lambda2_target: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if !(lambda1 >= 0.0 && lambda1.is_finite() && lambda2_target >= 0.0 && lambda2_target.is_finite()) {
            return Err(Error::InvalidParameter("penalties must be finite and >= 0".into()));
        }
        Ok(PathSchedule {
            delta,
            lambda2_target,
            lambda1,
        })
    }

    /// Grid with the default increment `lambda2_target / 1000`.
    pub fn with_default_delta(lambda1: f64, lambda2_target: f64) -> Result<Self> {
        let delta = if lambda2_target > 0.0 {
            lambda2_target / 1000.0
        } else {
            1.0
        };
        Self::new(lambda1, lambda2_target, delta)
    }

    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.lambda2_target / self.delta - 1e-9).ceil().max(0.0) as usize;
        let mut grid: Vec<f64> = (0..=steps).map(|k| (k as f64 * self.delta).min(self.lambda2_target)).collect();
        if let Some(last) = grid.last_mut() {
            *last = self.lambda2_target;
        }
        grid
    }
}

/// Solver switches and limits.
#[derive(Debug, Clone, PartialEq)]
pub struct FlsaConfig {
    pub tol: f64,
    /// Descent sweeps allowed per grid point.
    pub max_sweeps: usize,
    /// Pairwise fusion moves in the cycle.
    pub fusion: bool,
    /// Sub-run moves inside plateaus once the cycle is quiet.
    pub block_moves: bool,
    /// Permanent merging of equal nonzero neighbours between grid points.
    pub collapse: bool,
    /// Record the original-data objective after every sweep and collapse.
    pub record_objective: bool,
}

impl Default for FlsaConfig {
    fn default() -> Self {
        FlsaConfig {
            tol: CONVERGENCE_TOL,
            max_sweeps: 10_000,
            fusion: true,
            block_moves: true,
            collapse: true,
            record_objective: false,
        }
    }
}

impl FlsaConfig {
    pub fn with_tol(tol: f64) -> Self {
        FlsaConfig {
            tol,
            ..Default::default()
        }
    }

    /// Plain cyclic coordinate descent with no joint moves.
    pub fn coordinate_descent_only(tol: f64) -> Self {
        FlsaConfig {
            tol,
            fusion: false,
            block_moves: false,
            collapse: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlsaSolution {
    pub beta: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Contiguous index ranges on which `beta` is constant (the units of the
    /// collapsed problem).
    pub fused_sets: Vec<Range<usize>>,
}

impl FlsaSolution {
    pub fn objective(&self, y: &[f64]) -> f64 {
        super::flsa_objective(y, &self.beta, self.lambda1, self.lambda2)
    }

    /// Number of distinct values along the chain.
    pub fn distinct_values(&self) -> usize {
        1 + self.beta.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// A permanent merge that joined more than two units in a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Diagnostic {
    pub grid_index: usize,
    pub lambda2: f64,
    pub units_merged: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlsaPath {
    pub solutions: Vec<FlsaSolution>,
    pub diagnostics: Vec<A1Diagnostic>,
    /// `(grid index, original-data objective)` when recording is enabled.
    pub trace: Vec<(usize, f64)>,
}

/// Runs descent/fusion cycles at the state's λ2 until a full pass changes
/// nothing beyond `tol` and no plateau sub-run can move.
fn solve_at(
    state: &FusionState1D,
    beta: &mut [f64],
    config: &FlsaConfig,
    mut record: impl FnMut(&[f64]),
) -> std::result::Result<usize, ()> {
    let n = state.len();
    let mut sweeps = 0;
    loop {
        if sweeps >= config.max_sweeps {
            return Err(());
        }
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..n {
            let old = beta[i];
            let new = state.descent_step(beta, i);
            let d = (new - old).abs();
            change = change.max(d);
            if d < config.tol && config.fusion && i > 0 {
                let (a, b) = (beta[i - 1], beta[i]);
                if state.fusion_step(beta, i) {
                    change = change.max((beta[i] - a).abs()).max((beta[i] - b).abs());
                }
            }
        }
        record(beta);
        if change < config.tol {
            if config.block_moves && state.plateau_pass(beta) {
                record(beta);
                continue;
            }
            return Ok(sweeps);
        }
    }
}

/// Solves along `schedule`, handing each solution to `visit` instead of
/// storing it. Returns the A1 diagnostics and the objective trace.
pub fn flsa_visit_path(
    y: &[f64],
    schedule: &PathSchedule,
    config: &FlsaConfig,
    mut visit: impl FnMut(usize, FlsaSolution),
) -> Result<(Vec<A1Diagnostic>, Vec<(usize, f64)>)> {
    let lambda1 = schedule.lambda1;
    let mut state = FusionState1D::new(y, lambda1, 0.0)?;
    let mut beta: Vec<f64> = y.iter().map(|&v| soft_threshold(v, lambda1)).collect();
    let mut diagnostics = Vec::new();
    let mut trace = Vec::new();
    for (k, &lambda2) in schedule.grid().iter().enumerate() {
        state.lambda2 = lambda2;
        if k > 0 {
            let mut rec = |b: &[f64]| {
                if config.record_objective {
                    trace.push((k, super::flsa_objective(y, &state.expand(b), lambda1, lambda2)));
                }
            };
            solve_at(&state, &mut beta, config, &mut rec).map_err(|_| Error::NotConverged {
                index: k,
                limit: config.max_sweeps,
            })?;
            if config.collapse && lambda2 > 0.0 {
                let (next, b, largest) = state.collapse(&beta);
                if largest > 2 && next.len() < state.len() {
                    log::debug!("{largest} units merged at lambda2 = {lambda2}");
                    diagnostics.push(A1Diagnostic {
                        grid_index: k,
                        lambda2,
                        units_merged: largest,
                    });
                }
                state = next;
                beta = b;
                if config.record_objective {
                    trace.push((k, super::flsa_objective(y, &state.expand(&beta), lambda1, lambda2)));
                }
            }
        } else if config.record_objective {
            trace.push((0, super::flsa_objective(y, &beta, lambda1, 0.0)));
        }
        visit(
            k,
            FlsaSolution {
                beta: state.expand(&beta),
                lambda1,
                lambda2,
                fused_sets: state.segments().to_vec(),
            },
        );
    }
    Ok((diagnostics, trace))
}

pub fn flsa_solve_path_with(y: &[f64], schedule: &PathSchedule, config: &FlsaConfig) -> Result<FlsaPath> {
    let mut solutions = Vec::new();
    let (diagnostics, trace) = flsa_visit_path(y, schedule, config, |_, s| solutions.push(s))?;
    Ok(FlsaPath {
        solutions,
        diagnostics,
        trace,
    })
}

/// One solution per grid point of `schedule`, with default settings and the
/// given convergence tolerance.
pub fn flsa_solve_path(y: &[f64], schedule: &PathSchedule, tol: f64) -> Result<FlsaPath> {
    flsa_solve_path_with(y, schedule, &FlsaConfig::with_tol(tol))
}

/// Solution at a single `(λ1, λ2)`, reached along the default λ2 grid.
pub fn flsa_solve(y: &[f64], lambda1: f64, lambda2: f64, config: &FlsaConfig) -> Result<FlsaSolution> {
    let schedule = PathSchedule::with_default_delta(lambda1, lambda2)?;
    let mut last = None;
    flsa_visit_path(y, &schedule, config, |_, s| last = Some(s))?;
    Ok(last.expect("grid is never empty"))
}

/// Solution at `(lambda1_new, λ2)` obtained by soft-thresholding a solution at
/// `(λ1, λ2)` by `lambda1_new − λ1`.
pub fn soft_threshold_path(solution: &FlsaSolution, lambda1_new: f64) -> Result<FlsaSolution> {
    if !(lambda1_new >= solution.lambda1) {
        return Err(Error::InvalidPath {
            current: solution.lambda1,
            new: lambda1_new,
        });
    }
    let gamma = lambda1_new - solution.lambda1;
    Ok(FlsaSolution {
        beta: solution.beta.iter().map(|&b| soft_threshold(b, gamma)).collect(),
        lambda1: lambda1_new,
        lambda2: solution.lambda2,
        fused_sets: solution.fused_sets.clone(),
    })
}
