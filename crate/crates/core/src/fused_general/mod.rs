//! The fused lasso with a design matrix: squared error plus `λ1‖β‖₁` and
//! `λ2 Σ|β_j − β_{j−1}|` over the coefficient order.
//!
//! Solved by the same cycle as the chain approximator (coordinate descent,
//! pairwise fusion, plateau sub-run moves) on a maintained residual. A block
//! of coefficients moves as one along the summed column. Nothing is
//! collapsed between grid points, so coefficients may separate again as λ2
//! grows. Every fit is checked against the subgradient conditions and flagged
//! as certified or not.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::flsa1d::PathSchedule;
use crate::lasso_family::FitResult;
use crate::numeric::{
    all_finite, dot, kinked_quadratic_argmin, min_subrun, same_level, CoefficientVector, DesignMatrix, Kink, ResponseVector,
};
use crate::oracle::{kkt_check_chain_gradient, KKT_TOL};


/// Sweeps allowed per grid point.
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralFusedProblem {
    x: DesignMatrix,
    y: ResponseVector,
    lambda1: f64,
    lambda2: f64,
}

impl GeneralFusedProblem {
    /// Columns need only be nonzero; the penalty is applied on the scale
    /// given.
    pub fn new(x: DesignMatrix, y: ResponseVector, lambda1: f64, lambda2: f64) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                x.n()
            )));
        }
        if !(lambda1 >= 0.0 && lambda1.is_finite() && lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::InvalidParameter("penalties must be finite and >= 0".into()));
        }
        if let Some(j) = (0..x.p()).find(|&j| x.column_sq_norm(j) == 0.0) {
            return Err(Error::DegenerateColumn(j));
        }
        Ok(GeneralFusedProblem { x, y, lambda1, lambda2 })
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        objective(&self.x, &self.y, beta, self.lambda1, self.lambda2)
    }
}

fn objective(x: &DesignMatrix, y: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let r = x.residual(y, beta);
    0.5 * dot(&r, &r)
        + l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
        + l2 * beta.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
}

/// Fit at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFit {
    pub fit: FitResult,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Maximal runs of equal coefficients.
    pub fused_sets: Vec<Range<usize>>,
    /// The subgradient conditions hold at [`KKT_TOL`] relative to
    /// `max(1, ‖Xᵀy‖∞)`.
    pub certified: bool,
    pub kkt_violation: f64,
}

/// A grid point whose fit failed the optimality check.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertifiedFit {
    pub grid_index: usize,
    pub lambda2: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusedPath {
    pub fits: Vec<FusedFit>,
    pub warnings: Vec<UncertifiedFit>,
}

impl FusedPath {
    pub fn last(&self) -> &FusedFit {
        self.fits.last().expect("grid is never empty")
    }
}

struct Engine<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    l1: f64,
    l2: f64,
    beta: Vec<f64>,
    r: Vec<f64>,
    scratch: Vec<f64>,
}

impl Engine<'_> {
    fn p(&self) -> usize {
        self.beta.len()
    }

    fn penalty_local(&self, s: usize, e: usize, value: Option<f64>) -> f64 {
        let val = |u: usize| value.unwrap_or(self.beta[u]);
        let mut f: f64 = (s..=e).map(|u| self.l1 * val(u).abs()).sum();
        for u in s + 1..=e {
            f += self.l2 * (val(u) - val(u - 1)).abs();
        }
        if s > 0 {
            f += self.l2 * (val(s) - self.beta[s - 1]).abs();
        }
        if e + 1 < self.p() {
            f += self.l2 * (self.beta[e + 1] - val(e)).abs();
        }
        f
    }

    /// Moves coefficients `s..=e` to their best common value if that strictly
    /// decreases the criterion. Returns the largest coordinate change.
    fn try_block(&mut self, s: usize, e: usize) -> Option<f64> {
        let n = self.r.len();
        // partial residual with the block removed, and the summed column
        let mut z = std::mem::take(&mut self.scratch);
        z.clear();
        z.resize(n, 0.0);
        let mut r0 = self.r.clone();
        for j in s..=e {
            let col = self.x.column(j);
            let b = self.beta[j];
            for i in 0..n {
                z[i] += col[i];
                r0[i] += col[i] * b;
            }
        }
        let curv = dot(&z, &z);
        if curv <= 0.0 {
            self.scratch = z;
            return None;
        }
        let center = dot(&z, &r0) / curv;
        let mut kinks = [Kink::new(0.0, 0.0); 3];
        let mut count = 0;
        if self.l1 > 0.0 {
            kinks[count] = Kink::new(0.0, self.l1 * (e - s + 1) as f64);
            count += 1;
        }
        if self.l2 > 0.0 {
            if s > 0 {
                kinks[count] = Kink::new(self.beta[s - 1], self.l2);
                count += 1;
            }
            if e + 1 < self.p() {
                kinks[count] = Kink::new(self.beta[e + 1], self.l2);
                count += 1;
            }
        }
        let gamma = kinked_quadratic_argmin(curv, center, &mut kinks[..count]);
        if (s..=e).all(|u| self.beta[u] == gamma) {
            self.scratch = z;
            return None;
        }
        let new_r: Vec<f64> = r0.iter().zip(&z).map(|(a, b)| a - b * gamma).collect();
        let before = 0.5 * dot(&self.r, &self.r) + self.penalty_local(s, e, None);
        let after = 0.5 * dot(&new_r, &new_r) + self.penalty_local(s, e, Some(gamma));
        self.scratch = z;
        if after < before - 1e-14 * before.abs().max(1.0) {
            let change = (s..=e).map(|u| (self.beta[u] - gamma).abs()).fold(0.0, f64::max);
            self.beta[s..=e].fill(gamma);
            self.r = new_r;
            Some(change)
        } else {
            None
        }
    }

    /// Exact single-coordinate minimization (always applied).
    fn descent(&mut self, j: usize) -> f64 {
        let col = self.x.column(j);
        let a = self.x.column_sq_norm(j);
        let old = self.beta[j];
        let center = old + dot(col, &self.r) / a;
        let mut kinks = [Kink::new(0.0, 0.0); 3];
        let mut count = 0;
        if self.l1 > 0.0 {
            kinks[count] = Kink::new(0.0, self.l1);
            count += 1;
        }
        if self.l2 > 0.0 {
            if j > 0 {
                kinks[count] = Kink::new(self.beta[j - 1], self.l2);
                count += 1;
            }
            if j + 1 < self.p() {
                kinks[count] = Kink::new(self.beta[j + 1], self.l2);
                count += 1;
            }
        }
        let b = kinked_quadratic_argmin(a, center, &mut kinks[..count]);
        if b != old {
            let d = b - old;
            for (r, c) in self.r.iter_mut().zip(col) {
                *r -= c * d;
            }
            self.beta[j] = b;
        }
        (b - old).abs()
    }

    /// Sub-run moves inside runs of equal coefficients, chosen by the most
    /// negative directional derivative of a joint shift up or down.
    fn plateau_pass(&mut self) -> bool {
        let p = self.p();
        let (l1, l2) = (self.l1, self.l2);
        let grad: Vec<f64> = (0..p).map(|j| -dot(self.x.column(j), &self.r)).collect();
        let scale = 1.0 + l1 + l2 + grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let eps = 1e-12 * scale;
        let mut moved = false;
        let mut a = 0;
        while a < p {
            let v = self.beta[a];
            let mut b = a;
            while b + 1 < p && same_level(self.beta[b + 1], v) {
                b += 1;
            }
            if b > a {
                let dup = if v < 0.0 { -1.0 } else { 1.0 };
                let ddown = if v > 0.0 { -1.0 } else { 1.0 };
                let up: Vec<f64> = (a..=b).map(|u| grad[u] + l1 * dup).collect();
                let down: Vec<f64> = (a..=b).map(|u| -grad[u] + l1 * ddown).collect();
                let left_nb = (a > 0).then(|| self.beta[a - 1]);
                let right_nb = (b + 1 < p).then(|| self.beta[b + 1]);
                let outer = |side: Option<f64>, dir: f64| side.map_or(0.0, |nb| dir * l2 * (v - nb).signum());
                let mut best: Option<(f64, usize, usize)> = None;
                for (costs, dir) in [(&up, 1.0), (&down, -1.0)] {
                    let left = |s: usize| if s > 0 { l2 } else { outer(left_nb, dir) };
                    let right = |e: usize| if e + 1 < costs.len() { l2 } else { outer(right_nb, dir) };
                    if let Some(run) = min_subrun(costs, left, right) {
                        if run.cost < -eps && best.map_or(true, |(c, _, _)| run.cost < c) {
                            best = Some((run.cost, run.start, run.end));
                        }
                    }
                }
                if let Some((_, s, e)) = best {
                    moved |= self.try_block(a + s, a + e).is_some();
                }
            }
            a = b + 1;
        }
        moved
    }

    fn objective(&self) -> f64 {
        0.5 * dot(&self.r, &self.r)
            + self.l1 * self.beta.iter().map(|b| b.abs()).sum::<f64>()
            + self.l2 * self.beta.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    }

    /// Cycles until a full pass changes nothing beyond `tol` and no plateau
    /// sub-run can move. Returns the sweeps used, or `None` at the limit.
    fn run(&mut self, tol: f64, max_sweeps: usize, trace: &mut Vec<f64>) -> Option<usize> {
        let p = self.p();
        for sweep in 1..=max_sweeps {
            let mut change: f64 = 0.0;
            for j in 0..p {
                let d = self.descent(j);
                change = change.max(d);
                if d < tol && j > 0 && self.l2 > 0.0 {
                    if let Some(c) = self.try_block(j - 1, j) {
                        change = change.max(c);
                    }
                }
            }
            trace.push(self.objective());
            if change < tol {
                if self.l2 > 0.0 && self.plateau_pass() {
                    trace.push(self.objective());
                    continue;
                }
                // guard against drift in the maintained residual
                self.r = self.x.residual(self.y, &self.beta);
                return Some(sweep);
            }
        }
        None
    }
}

fn runs(beta: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=beta.len() {
        if j == beta.len() || beta[j] != beta[start] {
            out.push(start..j);
            start = j;
        }
    }
    out
}

/// Solves along the λ2 grid of `schedule`, warm-starting each point from the
/// previous coefficients. `schedule` must carry the problem's λ1 and end at
/// its λ2.
pub fn fused_cd_solve(problem: &GeneralFusedProblem, schedule: &PathSchedule, tol: f64) -> Result<FusedPath> {
    if schedule.lambda1 != problem.lambda1 || schedule.lambda2_target != problem.lambda2 {
        return Err(Error::InvalidParameter(format!(
            "schedule ends at ({}, {}) but the problem has ({}, {})",
            schedule.lambda1, schedule.lambda2_target, problem.lambda1, problem.lambda2
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let (x, y) = (&problem.x, &problem.y[..]);
    let p = x.p();
    let mut engine = Engine {
        x,
        y,
        l1: problem.lambda1,
        l2: 0.0,
        beta: vec![0.0; p],
        r: y.to_vec(),
        scratch: Vec::new(),
    };
    // optimality is checked relative to the size of the gradient at zero
    let kkt_tol = KKT_TOL * x.columns().fold(1.0f64, |m, c| m.max(dot(c, y).abs()));
    let mut path = FusedPath::default();
    for (k, &lambda2) in schedule.grid().iter().enumerate() {
        engine.l2 = lambda2;
        let mut trace = Vec::new();
        let sweeps = engine
            .run(tol, MAX_SWEEPS, &mut trace)
            .ok_or(Error::NotConverged { index: k, limit: MAX_SWEEPS })?;
        if !all_finite(&engine.beta) {
            return Err(Error::Diverged(format!("non-finite coefficients at grid point {k}")));
        }
        let grad: Vec<f64> = (0..p).map(|j| -dot(x.column(j), &engine.r)).collect();
        let cert = kkt_check_chain_gradient(&grad, &engine.beta, problem.lambda1, lambda2, kkt_tol);
        let certified = cert.feasible();
        if !certified {
            log::warn!("fit at lambda2 = {lambda2} fails the optimality check by {}", cert.max_violation);
            path.warnings.push(UncertifiedFit {
                grid_index: k,
                lambda2,
                violation: cert.max_violation,
            });
        }
        path.fits.push(FusedFit {
            fit: FitResult {
                coefficients: CoefficientVector::new(engine.beta.clone())?,
                intercept: 0.0,
                iterations: sweeps,
                converged: true,
                objective: engine.objective(),
                objective_trace: trace,
            },
            lambda1: problem.lambda1,
            lambda2,
            fused_sets: runs(&engine.beta),
            certified,
            kkt_violation: cert.max_violation,
        });
    }
    Ok(path)
}

/// Fit at the problem's `(λ1, λ2)` along the default λ2 grid.
pub fn fused_cd(problem: &GeneralFusedProblem, tol: f64) -> Result<FusedFit> {
    let schedule = PathSchedule::with_default_delta(problem.lambda1, problem.lambda2)?;
    let mut path = fused_cd_solve(problem, &schedule, tol)?;
    Ok(path.fits.pop().expect("grid is never empty"))
}
