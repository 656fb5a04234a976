use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::numeric::{median, weighted_median_pairs, CoefficientVector, DesignMatrix};

use super::{CdOptions, FitResult};

/// Controls for the absolute-error solver.
#[derive(Debug, Clone, PartialEq)]
pub struct LadOptions {
    /// After coordinatewise convergence, search for a descent direction
    /// along an edge of the piecewise-linear criterion and continue from
    /// there. Without it the cyclic updates can stop at a point that is
    /// optimal along every axis but not jointly.
    pub edge_escape: bool,
    pub max_escapes: usize,
}

impl Default for LadOptions {
    fn default() -> Self {
        LadOptions {
            edge_escape: true,
            max_escapes: 10_000,
        }
    }
}

struct LadState<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    lambda: f64,
    beta: Vec<f64>,
    intercept: f64,
    residual: Vec<f64>,
}

impl LadState<'_> {
    fn refresh_residual(&mut self) {
        let fit = self.x.multiply(&self.beta);
        for ((r, y), f) in self.residual.iter_mut().zip(self.y).zip(fit) {
            *r = y - self.intercept - f;
        }
    }

    fn objective(&self) -> f64 {
        self.residual.iter().map(|r| r.abs()).sum::<f64>()
            + self.lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// One cyclic sweep: intercept first, then the coefficients.
    fn sweep(&mut self, pairs: &mut Vec<(f64, f64)>) -> f64 {
        let shifted: Vec<f64> = self.residual.iter().map(|r| r + self.intercept).collect();
        let b0 = median(&shifted).expect("non-empty sample");
        let mut max_change = (b0 - self.intercept).abs();
        for (r, s) in self.residual.iter_mut().zip(&shifted) {
            *r = s - b0;
        }
        self.intercept = b0;

        for j in 0..self.x.p() {
            let col = self.x.column(j);
            let old = self.beta[j];
            pairs.clear();
            for (&xij, &r) in col.iter().zip(&self.residual) {
                if xij != 0.0 {
                    pairs.push(((r + xij * old) / xij, xij.abs()));
                }
            }
            if self.lambda > 0.0 {
                // pseudo-observation (0, λ e_j)
                pairs.push((0.0, self.lambda));
            }
            let Some(new) = weighted_median_pairs(pairs) else {
                continue;
            };
            if new != old {
                let delta = new - old;
                for (r, &xij) in self.residual.iter_mut().zip(col) {
                    *r -= xij * delta;
                }
                self.beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Rows of the augmented problem as `(a_i, residual_i)` with
    /// `a_i = (1, x_i)` for observations and `(0, λ e_j)` for the penalty.
    fn rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let p = self.x.p();
        let mut rows = Vec::with_capacity(self.x.n() + p);
        let mut res = Vec::with_capacity(self.x.n() + p);
        for i in 0..self.x.n() {
            let mut a = Vec::with_capacity(p + 1);
            a.push(1.0);
            a.extend((0..p).map(|j| self.x.get(i, j)));
            rows.push(a);
            res.push(self.residual[i]);
        }
        if self.lambda > 0.0 {
            for j in 0..p {
                let mut a = vec![0.0; p + 1];
                a[j + 1] = self.lambda;
                rows.push(a);
                res.push(-self.lambda * self.beta[j]);
            }
        }
        (rows, res)
    }

    /// Looks for a descent direction at a coordinatewise-stationary point and
    /// performs an exact line search along it. Returns whether it moved.
    fn escape(&mut self) -> bool {
        let q = self.x.p() + 1;
        let (rows, res) = self.rows();
        let scale = 1.0 + self.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zero_tol = 1e-9 * scale;
        let zero: Vec<usize> = (0..rows.len()).filter(|&i| res[i].abs() <= zero_tol).collect();
        let mut g = DVector::<f64>::zeros(q);
        for (a, &r) in rows.iter().zip(&res) {
            if r.abs() > zero_tol {
                let s = r.signum();
                for (gk, ak) in g.iter_mut().zip(a) {
                    *gk -= s * ak;
                }
            }
        }
        let gnorm = g.norm();
        let direction: DVector<f64> = if zero.is_empty() {
            if gnorm <= 1e-12 * scale {
                return false;
            }
            -g.clone()
        } else {
            let az = DMatrix::from_fn(zero.len(), q, |r, c| rows[zero[r]][c]);
            let azt = az.transpose();
            let Ok(u) = azt.clone().svd(true, true).solve(&(-&g), 1e-12) else {
                return false;
            };
            let perp = &azt * &u + &g;
            if perp.norm() > 1e-9 * (1.0 + gnorm) {
                // g has a component orthogonal to the rows of A_Z
                -perp
            } else {
                let (k, uk) = u
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |best, (k, &v)| if v.abs() > best.1.abs() { (k, v) } else { best });
                if uk.abs() <= 1.0 + 1e-9 {
                    return false;
                }
                let mut e = DVector::<f64>::zeros(zero.len());
                e[k] = uk.signum();
                match az.svd(true, true).solve(&e, 1e-12) {
                    Ok(d) => d,
                    Err(_) => return false,
                }
            }
        };
        let before = self.objective();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (a, &r) in rows.iter().zip(&res) {
            let ad: f64 = a.iter().zip(direction.iter()).map(|(x, d)| x * d).sum();
            if ad.abs() > 1e-14 {
                pairs.push((r / ad, ad.abs()));
            }
        }
        let Some(t) = weighted_median_pairs(&mut pairs) else {
            return false;
        };
        if t == 0.0 {
            return false;
        }
        let saved = (self.intercept, self.beta.clone());
        self.intercept += t * direction[0];
        for (b, d) in self.beta.iter_mut().zip(direction.iter().skip(1)) {
            *b += t * d;
        }
        self.refresh_residual();
        if self.objective() < before - 1e-13 * (1.0 + before) {
            true
        } else {
            self.intercept = saved.0;
            self.beta = saved.1;
            self.refresh_residual();
            false
        }
    }
}

pub(crate) fn run(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    beta: Vec<f64>,
    intercept: f64,
    opts: &CdOptions,
) -> Result<FitResult> {
    let mut state = LadState {
        x,
        y,
        lambda,
        beta,
        intercept,
        residual: vec![0.0; x.n()],
    };
    state.refresh_residual();
    let mut pairs = Vec::with_capacity(x.n() + 1);
    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut escapes = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let change = state.sweep(&mut pairs);
        if opts.record_objective {
            trace.push(state.objective());
        }
        if change < opts.tol {
            state.refresh_residual();
            if opts.lad.edge_escape && escapes < opts.lad.max_escapes && state.escape() {
                escapes += 1;
                if opts.record_objective {
                    trace.push(state.objective());
                }
                // let the cyclic updates exploit the new point first
                continue;
            }
            converged = true;
            break;
        }
    }
    if escapes > 0 {
        log::debug!("LAD fit used {escapes} edge moves");
    }
    state.refresh_residual();
    let objective = state.objective();
    Ok(FitResult {
        coefficients: CoefficientVector::new(state.beta)?,
        intercept: state.intercept,
        iterations: sweeps,
        converged,
        objective,
        objective_trace: trace,
    })
}
