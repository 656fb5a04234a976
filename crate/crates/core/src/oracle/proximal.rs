use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::lasso_family::{Penalty, SeparableProblem};
use crate::numeric::{dot, soft_threshold, DesignMatrix};

use super::kkt::Edge;

/// `F(x) = f(x) + g(x)` with `f` smooth and `g` prox-friendly.
pub trait CompositeObjective {
    fn dim(&self) -> usize;
    fn smooth(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn nonsmooth(&self, x: &[f64]) -> f64;
    /// `argmin_u ½‖u − v‖² + step·g(u)`.
    fn prox(&self, v: &[f64], step: f64, out: &mut [f64]);
    /// Starting guess for the Lipschitz constant of `∇f`.
    fn lipschitz_hint(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaOptions {
    pub max_iter: usize,
    /// Stop when the iterate moves less than this (sup norm) for ten
    /// consecutive iterations.
    pub step_tol: f64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        FistaOptions {
            max_iter: 1_000_000,
            step_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Accelerated proximal gradient with backtracking and function-value
/// restart. `stop(x, k)` can end the run early.
pub fn fista<P: CompositeObjective + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &FistaOptions,
    mut stop: impl FnMut(&[f64], usize) -> bool,
) -> Result<FistaResult> {
    let d = problem.dim();
    let total = |x: &[f64]| problem.smooth(x) + problem.nonsmooth(x);
    let mut lip = problem.lipschitz_hint().max(1e-12);
    let mut x = x0.to_vec();
    let mut fx = total(&x);
    let mut v = x.clone();
    let mut grad = vec![0.0; d];
    let mut cand = vec![0.0; d];
    let mut step_in = vec![0.0; d];
    let mut theta = 1.0f64;
    let mut quiet = 0;
    let mut restarted = false;
    let mut k = 0;
    while k < opts.max_iter {
        k += 1;
        let fv = problem.smooth(&v);
        problem.gradient(&v, &mut grad);
        loop {
            for i in 0..d {
                step_in[i] = v[i] - grad[i] / lip;
            }
            problem.prox(&step_in, 1.0 / lip, &mut cand);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..d {
                let diff = cand[i] - v[i];
                lin += grad[i] * diff;
                sq += diff * diff;
            }
            let fc = problem.smooth(&cand);
            if !fc.is_finite() {
                return Err(Error::Diverged(format!("non-finite objective at iteration {k}")));
            }
            if fc <= fv + lin + 0.5 * lip * sq + 1e-12 * fv.abs().max(1.0) {
                break;
            }
            lip *= 2.0;
            if lip > 1e300 {
                return Err(Error::Diverged("Lipschitz estimate overflowed".into()));
            }
        }
        let fc = total(&cand);
        let moved = cand.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // a plain proximal step (no momentum) cannot increase the criterion in
        // exact arithmetic, so an increase there is roundoff and is accepted
        if fc > fx && !restarted {
            // restart momentum from the last accepted point
            theta = 1.0;
            v.copy_from_slice(&x);
            restarted = true;
            continue;
        }
        restarted = false;
        let next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let mom = (theta - 1.0) / next;
        for i in 0..d {
            v[i] = cand[i] + mom * (cand[i] - x[i]);
        }
        theta = next;
        std::mem::swap(&mut x, &mut cand);
        fx = fc;
        quiet = if moved <= opts.step_tol { quiet + 1 } else { 0 };
        if quiet >= 10 || stop(&x, k) {
            break;
        }
    }
    Ok(FistaResult {
        x,
        objective: fx,
        iterations: k,
    })
}

/// Largest eigenvalue of `XᵀX` by power iteration (slight overestimate).
fn gram_norm(x: &DesignMatrix) -> f64 {
    let p = x.p();
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut est = 0.0;
    for _ in 0..200 {
        let xv = x.multiply(&v);
        let w: Vec<f64> = x.columns().map(|c| dot(c, &xv)).collect();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        est = norm;
        v = w.into_iter().map(|a| a / norm).collect();
    }
    est * 1.01
}

/// Squared-error regression with a separable penalty; the garotte is
/// expressed in its scalings `c` on the columns `x_j·β̂_j`.
struct SeparableObjective<'a> {
    x: DesignMatrix,
    y: &'a [f64],
    penalty: &'a Penalty,
    lip: f64,
}

impl CompositeObjective for SeparableObjective<'_> {
    fn dim(&self) -> usize {
        self.x.p()
    }

    fn smooth(&self, b: &[f64]) -> f64 {
        let r = self.x.residual(self.y, b);
        let mut f = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        if let Penalty::ElasticNet { lambda2, .. } = self.penalty {
            f += 0.5 * lambda2 * b.iter().map(|v| v * v).sum::<f64>();
        }
        f
    }

    fn gradient(&self, b: &[f64], out: &mut [f64]) {
        let r = self.x.residual(self.y, b);
        for (j, o) in out.iter_mut().enumerate() {
            *o = -dot(self.x.column(j), &r);
            if let Penalty::ElasticNet { lambda2, .. } = self.penalty {
                *o += lambda2 * b[j];
            }
        }
    }

    fn nonsmooth(&self, b: &[f64]) -> f64 {
        match self.penalty {
            Penalty::Lasso { lambda } => lambda * b.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::ElasticNet { lambda1, .. } => lambda1 * b.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::Garotte { lambda } => {
                if b.iter().any(|&c| c < 0.0) {
                    f64::INFINITY
                } else {
                    lambda * b.iter().sum::<f64>()
                }
            }
            Penalty::Berhu { lambda, delta } => {
                lambda
                    * b.iter()
                        .map(|&v| {
                            if v.abs() < *delta {
                                v.abs()
                            } else {
                                (v * v + delta * delta) / (2.0 * delta)
                            }
                        })
                        .sum::<f64>()
            }
            Penalty::GroupedLasso { lambda, groups } => groups
                .iter()
                .map(|g| lambda * (g.len() as f64).sqrt() * g.iter().map(|&j| b[j] * b[j]).sum::<f64>().sqrt())
                .sum(),
            Penalty::Lad { .. } => unreachable!("absolute loss has no smooth part"),
        }
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        match self.penalty {
            Penalty::Lasso { lambda } => {
                for (o, &a) in out.iter_mut().zip(v) {
                    *o = soft_threshold(a, t * lambda);
                }
            }
            Penalty::ElasticNet { lambda1, .. } => {
                for (o, &a) in out.iter_mut().zip(v) {
                    *o = soft_threshold(a, t * lambda1);
                }
            }
            Penalty::Garotte { lambda } => {
                for (o, &a) in out.iter_mut().zip(v) {
                    *o = (a - t * lambda).max(0.0);
                }
            }
            Penalty::Berhu { lambda, delta } => {
                let tl = t * lambda;
                for (o, &a) in out.iter_mut().zip(v) {
                    let inner = soft_threshold(a, tl);
                    let outer = a / (1.0 + tl / delta);
                    let h = |b: f64| {
                        let pen = if b.abs() < *delta {
                            b.abs()
                        } else {
                            (b * b + delta * delta) / (2.0 * delta)
                        };
                        0.5 * (b - a) * (b - a) + tl * pen
                    };
                    *o = if h(outer) < h(inner) { outer } else { inner };
                }
            }
            Penalty::GroupedLasso { lambda, groups } => {
                for g in groups {
                    let lg = t * lambda * (g.len() as f64).sqrt();
                    let norm = g.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
                    let shrink = if norm > lg { 1.0 - lg / norm } else { 0.0 };
                    for &j in g {
                        out[j] = shrink * v[j];
                    }
                }
            }
            Penalty::Lad { .. } => unreachable!(),
        }
    }

    fn lipschitz_hint(&self) -> f64 {
        self.lip
    }
}

/// Dual of `½‖y − Xβ‖² + λ1‖β‖₁ + Σ_e w_e|β_a − β_b|` with `XᵀX = G`
/// invertible (`X = I` for signal approximation):
/// `min ½ uᵀG⁻¹u`, `u = Xᵀy − Dᵀz`, over the box `|z_i| ≤ λ1`,
/// `|z_e| ≤ w_e`, with primal point `β = G⁻¹u`.
struct FusedDual<'a> {
    y: &'a [f64],
    x: Option<&'a DesignMatrix>,
    xty: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    lambda1: f64,
    edges: &'a [Edge],
    lip: f64,
}

impl<'a> FusedDual<'a> {
    fn new(y: &'a [f64], x: Option<&'a DesignMatrix>, lambda1: f64, edges: &'a [Edge]) -> Result<Self> {
        let p = x.map_or(y.len(), |x| x.p());
        let mut degree = vec![0usize; p];
        for e in edges {
            if e.a >= p || e.b >= p {
                return Err(Error::DimensionMismatch(format!("edge ({}, {}) outside 0..{p}", e.a, e.b)));
            }
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let d_norm = 1.0 + 2.0 * degree.iter().copied().max().unwrap_or(0) as f64;
        let (xty, chol, inv_norm) = match x {
            None => (y.to_vec(), None, 1.0),
            Some(x) => {
                if x.n() != y.len() {
                    return Err(Error::DimensionMismatch("design and response lengths differ".into()));
                }
                let g = DMatrix::from_fn(p, p, |i, j| dot(x.column(i), x.column(j)));
                let scale = (0..p).map(|j| g[(j, j)]).fold(0.0f64, f64::max).max(1.0);
                let chol = Cholesky::new(g).ok_or(Error::RankDeficient)?;
                if (0..p).any(|j| chol.l_dirty()[(j, j)].powi(2) <= 1e-10 * scale) {
                    return Err(Error::RankDeficient);
                }
                let xty = x.columns().map(|c| dot(c, y)).collect();
                let inv_norm = inverse_norm(&chol, p);
                (xty, Some(chol), inv_norm)
            }
        };
        Ok(FusedDual {
            y,
            x,
            xty,
            chol,
            lambda1,
            edges,
            lip: d_norm * inv_norm,
        })
    }

    fn p(&self) -> usize {
        self.xty.len()
    }

    fn u(&self, z: &[f64]) -> Vec<f64> {
        let p = self.p();
        let mut u = self.xty.clone();
        for i in 0..p {
            u[i] -= z[i];
        }
        for (k, e) in self.edges.iter().enumerate() {
            let ze = z[p + k];
            u[e.a] -= ze;
            u[e.b] += ze;
        }
        u
    }

    fn solve(&self, u: &[f64]) -> Vec<f64> {
        match &self.chol {
            None => u.to_vec(),
            Some(c) => c.solve(&DVector::from_column_slice(u)).iter().copied().collect(),
        }
    }

    fn primal(&self, z: &[f64]) -> Vec<f64> {
        self.solve(&self.u(z))
    }

    fn primal_objective(&self, beta: &[f64]) -> f64 {
        match self.x {
            None => graph_objective(self.y, beta, self.lambda1, self.edges),
            Some(x) => {
                let r = x.residual(self.y, beta);
                0.5 * dot(&r, &r) + penalty_value(beta, self.lambda1, self.edges)
            }
        }
    }

    /// `½‖y‖² − ½uᵀG⁻¹u`, a lower bound on the primal optimum.
    fn dual_value(&self, z: &[f64]) -> f64 {
        0.5 * dot(self.y, self.y) - self.smooth(z)
    }
}

/// Largest eigenvalue of `G⁻¹` by power iteration (slight overestimate).
fn inverse_norm(chol: &Cholesky<f64, Dyn>, p: usize) -> f64 {
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut est = 1.0;
    for _ in 0..100 {
        let w = chol.solve(&v);
        est = w.norm();
        v = w / est;
    }
    est * 1.01
}

impl CompositeObjective for FusedDual<'_> {
    fn dim(&self) -> usize {
        self.p() + self.edges.len()
    }

    fn smooth(&self, z: &[f64]) -> f64 {
        let u = self.u(z);
        0.5 * dot(&u, &self.solve(&u))
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let p = self.p();
        let beta = self.primal(z);
        for i in 0..p {
            out[i] = -beta[i];
        }
        for (k, e) in self.edges.iter().enumerate() {
            out[p + k] = -(beta[e.a] - beta[e.b]);
        }
    }

    fn nonsmooth(&self, _z: &[f64]) -> f64 {
        0.0
    }

    fn prox(&self, v: &[f64], _t: f64, out: &mut [f64]) {
        let p = self.p();
        for i in 0..p {
            out[i] = v[i].clamp(-self.lambda1, self.lambda1);
        }
        for (k, e) in self.edges.iter().enumerate() {
            out[p + k] = v[p + k].clamp(-e.weight, e.weight);
        }
    }

    fn lipschitz_hint(&self) -> f64 {
        self.lip
    }
}

fn penalty_value(beta: &[f64], lambda1: f64, edges: &[Edge]) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let tv: f64 = edges.iter().map(|e| e.weight * (beta[e.a] - beta[e.b]).abs()).sum();
    lambda1 * l1 + tv
}

pub fn graph_objective(y: &[f64], beta: &[f64], lambda1: f64, edges: &[Edge]) -> f64 {
    let fit: f64 = y.iter().zip(beta).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    fit + penalty_value(beta, lambda1, edges)
}

/// Chain edges `(i, i + 1)` with weight `lambda2`.
pub fn chain_edges(n: usize, lambda2: f64) -> Vec<Edge> {
    (1..n).map(|i| Edge { a: i - 1, b: i, weight: lambda2 }).collect()
}

fn fused_reference(
    y: &[f64],
    x: Option<&DesignMatrix>,
    lambda1: f64,
    edges: &[Edge],
    opts: &ReferenceOptions,
) -> Result<ReferenceResult> {
    let dual = FusedDual::new(y, x, lambda1, edges)?;
    let fopts = FistaOptions {
        max_iter: opts.max_iter,
        step_tol: 0.0,
    };
    let res = fista(&dual, &vec![0.0; dual.dim()], &fopts, |z, k| {
        if k % 10 != 0 {
            return false;
        }
        let p = dual.primal_objective(&dual.primal(z));
        p - dual.dual_value(z) <= opts.tol * p.abs().max(1.0)
    })?;
    let beta = dual.primal(&res.x);
    Ok(ReferenceResult {
        objective: dual.primal_objective(&beta),
        lower_bound: Some(dual.dual_value(&res.x)),
        solution: beta,
        iterations: res.iterations,
    })
}

/// Reference problems, each solved by accelerated proximal gradient: on the
/// primal for separable penalties, on the box-constrained dual for fused ones.
#[derive(Debug, Clone)]
pub enum ReferenceProblem<'a> {
    /// Any squared-error separable problem (not LAD).
    Separable(&'a SeparableProblem),
    /// Chain signal approximator.
    Chain { y: &'a [f64], lambda1: f64, lambda2: f64 },
    /// Signal approximator on an arbitrary fusion graph.
    Graph { y: &'a [f64], lambda1: f64, edges: &'a [Edge] },
    /// `½‖y − Xβ‖² + λ1‖β‖₁ + λ2 Σ|β_j − β_{j−1}|`, for `XᵀX` invertible.
    GeneralFused {
        x: &'a DesignMatrix,
        y: &'a [f64],
        lambda1: f64,
        lambda2: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceResult {
    pub solution: Vec<f64>,
    /// Criterion at `solution`.
    pub objective: f64,
    /// Dual lower bound on the optimum when the method provides one.
    pub lower_bound: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub max_iter: usize,
    /// Duality-gap target relative to the objective (graph problems) or the
    /// step tolerance (primal problems).
    pub tol: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            max_iter: 1_000_000,
            tol: 1e-12,
        }
    }
}

pub fn proximal_reference(problem: &ReferenceProblem, opts: &ReferenceOptions) -> Result<ReferenceResult> {
    match problem {
        ReferenceProblem::Separable(prob) => {
            if matches!(prob.penalty(), Penalty::Lad { .. }) {
                return Err(Error::InvalidParameter(
                    "absolute-error problems use the LAD vertex oracle".into(),
                ));
            }
            let x = match (prob.penalty(), prob.ls_estimates()) {
                (Penalty::Garotte { .. }, Some(ls)) => DesignMatrix::from_columns(
                    prob.x()
                        .columns()
                        .zip(ls)
                        .map(|(c, b)| c.iter().map(|v| v * b).collect())
                        .collect(),
                )?,
                _ => prob.x().clone(),
            };
            let mut lip = gram_norm(&x);
            if let Penalty::ElasticNet { lambda2, .. } = prob.penalty() {
                lip += lambda2;
            }
            let obj = SeparableObjective {
                x,
                y: prob.y(),
                penalty: prob.penalty(),
                lip,
            };
            let fopts = FistaOptions {
                max_iter: opts.max_iter,
                step_tol: opts.tol,
            };
            let res = fista(&obj, &vec![0.0; obj.dim()], &fopts, |_, _| false)?;
            Ok(ReferenceResult {
                objective: prob.objective(&res.x, 0.0),
                solution: res.x,
                lower_bound: None,
                iterations: res.iterations,
            })
        }
        ReferenceProblem::Chain { y, lambda1, lambda2 } => {
            let edges = chain_edges(y.len(), *lambda2);
            fused_reference(y, None, *lambda1, &edges, opts)
        }
        ReferenceProblem::Graph { y, lambda1, edges } => fused_reference(y, None, *lambda1, edges, opts),
        ReferenceProblem::GeneralFused { x, y, lambda1, lambda2 } => {
            let edges = chain_edges(x.p(), *lambda2);
            fused_reference(y, Some(x), *lambda1, &edges, opts)
        }
    }
}
