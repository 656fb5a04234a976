use crate::lasso_family::{Penalty, SeparableProblem};
use crate::numeric::{dot, DesignMatrix, EQUALITY_TOL};

/// Default largest subgradient-equation residual accepted as optimal.
pub const KKT_TOL: f64 = 1e-6;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    fn scale(self, k: f64) -> Interval {
        Interval {
            lo: self.lo * k,
            hi: self.hi * k,
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }
}

/// Subgradient of `|v|` when `v` counts as zero below `tie`.
fn abs_subgradient(v: f64, tie: f64) -> Interval {
    if v.abs() <= tie {
        Interval::UNIT
    } else {
        Interval::point(v.signum())
    }
}

/// Admissible values of the sign variables at a candidate point.
///
/// `s[i]` is `sign(β_i)` or `[−1, 1]` when `β_i = 0`; `t[e]` is
/// `sign(β_a − β_b)` for edge `e = (a, b)` or `[−1, 1]` when the ends are
/// equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientVars {
    pub s: Vec<Interval>,
    pub t: Vec<Interval>,
}

impl SubgradientVars {
    pub fn for_graph(beta: &[f64], edges: &[Edge]) -> Self {
        SubgradientVars {
            s: beta.iter().map(|&b| abs_subgradient(b, EQUALITY_TOL)).collect(),
            t: edges
                .iter()
                .map(|e| abs_subgradient(beta[e.a] - beta[e.b], EQUALITY_TOL))
                .collect(),
        }
    }

    /// Chain edges `(i, i + 1)` oriented so that `t_i = sign(β_{i+1} − β_i)`.
    pub fn for_chain(beta: &[f64]) -> Self {
        SubgradientVars {
            s: beta.iter().map(|&b| abs_subgradient(b, EQUALITY_TOL)).collect(),
            t: beta
                .windows(2)
                .map(|w| abs_subgradient(w[1] - w[0], EQUALITY_TOL))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktStatus {
    Feasible,
    Infeasible,
    /// The feasibility search hit its iteration cap.
    Undecided,
}

/// Concrete sign-variable values.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub status: KktStatus,
    pub witness: Option<Witness>,
    /// Largest residual of the subgradient equations at the best witness.
    pub max_violation: f64,
}

impl KktCertificate {
    pub fn feasible(&self) -> bool {
        self.status == KktStatus::Feasible
    }
}

/// Chain check from the data: the smooth gradient is `β − y`.
pub fn kkt_check_chain(y: &[f64], beta: &[f64], lambda1: f64, lambda2: f64) -> KktCertificate {
    let grad: Vec<f64> = beta.iter().zip(y).map(|(b, v)| b - v).collect();
    kkt_check_chain_gradient(&grad, beta, lambda1, lambda2, KKT_TOL)
}

/// Chain check for any smooth loss with gradient `grad` at `beta`.
///
/// With flows `F_j = λ2 t_j` (edge into `j`, `F_1 = F_{n+1} = 0`) the
/// subgradient equations read `F_{j+1} = F_j + grad_j + λ1 s_j`. The set of
/// reachable flows is an interval, propagated forward and intersected with
/// `λ2 · T_{j+1}`; an empty intersection is a violation whose size is
/// recorded before clamping. A witness is then recovered by a backward pass.
pub fn kkt_check_chain_gradient(grad: &[f64], beta: &[f64], lambda1: f64, lambda2: f64, tol: f64) -> KktCertificate {
    let n = beta.len();
    let vars = SubgradientVars::for_chain(beta);
    let mut flows = Vec::with_capacity(n + 1);
    flows.push(Interval::point(0.0));
    let mut violation: f64 = 0.0;
    for j in 0..n {
        let prev = flows[j];
        let s = vars.s[j];
        let reach = Interval {
            lo: prev.lo + grad[j] + lambda1 * s.lo,
            hi: prev.hi + grad[j] + lambda1 * s.hi,
        };
        let allowed = if j + 1 < n {
            vars.t[j].scale(lambda2)
        } else {
            Interval::point(0.0)
        };
        let lo = reach.lo.max(allowed.lo);
        let hi = reach.hi.min(allowed.hi);
        if lo <= hi {
            flows.push(Interval { lo, hi });
        } else {
            let gap = lo - hi;
            violation = violation.max(gap);
            let v = if reach.hi < allowed.lo { allowed.lo } else { allowed.hi };
            flows.push(Interval::point(v));
        }
    }

    // backward pass: F_{n+1} = 0, choose F_j consistent with F_{j+1}
    let mut f_next = 0.0;
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n.saturating_sub(1)];
    for j in (0..n).rev() {
        let vs = vars.s[j];
        let target = Interval {
            lo: f_next - grad[j] - lambda1 * vs.hi,
            hi: f_next - grad[j] - lambda1 * vs.lo,
        };
        let range = flows[j];
        let lo = target.lo.max(range.lo);
        let hi = target.hi.min(range.hi);
        let f = if lo <= hi { 0.5 * (lo + hi) } else { range.clamp(0.5 * (target.lo + target.hi)) };
        s[j] = if lambda1 > 0.0 {
            (f_next - f - grad[j]) / lambda1
        } else {
            vs.clamp(0.0)
        };
        if j > 0 {
            t[j - 1] = if lambda2 > 0.0 { f / lambda2 } else { vars.t[j - 1].clamp(0.0) };
        }
        f_next = f;
    }
    KktCertificate {
        status: if violation <= tol {
            KktStatus::Feasible
        } else {
            KktStatus::Infeasible
        },
        witness: Some(Witness { s, t }),
        max_violation: violation,
    }
}

/// Edge of a fusion graph with penalty weight `weight` on `|β_a − β_b|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Residuals `g_i = grad_i + λ1 s_i + Σ_{e=(i,·)} w_e t_e − Σ_{e=(·,i)} w_e t_e`.
pub fn graph_residuals(grad: &[f64], lambda1: f64, edges: &[Edge], witness: &Witness) -> Vec<f64> {
    let mut g: Vec<f64> = grad.iter().zip(&witness.s).map(|(g, s)| g + lambda1 * s).collect();
    for (e, &t) in edges.iter().zip(&witness.t) {
        g[e.a] += e.weight * t;
        g[e.b] -= e.weight * t;
    }
    g
}

pub fn kkt_check_graph(y: &[f64], beta: &[f64], lambda1: f64, edges: &[Edge]) -> KktCertificate {
    let grad: Vec<f64> = beta.iter().zip(y).map(|(b, v)| b - v).collect();
    kkt_check_graph_gradient(&grad, beta, lambda1, edges, KKT_TOL)
}

/// Graph check: the free sign variables (zero coefficients, equal-valued
/// edges) must solve a linear system inside the unit box. Each connected
/// block of the system is handled by accelerated projected gradient on the
/// box-constrained least-squares problem `min ½‖A u − r‖²`.
pub fn kkt_check_graph_gradient(
    grad: &[f64],
    beta: &[f64],
    lambda1: f64,
    edges: &[Edge],
    tol: f64,
) -> KktCertificate {
    let n = beta.len();
    let vars = SubgradientVars::for_graph(beta, edges);
    let mut witness = Witness {
        s: vars.s.iter().map(|i| i.clamp(0.0)).collect(),
        t: vars.t.iter().map(|i| i.clamp(0.0)).collect(),
    };
    // columns of free variables: (rows, coefficients)
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut owner: Vec<(bool, usize)> = Vec::new();
    let mut free_s = vec![false; n];
    for i in 0..n {
        if vars.s[i] == Interval::UNIT && lambda1 > 0.0 {
            free_s[i] = true;
            witness.s[i] = 0.0;
            columns.push(vec![(i, lambda1)]);
            owner.push((true, i));
        }
    }
    for (k, e) in edges.iter().enumerate() {
        if vars.t[k] == Interval::UNIT && e.weight > 0.0 {
            witness.t[k] = 0.0;
            columns.push(vec![(e.a, e.weight), (e.b, -e.weight)]);
            owner.push((false, k));
        }
    }
    // target: the free terms must cancel the fixed ones
    let fixed = graph_residuals(grad, lambda1, edges, &witness);
    let target: Vec<f64> = fixed.iter().map(|g| -g).collect();

    // connected blocks over rows linked by free columns
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for col in &columns {
        if col.len() == 2 {
            let (a, b) = (find(&mut parent, col[0].0), find(&mut parent, col[1].0));
            parent[a] = b;
        }
    }
    let mut block_rows: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        block_rows.entry(r).or_default().push(i);
    }
    let mut block_cols: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for (c, col) in columns.iter().enumerate() {
        let r = find(&mut parent, col[0].0);
        block_cols.entry(r).or_default().push(c);
    }

    let mut violation: f64 = 0.0;
    let mut decided = true;
    for (root, rows) in &block_rows {
        let cols = block_cols.get(root).map(Vec::as_slice).unwrap_or(&[]);
        if cols.is_empty() {
            for &i in rows {
                violation = violation.max(target[i].abs());
            }
            continue;
        }
        let local: std::collections::HashMap<usize, usize> = rows.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let a: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|&c| columns[c].iter().map(|&(i, v)| (local[&i], v)).collect())
            .collect();
        let b: Vec<f64> = rows.iter().map(|&i| target[i]).collect();
        let sol = box_least_squares(&a, &b, tol * 0.1, 200_000);
        violation = violation.max(sol.residual_inf);
        if sol.residual_inf > tol && !sol.stationary {
            decided = false;
        }
        for (k, &c) in cols.iter().enumerate() {
            let (is_s, idx) = owner[c];
            if is_s {
                witness.s[idx] = sol.u[k];
            } else {
                witness.t[idx] = sol.u[k];
            }
        }
    }
    let status = if violation <= tol {
        KktStatus::Feasible
    } else if decided {
        KktStatus::Infeasible
    } else {
        KktStatus::Undecided
    };
    KktCertificate {
        status,
        witness: Some(witness),
        max_violation: violation,
    }
}

pub(crate) struct BoxSolution {
    pub u: Vec<f64>,
    pub residual_inf: f64,
    pub stationary: bool,
}

/// `min ½‖A u − b‖²` over `u ∈ [−1, 1]^k`, with `A` given by sparse columns.
/// Stops once `‖A u − b‖_∞ ≤ target` or the iterate stops moving.
pub(crate) fn box_least_squares(a: &[Vec<(usize, f64)>], b: &[f64], target: f64, max_iter: usize) -> BoxSolution {
    let k = a.len();
    let m = b.len();
    // ‖A‖² ≤ (max row abs sum)·(max column abs sum)
    let mut row_sum = vec![0.0; m];
    let mut col_max: f64 = 0.0;
    for col in a {
        let mut s = 0.0;
        for &(i, v) in col {
            row_sum[i] += v.abs();
            s += v.abs();
        }
        col_max = col_max.max(s);
    }
    let lip = (row_sum.iter().fold(0.0f64, |x, &y| x.max(y)) * col_max).max(1e-300);
    let apply = |u: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(b.iter().map(|v| -v));
        for (col, &uk) in a.iter().zip(u) {
            for &(i, v) in col {
                out[i] += v * uk;
            }
        }
    };
    let mut u = vec![0.0; k];
    let mut prev = u.clone();
    let mut v = u.clone();
    let mut r = Vec::with_capacity(m);
    let mut theta = 1.0f64;
    let mut last_obj = f64::INFINITY;
    let mut stationary = false;
    for _ in 0..max_iter {
        apply(&v, &mut r);
        let mut step: f64 = 0.0;
        for (j, col) in a.iter().enumerate() {
            let g: f64 = col.iter().map(|&(i, c)| c * r[i]).sum();
            let new = (v[j] - g / lip).clamp(-1.0, 1.0);
            step = step.max((new - u[j]).abs());
            prev[j] = u[j];
            u[j] = new;
        }
        apply(&u, &mut r);
        let res = r.iter().fold(0.0f64, |x, y| x.max(y.abs()));
        if res <= target {
            break;
        }
        if step * lip <= 1e-15 * (1.0 + b.iter().fold(0.0f64, |x, y| x.max(y.abs()))) {
            stationary = true;
            break;
        }
        let obj: f64 = 0.5 * r.iter().map(|x| x * x).sum::<f64>();
        if obj > last_obj {
            // adaptive restart
            theta = 1.0;
            v.copy_from_slice(&u);
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let mom = (theta - 1.0) / next;
            for j in 0..k {
                v[j] = u[j] + mom * (u[j] - prev[j]);
            }
            theta = next;
        }
        last_obj = obj;
    }
    apply(&u, &mut r);
    BoxSolution {
        residual_inf: r.iter().fold(0.0f64, |x, y| x.max(y.abs())),
        u,
        stationary,
    }
}

/// Optimality check for a separable-penalty fit, in the coefficient space of
/// the problem (garotte scalings `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCertificate {
    pub feasible: bool,
    pub max_violation: f64,
}

pub fn kkt_check_regression(
    problem: &SeparableProblem,
    coef: &[f64],
    intercept: f64,
    tol: f64,
) -> RegressionCertificate {
    let x = problem.x();
    let y = problem.y();
    let violation = match problem.penalty() {
        Penalty::Lasso { lambda } => {
            let r = x.residual(y, coef);
            lasso_violation(x, &r, coef, &vec![*lambda; x.p()])
        }
        Penalty::ElasticNet { lambda1, lambda2 } => {
            let r = x.residual(y, coef);
            (0..x.p())
                .map(|j| {
                    let g = dot(x.column(j), &r) - lambda2 * coef[j];
                    sign_violation(g, coef[j], *lambda1)
                })
                .fold(0.0, f64::max)
        }
        Penalty::Garotte { lambda } => {
            let ls = problem.ls_estimates().expect("garotte carries estimates");
            let beta: Vec<f64> = coef.iter().zip(ls).map(|(c, b)| c * b).collect();
            let r = x.residual(y, &beta);
            (0..x.p())
                .map(|j| {
                    if coef[j] < 0.0 {
                        return f64::INFINITY;
                    }
                    let g = ls[j] * dot(x.column(j), &r);
                    if coef[j] > 0.0 {
                        (g - lambda).abs()
                    } else {
                        (g - lambda).max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        }
        Penalty::Berhu { lambda, delta } => {
            let r = x.residual(y, coef);
            (0..x.p())
                .map(|j| {
                    let g = dot(x.column(j), &r);
                    let b = coef[j];
                    if b == 0.0 {
                        (g.abs() - lambda).max(0.0)
                    } else if b.abs() < *delta {
                        (g - lambda * b.signum()).abs()
                    } else {
                        (g - lambda * b / delta).abs()
                    }
                })
                .fold(0.0, f64::max)
        }
        Penalty::GroupedLasso { lambda, groups } => {
            let r = x.residual(y, coef);
            groups
                .iter()
                .map(|g| {
                    let lg = lambda * (g.len() as f64).sqrt();
                    let s: Vec<f64> = g.iter().map(|&j| dot(x.column(j), &r)).collect();
                    let norm = g.iter().map(|&j| coef[j] * coef[j]).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        (s.iter().map(|v| v * v).sum::<f64>().sqrt() - lg).max(0.0)
                    } else {
                        g.iter()
                            .zip(&s)
                            .map(|(&j, sj)| (sj - lg * coef[j] / norm).abs())
                            .fold(0.0, f64::max)
                    }
                })
                .fold(0.0, f64::max)
        }
        Penalty::Lad { lambda } => lad_violation(x, y, *lambda, coef, intercept),
    };
    RegressionCertificate {
        feasible: violation <= tol,
        max_violation: violation,
    }
}

fn sign_violation(g: f64, b: f64, lambda: f64) -> f64 {
    if b == 0.0 {
        (g.abs() - lambda).max(0.0)
    } else {
        (g - lambda * b.signum()).abs()
    }
}

/// Largest KKT residual of a weighted lasso at `coef` with residual `r`.
pub fn lasso_violation(x: &DesignMatrix, r: &[f64], coef: &[f64], lambdas: &[f64]) -> f64 {
    (0..x.p())
        .map(|j| sign_violation(dot(x.column(j), r), coef[j], lambdas[j]))
        .fold(0.0, f64::max)
}

/// LAD(-lasso) optimality: with `Z` the rows fitted exactly, the signs of the
/// other rows must be balanced by multipliers `u ∈ [−1, 1]^Z`.
fn lad_violation(x: &DesignMatrix, y: &[f64], lambda: f64, coef: &[f64], intercept: f64) -> f64 {
    let p = x.p();
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-9 * scale;
    let fit = x.multiply(coef);
    let mut rows: Vec<(Vec<f64>, f64)> = (0..x.n())
        .map(|i| {
            let mut a = vec![1.0];
            a.extend((0..p).map(|j| x.get(i, j)));
            (a, y[i] - intercept - fit[i])
        })
        .collect();
    if lambda > 0.0 {
        for j in 0..p {
            let mut a = vec![0.0; p + 1];
            a[j + 1] = lambda;
            rows.push((a, -lambda * coef[j]));
        }
    }
    let mut h = vec![0.0; p + 1];
    let mut zero_cols: Vec<Vec<(usize, f64)>> = Vec::new();
    for (a, r) in &rows {
        if r.abs() > zero_tol {
            for (hk, ak) in h.iter_mut().zip(a) {
                *hk += r.signum() * ak;
            }
        } else {
            zero_cols.push(a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (k, v)).collect());
        }
    }
    if zero_cols.is_empty() {
        return h.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    box_least_squares(&zero_cols, &h, 1e-10, 200_000).residual_inf
}
