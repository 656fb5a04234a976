use crate::numeric::{soft_threshold, CoefficientVector, DesignMatrix, InnerProductCache};

use super::{berhu, CdOptions, FitResult};

/// Closed-form coordinate (or block) update.
pub(crate) enum Rule<'a> {
    Lasso { lambdas: &'a [f64] },
    ElasticNet { lambda1: f64, lambda2: f64 },
    /// `λ c` with `c ≥ 0`.
    NonNegative { lambda: f64 },
    Berhu { lambda: f64, delta: f64 },
    /// Blocks with orthonormal columns; `lambdas[g] = λ√p_g`.
    Group { groups: &'a [Vec<usize>], lambdas: Vec<f64> },
}

/// Minimizer over `b` of `½ a b² − z b + pen(b)` for a single coordinate,
/// where `z = ⟨x_j, r⟩ + a β_j` and `a = ‖x_j‖²`.
fn coordinate(rule: &Rule, j: usize, z: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    match *rule {
        Rule::Lasso { lambdas } => soft_threshold(z, lambdas[j]) / a,
        Rule::ElasticNet { lambda1, lambda2 } => soft_threshold(z, lambda1) / (a + lambda2),
        Rule::NonNegative { lambda } => (z - lambda).max(0.0) / a,
        Rule::Berhu { lambda, delta } => {
            // minimizer lies in the |b| < δ piece or the quadratic piece
            let inner = soft_threshold(z, lambda) / a;
            let outer = z / (a + lambda / delta);
            let h = |b: f64| 0.5 * a * b * b - z * b + lambda * berhu(b, delta);
            if h(outer) < h(inner) {
                outer
            } else {
                inner
            }
        }
        Rule::Group { .. } => unreachable!("group updates are blockwise"),
    }
}

pub(crate) fn run(
    x: &DesignMatrix,
    y: &[f64],
    rule: &Rule,
    mut beta: Vec<f64>,
    opts: &CdOptions,
    objective: impl Fn(&[f64]) -> f64,
) -> FitResult {
    let p = x.p();
    let mut cache = InnerProductCache::new(x, y).expect("dimensions checked by caller");
    for j in 0..p {
        if beta[j] != 0.0 {
            cache.activate(x, j).expect("fresh cache");
        }
    }
    let singletons: Vec<Vec<usize>> = match rule {
        Rule::Group { .. } => Vec::new(),
        _ => (0..p).map(|j| vec![j]).collect(),
    };
    let blocks: &[Vec<usize>] = match rule {
        Rule::Group { groups, .. } => groups,
        _ => &singletons,
    };

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut zs = Vec::new();
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for (g, block) in blocks.iter().enumerate() {
            zs.clear();
            zs.extend(block.iter().map(|&j| cache.gradient(j, &beta) + cache.sq_norm(j) * beta[j]));
            let mut apply = |j: usize, new: f64, cache: &mut InnerProductCache, beta: &mut [f64]| {
                let old = beta[j];
                if new != old {
                    if !cache.is_active(j) {
                        cache.activate(x, j).expect("inactive feature");
                    }
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            };
            match rule {
                Rule::Group { lambdas, .. } => {
                    let norm = zs.iter().map(|z| z * z).sum::<f64>().sqrt();
                    let shrink = if norm > lambdas[g] {
                        1.0 - lambdas[g] / norm
                    } else {
                        0.0
                    };
                    for (&j, &z) in block.iter().zip(zs.iter()) {
                        apply(j, shrink * z, &mut cache, &mut beta);
                    }
                }
                _ => {
                    let j = block[0];
                    let new = coordinate(rule, j, zs[0], cache.sq_norm(j));
                    apply(j, new, &mut cache, &mut beta);
                }
            }
        }
        if opts.record_objective {
            trace.push(objective(&beta));
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("coordinate descent stopped after {sweeps} sweeps without converging");
    }
    let value = objective(&beta);
    FitResult {
        coefficients: CoefficientVector::new(beta).expect("updates stay finite"),
        intercept: 0.0,
        iterations: sweeps,
        converged,
        objective: value,
        objective_trace: trace,
    }
}
