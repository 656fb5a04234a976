//! Fused lasso signal approximator on a chain:
//!
//! `½ Σ (y_i − β_i)² + λ1 Σ |β_i| + λ2 Σ_{i>1} |β_i − β_{i−1}|`.
//!
//! Solutions are traced along an increasing λ2 grid starting from the
//! λ2 = 0 solution `S(y, λ1)`. At each grid value the descent and fusion
//! cycles run until nothing moves; neighbouring coefficients that end up
//! equal and nonzero are then merged into one weighted observation for the
//! rest of the path.
//!
//! Pairwise fusion alone cannot always shift a longer run of equal values,
//! so once the cycles are quiet every plateau is also checked for a
//! contiguous sub-run whose joint shift lowers the criterion. When no such
//! sub-run exists the point is optimal, which makes the procedure exact.

mod path;
mod state;

pub use path::{
    flsa_solve, flsa_solve_path, flsa_solve_path_with, flsa_visit_path, soft_threshold_path, A1Diagnostic,
    FlsaConfig, FlsaPath, FlsaSolution, PathSchedule,
};
pub use state::FusionState1D;

/// Criterion value on the original (uncollapsed) data.
pub fn flsa_objective(y: &[f64], beta: &[f64], lambda1: f64, lambda2: f64) -> f64 {
    let fit: f64 = y.iter().zip(beta).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let tv: f64 = beta.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fit + lambda1 * l1 + lambda2 * tv
}
