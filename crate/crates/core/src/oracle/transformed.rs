use crate::error::{Error, Result};
use crate::lasso_family::{weighted_lasso_cd, CdOptions};
use crate::numeric::{soft_threshold, DesignMatrix};

/// Sweep cap for the transformed problem; its columns are highly correlated.
const ORACLE_MAX_SWEEPS: usize = 2_000_000;

/// Exact chain solution at `λ1 = 0` through the difference parameters
/// `θ_1 = β_1`, `θ_j = β_j − β_{j−1}`.
///
/// Then `β = Lθ` with `L` lower-triangular ones and the problem becomes a
/// lasso in `θ_2..θ_n` with penalty `λ2`. The unpenalized `θ_1` is
/// eliminated by centering the response and the columns of `L`, the lasso is
/// solved by coordinate descent to `1e-10`, and `β` is recovered by
/// cumulative sums.
pub fn flsa_oracle_transformed(y: &[f64], lambda2: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty signal".into()));
    }
    if !(lambda2 >= 0.0) {
        return Err(Error::InvalidParameter("lambda2 must be >= 0".into()));
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(vec![y[0]]);
    }
    // column j (θ_{j+1}) is the indicator of rows j..n, centered
    let columns: Vec<Vec<f64>> = (1..n)
        .map(|j| {
            let frac = (n - j) as f64 / n as f64;
            (0..n).map(|i| if i >= j { 1.0 - frac } else { -frac }).collect()
        })
        .collect();
    let x = DesignMatrix::from_columns(columns)?;
    let yc: Vec<f64> = y.iter().map(|v| v - mean_y).collect();
    let opts = CdOptions {
        tol: 1e-10,
        max_sweeps: ORACLE_MAX_SWEEPS,
        ..CdOptions::default()
    };
    let fit = weighted_lasso_cd(&x, &yc, &vec![lambda2; n - 1], None, &opts)?;
    if !fit.converged {
        return Err(Error::NotConverged {
            index: 0,
            limit: ORACLE_MAX_SWEEPS,
        });
    }
    let theta = fit.coefficients;
    // θ_1 = mean(y − Σ_j L_j θ_j), with L_j the raw indicator of rows j..n
    let shift: f64 = theta
        .iter()
        .enumerate()
        .map(|(k, t)| t * (n - 1 - k) as f64 / n as f64)
        .sum();
    let mut beta = Vec::with_capacity(n);
    let mut level = mean_y - shift;
    beta.push(level);
    for t in theta.iter() {
        level += t;
        beta.push(level);
    }
    Ok(beta)
}

/// Exact chain solution for any `λ1` by soft-thresholding the `λ1 = 0` one.
pub fn flsa_oracle(y: &[f64], lambda1: f64, lambda2: f64) -> Result<Vec<f64>> {
    Ok(flsa_oracle_transformed(y, lambda2)?
        .into_iter()
        .map(|b| soft_threshold(b, lambda1))
        .collect())
}
