use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::DesignMatrix;

/// Largest number of row subsets the enumeration will visit.
const MAX_SUBSETS: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LadOracleResult {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut c: u64 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    c
}

/// Exact minimizer of `Σ|y_i − b0 − x_iᵀβ| + λ‖β‖₁` by enumerating vertices.
///
/// The criterion is a sum of absolute values of affine functions of
/// `θ = (b0, β)`: the data rows and, for `λ > 0`, the rows `λ e_j` with
/// target 0. A minimizer lies where `p + 1` independent rows are fitted
/// exactly, so every such subset is solved and the best point kept. Only
/// practical for small problems.
pub fn lad_oracle(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<LadOracleResult> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("x has {n} rows, y has {}", y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter("lambda must be finite and >= 0".into()));
    }
    let q = p + 1;
    let mut rows: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|i| {
            let mut a = vec![1.0];
            a.extend((0..p).map(|j| x.get(i, j)));
            (a, y[i])
        })
        .collect();
    if lambda > 0.0 {
        for j in 0..p {
            let mut a = vec![0.0; q];
            a[j + 1] = lambda;
            rows.push((a, 0.0));
        }
    }
    let m = rows.len();
    if m < q {
        return Err(Error::RankDeficient);
    }
    if binomial(m, q) > MAX_SUBSETS {
        return Err(Error::InvalidParameter(format!(
            "{} row subsets exceed the enumeration limit",
            binomial(m, q)
        )));
    }
    let objective = |theta: &[f64]| {
        rows.iter()
            .map(|(a, t)| (t - a.iter().zip(theta).map(|(u, v)| u * v).sum::<f64>()).abs())
            .sum::<f64>()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..q).collect();
    loop {
        let a = DMatrix::from_fn(q, q, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(q, |r, _| rows[idx[r]].1);
        let lu = a.lu();
        if lu.determinant().abs() > 1e-10 {
            if let Some(theta) = lu.solve(&b) {
                let theta: Vec<f64> = theta.iter().copied().collect();
                let f = objective(&theta);
                if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                    best = Some((f, theta));
                }
            }
        }
        // next subset in lexicographic order
        let mut k = q;
        while k > 0 && idx[k - 1] == m - q + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for t in k..q {
            idx[t] = idx[t - 1] + 1;
        }
    }
    let (objective, theta) = best.ok_or(Error::RankDeficient)?;
    Ok(LadOracleResult {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        objective,
    })
}
