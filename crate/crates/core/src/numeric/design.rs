use std::ops::Deref;

use crate::error::{Error, Result};

use super::all_finite;

/// Dense `n × p` predictor matrix stored column-major.
///
/// `column_means` and `column_scales` record the affine map applied by
/// [`standardize`], so that `raw[i][j] = values[i][j] * scale[j] + mean[j]`.
/// A matrix built directly from raw values has means 0 and scales 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
    column_means: Vec<f64>,
    column_scales: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::DimensionMismatch("design matrix has no columns".into()));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::DimensionMismatch("design matrix has no rows".into()));
        }
        let mut values = Vec::with_capacity(n * p);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            values.extend(col);
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(DesignMatrix {
            values,
            n,
            p,
            column_means: vec![0.0; p],
            column_scales: vec![1.0; p],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("design matrix has no rows".into()));
        }
        let p = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        let columns = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::from_columns(columns)
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for j in 0..n {
            values[j * n + j] = 1.0;
        }
        DesignMatrix {
            values,
            n,
            p: n,
            column_means: vec![0.0; n],
            column_scales: vec![1.0; n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_scales(&self) -> &[f64] {
        &self.column_scales
    }

    pub fn column_sq_norm(&self, j: usize) -> f64 {
        self.column(j).iter().map(|v| v * v).sum()
    }

    /// `X·beta`.
    pub fn multiply(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.column(j)) {
                    *o += x * b;
                }
            }
        }
        out
    }

    /// `y − X·beta`.
    pub fn residual(&self, y: &[f64], beta: &[f64]) -> Vec<f64> {
        let fit = self.multiply(beta);
        y.iter().zip(fit).map(|(a, b)| a - b).collect()
    }

    /// Columns with mean 0 and unit sum of squares.
    pub fn is_standardized(&self) -> bool {
        self.first_unstandardized_column().is_none()
    }

    pub fn check_standardized(&self) -> Result<()> {
        match self.first_unstandardized_column() {
            None => Ok(()),
            Some(j) => Err(Error::NotStandardized(j)),
        }
    }

    fn first_unstandardized_column(&self) -> Option<usize> {
        let n = self.n as f64;
        (0..self.p).find(|&j| {
            let col = self.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let ss: f64 = col.iter().map(|v| v * v).sum();
            mean.abs() >= 1e-12 * n || (ss - 1.0).abs() >= 1e-10
        })
    }

    /// Maps coefficients fitted on this (standardized) matrix back to the
    /// raw scale: returns `(intercept_shift, raw_coefficients)` where the
    /// raw-scale prediction is `Σ raw_j x_raw_j − intercept_shift`.
    pub fn to_raw_coefficients(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let raw: Vec<f64> = beta
            .iter()
            .zip(&self.column_scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift = raw.iter().zip(&self.column_means).map(|(b, m)| b * m).sum();
        (shift, raw)
    }

    /// Row-major copy, used by I/O code.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.p).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Sub-matrix made of the given columns (means/scales carried along).
    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(cols.len() * self.n);
        for &j in cols {
            values.extend_from_slice(self.column(j));
        }
        DesignMatrix {
            values,
            n: self.n,
            p: cols.len(),
            column_means: cols.iter().map(|&j| self.column_means[j]).collect(),
            column_scales: cols.iter().map(|&j| self.column_scales[j]).collect(),
        }
    }
}

/// Centers every column and scales it to unit sum of squares.
///
/// The recorded means and scales compose with any transform already recorded
/// on `raw`, so standardizing a standardized matrix is the identity.
pub fn standardize(raw: &DesignMatrix) -> Result<DesignMatrix> {
    let n = raw.n;
    let mut values = Vec::with_capacity(raw.values.len());
    let mut means = Vec::with_capacity(raw.p);
    let mut scales = Vec::with_capacity(raw.p);
    for j in 0..raw.p {
        let col = raw.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::ConstantColumn(j));
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let scale = ss.sqrt();
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::ConstantColumn(j));
        }
        values.extend(col.iter().map(|v| (v - mean) / scale));
        means.push(raw.column_means[j] + raw.column_scales[j] * mean);
        scales.push(raw.column_scales[j] * scale);
    }
    Ok(DesignMatrix {
        values,
        n,
        p: raw.p,
        column_means: means,
        column_scales: scales,
    })
}

/// Length-`n` response with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector(Vec<f64>);

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch("empty response".into()));
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite("response"));
        }
        Ok(ResponseVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ResponseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Length-`p` coefficient vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !all_finite(&values) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(CoefficientVector(values))
    }

    pub fn zeros(p: usize) -> Self {
        CoefficientVector(vec![0.0; p])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CoefficientVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(c: CoefficientVector) -> Vec<f64> {
        c.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_one_two_three() {
        let raw = DesignMatrix::from_columns(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let x = standardize(&raw).unwrap();
        let h = 0.5f64.sqrt();
        for (got, want) in x.column(0).iter().zip([-h, 0.0, h]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(x.column_means(), &[2.0]);
        assert!((x.column_scales()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(x.is_standardized());
    }

    #[test]
    fn standardize_is_idempotent() {
        let raw = DesignMatrix::from_columns(vec![
            vec![0.3, -1.0, 4.0, 2.5, 7.0],
            vec![1.0, 1.0, 0.0, 2.0, -3.0],
        ])
        .unwrap();
        let once = standardize(&raw).unwrap();
        let twice = standardize(&once).unwrap();
        for j in 0..2 {
            for (a, b) in once.column(j).iter().zip(twice.column(j)) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((once.column_scales()[j] - twice.column_scales()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_rejected() {
        let raw = DesignMatrix::from_columns(vec![vec![1.0, 2.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(standardize(&raw), Err(Error::ConstantColumn(1)));
    }

    #[test]
    fn raw_coefficients_reproduce_predictions() {
        let raw = DesignMatrix::from_columns(vec![vec![1.0, 4.0, 2.0], vec![0.0, 1.0, 5.0]]).unwrap();
        let x = standardize(&raw).unwrap();
        let beta = [0.7, -1.3];
        let fit_std = x.multiply(&beta);
        let (shift, b_raw) = x.to_raw_coefficients(&beta);
        let fit_raw: Vec<f64> = raw.multiply(&b_raw).iter().map(|v| v - shift).collect();
        for (a, b) in fit_std.iter().zip(fit_raw) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DesignMatrix::from_columns(vec![vec![1.0, f64::NAN]]).is_err());
        assert!(ResponseVector::new(vec![f64::INFINITY]).is_err());
    }
}
