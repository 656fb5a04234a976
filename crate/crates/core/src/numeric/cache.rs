use crate::error::{Error, Result};

use super::{dot, DesignMatrix};

/// Inner products for squared-error coordinate descent.
///
/// `⟨x_j, y⟩` is computed once for every feature. When feature `k` enters
/// the model its inner products with all `p` features are computed and
/// stored, after which the partial-residual gradient
/// `⟨x_j, y⟩ − Σ_{k active} ⟨x_j, x_k⟩ β_k` needs no `O(n)` work.
#[derive(Debug, Clone)]
pub struct InnerProductCache {
    p: usize,
    xty: Vec<f64>,
    sq_norms: Vec<f64>,
    active: Vec<usize>,
    slot: Vec<Option<usize>>,
    // slot-major: gram[s * p + j] = ⟨x_j, x_active[s]⟩
    gram: Vec<f64>,
}

impl InnerProductCache {
    pub fn new(x: &DesignMatrix, y: &[f64]) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                x.n()
            )));
        }
        let p = x.p();
        Ok(InnerProductCache {
            p,
            xty: x.columns().map(|c| dot(c, y)).collect(),
            sq_norms: (0..p).map(|j| x.column_sq_norm(j)).collect(),
            active: Vec::new(),
            slot: vec![None; p],
            gram: Vec::new(),
        })
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn sq_norm(&self, j: usize) -> f64 {
        self.sq_norms[j]
    }

    pub fn active_set(&self) -> &[usize] {
        &self.active
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.slot[k].is_some()
    }

    /// Adds feature `k`, computing `⟨x_j, x_k⟩` for every `j`.
    pub fn activate(&mut self, x: &DesignMatrix, k: usize) -> Result<()> {
        if self.slot[k].is_some() {
            return Err(Error::AlreadyActive(k));
        }
        let xk = x.column(k);
        self.slot[k] = Some(self.active.len());
        self.active.push(k);
        self.gram.extend(x.columns().map(|c| dot(c, xk)));
        Ok(())
    }

    /// Cached `⟨x_j, x_k⟩`, available once either feature is active.
    pub fn cross(&self, j: usize, k: usize) -> Option<f64> {
        match (self.slot[k], self.slot[j]) {
            (Some(s), _) => Some(self.gram[s * self.p + j]),
            (None, Some(s)) => Some(self.gram[s * self.p + k]),
            _ => None,
        }
    }

    /// `Σ_i x_ij (y_i − ỹ_i)` for the current fit, using only cached values.
    /// Coefficients of inactive features must be zero.
    #[inline]
    pub fn gradient(&self, j: usize, beta: &[f64]) -> f64 {
        let mut g = self.xty[j];
        for (s, &k) in self.active.iter().enumerate() {
            let b = beta[k];
            if b != 0.0 {
                g -= self.gram[s * self.p + j] * b;
            }
        }
        g
    }

    /// Largest relative deviation of the cached values from direct
    /// recomputation.
    pub fn verify(&self, x: &DesignMatrix, y: &[f64]) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        let mut worst: f64 = 0.0;
        for j in 0..self.p {
            worst = worst.max(rel(self.xty[j], dot(x.column(j), y)));
            for &k in &self.active {
                let direct = dot(x.column(j), x.column(k));
                worst = worst.max(rel(self.cross(j, k).unwrap(), direct));
            }
        }
        worst
    }
}
