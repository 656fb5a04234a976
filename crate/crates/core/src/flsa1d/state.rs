use std::ops::Range;

use crate::error::{Error, Result};
use crate::numeric::{all_finite, kinked_quadratic_argmin, min_subrun, same_level, Kink, EQUALITY_TOL};

/// Collapsed chain problem.
///
/// After `m` fusions the chain has `n − m` units. Unit `k` stands for the
/// original indices `segments[k]`, carries weight `w[k] = |segments[k]|` and
/// response `yw[k]`, the mean of `y` over its segment. Up to a constant the
/// criterion is
/// `Σ w_k (½(β_k − yw_k)² + λ1|β_k|) + λ2 Σ |β_k − β_{k−1}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionState1D {
    yw: Vec<f64>,
    w: Vec<f64>,
    segments: Vec<Range<usize>>,
    m: usize,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl FusionState1D {
    pub fn new(y: &[f64], lambda1: f64, lambda2: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::DimensionMismatch("empty signal".into()));
        }
        if !all_finite(y) {
            return Err(Error::NonFinite("signal"));
        }
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(FusionState1D {
            yw: y.to_vec(),
            w: vec![1.0; y.len()],
            segments: (0..y.len()).map(|i| i..i + 1).collect(),
            m: 0,
            lambda1,
            lambda2,
        })
    }

    /// Number of units.
    pub fn len(&self) -> usize {
        self.yw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yw.is_empty()
    }

    /// Original signal length.
    pub fn original_len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn yw(&self) -> &[f64] {
        &self.yw
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    pub fn fusions(&self) -> usize {
        self.m
    }

    /// Unit coefficients mapped back to the original indices.
    pub fn expand(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.original_len());
        for (seg, &b) in self.segments.iter().zip(beta) {
            out.extend(std::iter::repeat(b).take(seg.len()));
        }
        out
    }

    /// Collapsed criterion without the constant dropped by collapsing.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let units: f64 = (0..self.len()).map(|u| self.unit_value(u, beta[u])).sum();
        units + self.lambda2 * beta.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    }

    #[inline]
    fn unit_value(&self, u: usize, b: f64) -> f64 {
        let d = b - self.yw[u];
        self.w[u] * (0.5 * d * d + self.lambda1 * b.abs())
    }

    /// Terms of the criterion touched by units `s..=e`, either at their
    /// current values or all set to `value`.
    fn block_local(&self, beta: &[f64], s: usize, e: usize, value: Option<f64>) -> f64 {
        let val = |u: usize| value.unwrap_or(beta[u]);
        let mut f: f64 = (s..=e).map(|u| self.unit_value(u, val(u))).sum();
        for u in s + 1..=e {
            f += self.lambda2 * (val(u) - val(u - 1)).abs();
        }
        if s > 0 {
            f += self.lambda2 * (val(s) - beta[s - 1]).abs();
        }
        if e + 1 < self.len() {
            f += self.lambda2 * (beta[e + 1] - val(e)).abs();
        }
        f
    }

    /// Best common value for units `s..=e` with everything else fixed.
    fn block_argmin(&self, beta: &[f64], s: usize, e: usize) -> f64 {
        let (mut wsum, mut wy) = (0.0, 0.0);
        for u in s..=e {
            wsum += self.w[u];
            wy += self.w[u] * self.yw[u];
        }
        let mut kinks = [Kink::new(0.0, 0.0); 3];
        let mut count = 0;
        let mut push = |k: Kink| {
            kinks[count] = k;
            count += 1;
        };
        if self.lambda1 > 0.0 {
            push(Kink::new(0.0, self.lambda1 * wsum));
        }
        if self.lambda2 > 0.0 {
            if s > 0 {
                push(Kink::new(beta[s - 1], self.lambda2));
            }
            if e + 1 < self.len() {
                push(Kink::new(beta[e + 1], self.lambda2));
            }
        }
        kinked_quadratic_argmin(wsum, wy / wsum, &mut kinks[..count])
    }

    /// Exact minimization over `β_i` alone; returns the new value.
    ///
    /// The criterion in `β_i` is a weighted quadratic plus kinks at 0 and at
    /// the two neighbouring values.
    pub fn descent_step(&self, beta: &mut [f64], i: usize) -> f64 {
        let b = self.block_argmin(beta, i, i);
        beta[i] = b;
        b
    }

    /// Tries moving units `i − 1` and `i` to a common value; applied only if
    /// the criterion strictly decreases.
    pub fn fusion_step(&self, beta: &mut [f64], i: usize) -> bool {
        debug_assert!(i >= 1);
        self.try_block(beta, i - 1, i)
    }

    /// Moves units `s..=e` to their best common value if that strictly
    /// decreases the criterion.
    pub(crate) fn try_block(&self, beta: &mut [f64], s: usize, e: usize) -> bool {
        let gamma = self.block_argmin(beta, s, e);
        if (s..=e).all(|u| beta[u] == gamma) {
            return false;
        }
        let before = self.block_local(beta, s, e, None);
        let after = self.block_local(beta, s, e, Some(gamma));
        if after < before - 1e-14 * before.abs().max(1.0) {
            beta[s..=e].fill(gamma);
            true
        } else {
            false
        }
    }

    /// Looks inside every run of equal values for a contiguous sub-run whose
    /// joint shift up or down has a negative directional derivative, and
    /// moves it. Returns whether anything moved.
    pub(crate) fn plateau_pass(&self, beta: &mut [f64]) -> bool {
        let n = self.len();
        let (l1, l2) = (self.lambda1, self.lambda2);
        let scale = 1.0
            + l2
            + self
                .w
                .iter()
                .zip(&self.yw)
                .map(|(w, y)| w * (y.abs() + l1))
                .fold(0.0, f64::max);
        let eps = 1e-12 * scale;
        let mut moved = false;
        let mut up = Vec::new();
        let mut down = Vec::new();
        let mut a = 0;
        while a < n {
            let v = beta[a];
            let mut b = a;
            while b + 1 < n && same_level(beta[b + 1], v) {
                b += 1;
            }
            if b > a {
                up.clear();
                down.clear();
                let dup = if v < 0.0 { -1.0 } else { 1.0 };
                let ddown = if v > 0.0 { -1.0 } else { 1.0 };
                for u in a..=b {
                    let g = self.w[u] * (v - self.yw[u]);
                    up.push(g + l1 * self.w[u] * dup);
                    down.push(-g + l1 * self.w[u] * ddown);
                }
                let outer = |side: Option<f64>, dir: f64| side.map_or(0.0, |nb| dir * l2 * (v - nb).signum());
                let left_nb = (a > 0).then(|| beta[a - 1]);
                let right_nb = (b + 1 < n).then(|| beta[b + 1]);
                let mut best = None;
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
                    moved |= self.try_block(beta, a + s, a + e);
                }
            }
            a = b + 1;
        }
        moved
    }

    /// Merges every maximal run of equal (within the equality tolerance)
    /// nonzero neighbours into one unit. Returns the new state, its
    /// coefficients, and the largest number of units merged into one.
    pub fn collapse(&self, beta: &[f64]) -> (FusionState1D, Vec<f64>, usize) {
        let n = self.len();
        let mut yw = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut segments = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        let mut largest = 1;
        let mut a = 0;
        while a < n {
            let mut b = a;
            if beta[a] != 0.0 {
                while b + 1 < n && beta[b + 1] != 0.0 && (beta[b + 1] - beta[b]).abs() <= EQUALITY_TOL {
                    b += 1;
                }
            }
            let (mut ws, mut wy, mut wb) = (0.0, 0.0, 0.0);
            for u in a..=b {
                ws += self.w[u];
                wy += self.w[u] * self.yw[u];
                wb += self.w[u] * beta[u];
            }
            yw.push(wy / ws);
            w.push(ws);
            segments.push(self.segments[a].start..self.segments[b].end);
            out.push(if a == b { beta[a] } else { wb / ws });
            largest = largest.max(b - a + 1);
            a = b + 1;
        }
        let merged = n - yw.len();
        (
            FusionState1D {
                yw,
                w,
                segments,
                m: self.m + merged,
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            },
            out,
            largest,
        )
    }
}
