/// A term `weight · |b − at|` of a single-coordinate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub at: f64,
    pub weight: f64,
}

impl Kink {
    pub fn new(at: f64, weight: f64) -> Self {
        Kink { at, weight }
    }
}

/// `½·curvature·(b − center)² + Σ weight_k |b − at_k|`.
pub fn kinked_quadratic_value(curvature: f64, center: f64, kinks: &[Kink], b: f64) -> f64 {
    let d = b - center;
    0.5 * curvature * d * d + kinks.iter().map(|k| k.weight * (b - k.at).abs()).sum::<f64>()
}

/// Exact minimizer of [`kinked_quadratic_value`] for `curvature > 0`.
///
/// The derivative is piecewise linear with jumps at the kinks. Intervals
/// between consecutive sorted kinks are scanned for a zero crossing; if
/// none exists the minimizer is the kink whose subdifferential contains
/// zero. Returned kink locations are bit-identical to the input `at`.
/// Sorts `kinks` in place.
pub fn kinked_quadratic_argmin(curvature: f64, center: f64, kinks: &mut [Kink]) -> f64 {
    debug_assert!(curvature > 0.0);
    kinks.sort_unstable_by(|a, b| a.at.total_cmp(&b.at));
    let total: f64 = kinks.iter().map(|k| k.weight).sum();
    // Σ weight·sign(b − at) on the interval left of the current kink
    let mut slope = -total;
    let mut prev = f64::NEG_INFINITY;
    let mut k = 0;
    while k < kinks.len() {
        let at = kinks[k].at;
        let mut w = 0.0;
        while k < kinks.len() && kinks[k].at == at {
            w += kinks[k].weight;
            k += 1;
        }
        let b = center - slope / curvature;
        if b > prev && b < at {
            return b;
        }
        let lo = curvature * (at - center) + slope;
        if lo <= 0.0 && lo + 2.0 * w >= 0.0 {
            return at;
        }
        slope += 2.0 * w;
        prev = at;
    }
    let b = center - slope / curvature;
    if b > prev {
        return b;
    }
    // rounding put the crossing exactly on a kink; pick the best candidate
    let mut best = b;
    let mut best_val = kinked_quadratic_value(curvature, center, kinks, b);
    for kink in kinks.iter() {
        let v = kinked_quadratic_value(curvature, center, kinks, kink.at);
        if v <= best_val {
            best = kink.at;
            best_val = v;
        }
    }
    best
}

/// Contiguous index range `[start, end]` (inclusive) and its cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subrun {
    pub start: usize,
    pub end: usize,
    pub cost: f64,
}

/// Minimizes `left(a) + Σ_{i=a..=b} values[i] + right(b)` over all
/// `0 ≤ a ≤ b < values.len()` in linear time.
pub fn min_subrun(
    values: &[f64],
    left: impl Fn(usize) -> f64,
    right: impl Fn(usize) -> f64,
) -> Option<Subrun> {
    let mut best: Option<Subrun> = None;
    let mut run_start = 0;
    let mut run_cost = f64::INFINITY;
    for (b, &c) in values.iter().enumerate() {
        let fresh = left(b);
        if fresh <= run_cost {
            run_start = b;
            run_cost = fresh + c;
        } else {
            run_cost += c;
        }
        let total = run_cost + right(b);
        if best.map_or(true, |s| total < s.cost) {
            best = Some(Subrun {
                start: run_start,
                end: b,
                cost: total,
            });
        }
    }
    best
}
