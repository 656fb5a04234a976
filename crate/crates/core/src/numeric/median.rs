use crate::error::{Error, Result};

/// Values paired with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample values"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        Ok(WeightedSample { values, weights })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Minimizer of `Σ w_i |v_i − m|`; the lowest one when the minimizer is an
/// interval.
pub fn weighted_median(sample: &WeightedSample) -> Result<f64> {
    weighted_median_pairs(&mut sample.values.iter().copied().zip(sample.weights.iter().copied()).collect::<Vec<_>>())
        .ok_or(Error::EmptySample)
}

/// Unchecked variant over `(value, weight)` pairs; sorts `pairs` in place.
pub(crate) fn weighted_median_pairs(pairs: &mut [(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cum = 0.0;
    for &(v, w) in pairs.iter() {
        cum += w;
        // cum(≤ v) ≥ W/2 first holds at the lower end of the minimizing set
        if 2.0 * cum >= total {
            return Some(v);
        }
    }
    pairs.last().map(|p| p.0)
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = values.iter().map(|&v| (v, 1.0)).collect();
    weighted_median_pairs(&mut pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wm(v: &[f64], w: &[f64]) -> f64 {
        weighted_median(&WeightedSample::new(v.to_vec(), w.to_vec()).unwrap()).unwrap()
    }

    fn objective(v: &[f64], w: &[f64], m: f64) -> f64 {
        v.iter().zip(w).map(|(a, b)| b * (a - m).abs()).sum()
    }

    #[test]
    fn ordinary_median() {
        assert_eq!(wm(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn heavy_weight_wins() {
        // brute-force scan over the breakpoints {0, 10}: 0 → 10, 10 → 30
        assert_eq!(objective(&[0.0, 10.0], &[3.0, 1.0], 0.0), 10.0);
        assert_eq!(objective(&[0.0, 10.0], &[3.0, 1.0], 10.0), 30.0);
        assert_eq!(wm(&[0.0, 10.0], &[3.0, 1.0]), 0.0);
    }

    #[test]
    fn tie_returns_lower_endpoint() {
        assert_eq!(wm(&[10.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn empty_sample_errors() {
        let s = WeightedSample::new(vec![], vec![]).unwrap();
        assert_eq!(weighted_median(&s), Err(Error::EmptySample));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(WeightedSample::new(vec![1.0], vec![0.0]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force_argmin(
            pairs in prop::collection::vec((-20i32..20, 1u32..6), 1..=12)
        ) {
            let v: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 0.5).collect();
            let w: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let got = wm(&v, &w);
            // the objective is piecewise linear with breaks at the sample points,
            // so its minimum is attained at one of them
            let best = v.iter().map(|&m| objective(&v, &w, m)).fold(f64::INFINITY, f64::min);
            prop_assert!((objective(&v, &w, got) - best).abs() < 1e-12);
            let lowest = v.iter().copied()
                .filter(|&m| (objective(&v, &w, m) - best).abs() < 1e-12)
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(got, lowest);
        }
    }
}
