//! Numeric building blocks shared by every solver: soft-thresholding, design
//! matrices with standardization, weighted medians, the inner-product cache
//! used by the squared-error coordinate updates, and the exact minimizer of a
//! quadratic plus a sum of absolute-value kinks.

mod cache;
mod design;
mod median;
mod piecewise;

pub use cache::InnerProductCache;
pub use design::{standardize, CoefficientVector, DesignMatrix, ResponseVector};
pub use median::{weighted_median, WeightedSample};
pub(crate) use median::{median, weighted_median_pairs};
pub use piecewise::{kinked_quadratic_argmin, kinked_quadratic_value, min_subrun, Kink, Subrun};

/// Default convergence tolerance on the largest coefficient change in a sweep.
pub const CONVERGENCE_TOL: f64 = 1e-8;

/// Two parameter values closer than this are treated as equal (fused).
pub const EQUALITY_TOL: f64 = 1e-9;

/// Whether `a` sits on the plateau at `v`. Values merged along different
/// routes can disagree in the last bits, so a few ulps are allowed; moves
/// over a plateau are always checked for strict decrease.
#[inline]
pub(crate) fn same_level(a: f64, v: f64) -> bool {
    (a - v).abs() <= 16.0 * f64::EPSILON * (1.0 + v.abs())
}

/// `sign(z)·(|z| − gamma)_+`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
        for z in [-7.25, -1e-300, 0.0, 0.5, 1e12] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_is_odd(z in -1e6f64..1e6, g in 0.0f64..1e3) {
            prop_assert_eq!(soft_threshold(-z, g), -soft_threshold(z, g));
        }

        #[test]
        fn soft_threshold_is_a_contraction(z in -1e3f64..1e3, w in -1e3f64..1e3, g in 0.0f64..50.0) {
            let lhs = (soft_threshold(z, g) - soft_threshold(w, g)).abs();
            prop_assert!(lhs <= (z - w).abs() + 1e-12);
        }
    }
}
