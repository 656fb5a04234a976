//! Seeded synthetic data: equicorrelated regression and blocky test images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `β_j = (−1)^j exp(−2(j−1)/20)` for `j = 1..=p`.
pub fn true_coefficients(p: usize) -> Vec<f64> {
    (1..=p)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (-2.0 * (j as f64 - 1.0) / 20.0).exp()
        })
        .collect()
}

/// A regression dataset; `x` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    /// Noise scale solved from the signal-to-noise ratio.
    pub noise_scale: f64,
}

/// Predictors `√ρ·Z_0 + √(1−ρ)·Z_j` with shared `Z_0` per row, response
/// `Σ β_j X_j + k·Z` with `k` chosen so the population variance of the
/// signal is `snr` times that of the noise.
pub fn regression(n: usize, p: usize, rho: f64, snr: f64, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = true_coefficients(p);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let sum_sq: f64 = beta.iter().map(|v| v * v).sum();
    let sum: f64 = beta.iter().sum();
    let signal_var = (1.0 - rho) * sum_sq + rho * sum * sum;
    let noise_scale = (signal_var / snr).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let common: f64 = rng.sample(StandardNormal);
        let row: Vec<f64> = (0..p)
            .map(|_| a * common + b * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let signal: f64 = row.iter().zip(&beta).map(|(u, v)| u * v).sum();
        y.push(signal + noise_scale * rng.sample::<f64, _>(StandardNormal));
        x.push(row);
    }
    RegressionData { x, y, beta, noise_scale }
}

/// Truth and noisy observation of a `height × width` image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageData {
    pub height: usize,
    pub width: usize,
    pub truth: Vec<f64>,
    pub noisy: Vec<f64>,
}

fn add_noise(truth: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    truth.iter().map(|t| t + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Centered plus sign of arm width `⌈side/5⌉` and height 1 on a zero
/// background, with `N(0, σ²)` noise. The arms stop `max(1, side/8)` pixels
/// short of the border so the background stays connected.
pub fn plus_image(side: usize, sigma: f64, seed: u64) -> ImageData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arm = side.div_ceil(5);
    let lo = (side - arm) / 2;
    let margin = (side / 8).max(1).min(lo);
    let in_arm = |k: usize| k >= lo && k < lo + arm;
    let in_span = |k: usize| k >= margin && k + margin < side;
    let truth: Vec<f64> = (0..side * side)
        .map(|k| {
            let (r, c) = (k / side, k % side);
            let on = (in_arm(r) && in_span(c)) || (in_arm(c) && in_span(r));
            if on { 1.0 } else { 0.0 }
        })
        .collect();
    let noisy = add_noise(&truth, sigma, &mut rng);
    ImageData {
        height: side,
        width: side,
        truth,
        noisy,
    }
}

/// Axis-aligned rectangle, half-open.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.r0 < o.r1 && o.r0 < self.r1 && self.c0 < o.c1 && o.c0 < self.c1
    }
}

/// Attempts per rectangle before the placement is abandoned.
const PLACEMENT_ATTEMPTS: usize = 10_000;

/// `blocks` non-overlapping rectangles with heights uniform on `[1, 4]` on a
/// zero background. Sides are uniform on `[side/10, side/3]`; positions are
/// uniform and rejection-sampled until no two rectangles overlap. Returns
/// `None` when the rectangles cannot be placed.
pub fn blocks_image(side: usize, blocks: usize, sigma: f64, seed: u64) -> Option<ImageData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_len = (side / 10).max(1);
    let max_len = (side / 3).max(min_len);
    let mut placed: Vec<(Rect, f64)> = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let rect = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let h = rng.gen_range(min_len..=max_len);
            let w = rng.gen_range(min_len..=max_len);
            let r0 = rng.gen_range(0..=side - h);
            let c0 = rng.gen_range(0..=side - w);
            let rect = Rect {
                r0,
                r1: r0 + h,
                c0,
                c1: c0 + w,
            };
            (!placed.iter().any(|(o, _)| o.overlaps(&rect))).then_some(rect)
        })?;
        placed.push((rect, rng.gen_range(1.0..=4.0)));
    }
    let mut truth = vec![0.0; side * side];
    for (rect, level) in &placed {
        for r in rect.r0..rect.r1 {
            for c in rect.c0..rect.c1 {
                truth[r * side + c] = *level;
            }
        }
    }
    let noisy = add_noise(&truth, sigma, &mut rng);
    Some(ImageData {
        height: side,
        width: side,
        truth,
        noisy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn coefficients_alternate_and_decay() {
        let b = true_coefficients(3);
        assert_eq!(b[0], -1.0);
        assert!((b[1] - (-0.1f64).exp()).abs() < 1e-15);
        assert!(b[2] < 0.0 && b[2].abs() < b[1]);
    }

    #[test]
    fn regression_matches_correlation_and_snr() {
        let n = 10_000;
        for &rho in &[0.0, 0.5, 0.9] {
            let d = regression(n, 4, rho, 3.0, 7);
            let cols: Vec<Vec<f64>> = (0..4).map(|j| d.x.iter().map(|r| r[j]).collect()).collect();
            for j in 0..4 {
                for k in j + 1..4 {
                    assert!((corr(&cols[j], &cols[k]) - rho).abs() < 3.0 / (n as f64).sqrt());
                }
            }
            let signal: Vec<f64> = d.x.iter().map(|r| r.iter().zip(&d.beta).map(|(u, v)| u * v).sum()).collect();
            let noise: Vec<f64> = d.y.iter().zip(&signal).map(|(y, s)| y - s).collect();
            let var = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
            };
            let snr = var(&signal) / var(&noise);
            assert!((snr / 3.0 - 1.0).abs() < 0.1, "rho {rho}: snr {snr}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(regression(20, 3, 0.0, 3.0, 5), regression(20, 3, 0.0, 3.0, 5));
        assert_ne!(regression(20, 3, 0.0, 3.0, 5), regression(20, 3, 0.0, 3.0, 6));
        assert_eq!(blocks_image(32, 6, 1.0, 2), blocks_image(32, 6, 1.0, 2));
    }

    #[test]
    fn plus_arms_are_centered() {
        let img = plus_image(8, 0.0, 1);
        let ones = img.truth.iter().filter(|&&v| v == 1.0).count();
        // width 2: two rows and two columns of 6, overlapping in 4
        assert_eq!(ones, 2 * 6 + 2 * 6 - 4);
        assert_eq!(img.truth[3 * 8 + 1], 1.0);
        assert_eq!(img.truth[3 * 8], 0.0);
        assert_eq!(img.truth[2 * 8 + 1], 0.0);
        assert_eq!(img.noisy, img.truth);
    }

    #[test]
    fn blocks_do_not_overlap_and_have_valid_heights() {
        let img = blocks_image(64, 6, 0.0, 11).unwrap();
        let mut levels: Vec<f64> = img.truth.iter().copied().filter(|&v| v != 0.0).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels.len(), 6);
        assert!(levels.iter().all(|&v| (1.0..=4.0).contains(&v)));
        assert!(blocks_image(4, 50, 0.0, 1).is_none());
    }
}
