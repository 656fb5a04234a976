use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::numeric::{soft_threshold, standardize};

fn random_problem(seed: u64, n: usize, p: usize) -> (DesignMatrix, ResponseVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let x = standardize(&DesignMatrix::from_columns(cols).unwrap()).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    (x, ResponseVector::new(y).unwrap())
}

/// Orthonormal, centered columns built from Hadamard rows of length 8.
fn orthogonal_design(p: usize) -> DesignMatrix {
    let h = |i: usize, j: usize| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let cols = (1..=p)
        .map(|j| (0..8).map(|i| h(i, j) / 8f64.sqrt()).collect())
        .collect();
    DesignMatrix::from_columns(cols).unwrap()
}

const Y8: [f64; 8] = [1.2, -0.4, 2.5, 0.3, -1.7, 0.9, 0.1, -2.2];

fn xty(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
    x.columns().map(|c| dot(c, y)).collect()
}

fn fit(x: DesignMatrix, y: &[f64], penalty: Penalty) -> FitResult {
    let prob = SeparableProblem::new(x, ResponseVector::new(y.to_vec()).unwrap(), penalty).unwrap();
    solve(&prob, None, &CdOptions::with_tol(1e-12)).unwrap()
}

#[test]
fn single_predictor_lasso_is_soft_threshold() {
    let x = standardize(&DesignMatrix::from_columns(vec![vec![1.0, 2.0, 4.0, 7.0]]).unwrap()).unwrap();
    let y = [0.5, 1.0, 2.5, 2.0];
    let b = xty(&x, &y)[0];
    let f = fit(x, &y, Penalty::Lasso { lambda: 0.3 });
    assert!((f.coefficients[0] - soft_threshold(b, 0.3)).abs() < 1e-12);
}

#[test]
fn orthogonal_lasso_soft_thresholds_univariate_fits() {
    let x = orthogonal_design(3);
    let b = xty(&x, &Y8);
    let f = fit(x, &Y8, Penalty::Lasso { lambda: 0.8 });
    for j in 0..3 {
        assert!((f.coefficients[j] - soft_threshold(b[j], 0.8)).abs() < 1e-12);
    }
}

#[test]
fn elastic_net_shrinks_proportionally() {
    let x = orthogonal_design(3);
    let b = xty(&x, &Y8);
    let f = fit(x.clone(), &Y8, Penalty::ElasticNet { lambda1: 0.5, lambda2: 1.5 });
    for j in 0..3 {
        assert!((f.coefficients[j] - soft_threshold(b[j], 0.5) / 2.5).abs() < 1e-12);
    }
    let (x, y) = random_problem(3, 20, 8);
    let lasso = fit(x.clone(), &y, Penalty::Lasso { lambda: 0.4 });
    let enet = fit(x, &y, Penalty::ElasticNet { lambda1: 0.4, lambda2: 0.0 });
    assert_eq!(lasso.coefficients, enet.coefficients);
}

#[test]
fn garotte_recovers_least_squares_and_thresholds() {
    let x = orthogonal_design(3);
    let f = fit(x.clone(), &Y8, Penalty::Garotte { lambda: 0.0 });
    for c in f.coefficients.iter() {
        assert!((c - 1.0).abs() < 1e-12);
    }
    let b = xty(&x, &Y8);
    let big = b.iter().map(|v| v * v).fold(0.0, f64::max);
    let f = fit(x.clone(), &Y8, Penalty::Garotte { lambda: big * (1.0 + 1e-12) });
    assert!(f.coefficients.iter().all(|&c| c == 0.0));
    // orthogonal closed form c_j = (1 − λ/β̂_j²)_+
    let f = fit(x, &Y8, Penalty::Garotte { lambda: 0.2 });
    for j in 0..3 {
        let want = (1.0 - 0.2 / (b[j] * b[j])).max(0.0);
        assert!((f.coefficients[j] - want).abs() < 1e-10);
    }
}

#[test]
fn garotte_rejects_p_above_n() {
    let (x, y) = random_problem(1, 5, 7);
    let err = SeparableProblem::new(x, y, Penalty::Garotte { lambda: 0.1 }).unwrap_err();
    assert_eq!(err, Error::RankDeficient);
}

#[test]
fn berhu_limits() {
    let (x, y) = random_problem(7, 20, 4);
    let lasso = fit(x.clone(), &y, Penalty::Lasso { lambda: 0.3 });
    let wide = fit(x.clone(), &y, Penalty::Berhu { lambda: 0.3, delta: 1e6 });
    for (a, b) in lasso.coefficients.iter().zip(wide.coefficients.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
    // tiny delta: coefficients past λ + δ take the ridge-style branch
    let ridge_like = fit(orthogonal_design(3), &Y8, Penalty::Berhu { lambda: 0.3, delta: 1e-9 });
    let b = xty(&orthogonal_design(3), &Y8);
    for j in 0..3 {
        let want = if b[j].abs() >= 0.3 + 1e-9 {
            b[j] / (1.0 + 0.3 / 1e-9)
        } else {
            soft_threshold(b[j], 0.3)
        };
        assert!((ridge_like.coefficients[j] - want).abs() < 1e-12);
    }
}

#[test]
fn grouped_lasso_closed_forms() {
    let x = orthogonal_design(4);
    let b = xty(&x, &Y8);
    let groups = vec![vec![0, 1], vec![2, 3]];
    let f = fit(x.clone(), &Y8, Penalty::GroupedLasso { lambda: 0.0, groups: groups.clone() });
    for j in 0..4 {
        assert!((f.coefficients[j] - b[j]).abs() < 1e-12);
    }
    let prob = SeparableProblem::new(
        x,
        ResponseVector::new(Y8.to_vec()).unwrap(),
        Penalty::GroupedLasso { lambda: 1.0, groups },
    )
    .unwrap();
    let lmax = prob.lambda_max();
    let f = solve(&prob.with_primary(lmax * (1.0 + 1e-12)).unwrap(), None, &CdOptions::default()).unwrap();
    assert!(f.coefficients.iter().all(|&c| c == 0.0));
}

#[test]
fn grouped_lasso_rejects_correlated_group() {
    let (x, y) = random_problem(2, 12, 4);
    let prob = SeparableProblem::new(
        x,
        y,
        Penalty::GroupedLasso { lambda: 0.1, groups: vec![vec![0, 1], vec![2, 3]] },
    )
    .unwrap();
    assert_eq!(solve(&prob, None, &CdOptions::default()), Err(Error::NonOrthonormalGroup(0)));
}

#[test]
fn unstandardized_design_is_rejected() {
    let x = DesignMatrix::from_columns(vec![vec![1.0, 2.0, 3.0]]).unwrap();
    let prob = SeparableProblem::new(x, ResponseVector::new(vec![1.0, 0.0, 2.0]).unwrap(), Penalty::Lasso { lambda: 0.1 })
        .unwrap();
    assert_eq!(lasso_cd(&prob, None, 1e-8), Err(Error::NotStandardized(0)));
}

#[test]
fn unidentified_lasso_is_rejected() {
    let (x, y) = random_problem(4, 5, 8);
    let prob = SeparableProblem::new(x, y, Penalty::Lasso { lambda: 0.0 }).unwrap();
    assert!(matches!(lasso_cd(&prob, None, 1e-8), Err(Error::InvalidParameter(_))));
}

#[test]
fn intercept_only_lad_is_median() {
    let x = DesignMatrix::from_columns(vec![vec![1.0; 5]]).unwrap();
    let y = [3.0, -1.0, 8.0, 2.0, 0.5];
    let f = fit(x, &y, Penalty::Lad { lambda: 0.0 });
    let fitted = f.intercept + f.coefficients[0];
    assert!((fitted - 2.0).abs() < 1e-12);
}

#[test]
fn lad_zero_column_is_degenerate() {
    let x = DesignMatrix::from_columns(vec![vec![1.0, 2.0, 3.0], vec![0.0; 3]]).unwrap();
    let prob = SeparableProblem::new(x, ResponseVector::new(vec![1.0, 2.0, 2.0]).unwrap(), Penalty::Lad { lambda: 0.0 })
        .unwrap();
    assert_eq!(lad_cd(&prob, None, 1e-8), Err(Error::DegenerateColumn(1)));
}

#[test]
fn lad_lasso_large_penalty_gives_median_intercept() {
    let (x, y) = random_problem(9, 15, 3);
    let f = fit(x, &y, Penalty::Lad { lambda: 1e6 });
    assert!(f.coefficients.iter().all(|&b| b == 0.0));
    let med = crate::numeric::median(&y).unwrap();
    assert_eq!(f.intercept, med);
}

#[test]
fn lad_outlier_resistant_fit() {
    // y = 2x + 1 exactly except one gross outlier; LAD ignores it
    let xs: Vec<f64> = (0..9).map(|i| i as f64).collect();
    let mut y: Vec<f64> = xs.iter().map(|v| 2.0 * v + 1.0).collect();
    y[4] = 100.0;
    let x = DesignMatrix::from_columns(vec![xs]).unwrap();
    let f = fit(x, &y, Penalty::Lad { lambda: 0.0 });
    assert!((f.coefficients[0] - 2.0).abs() < 1e-9);
    assert!((f.intercept - 1.0).abs() < 1e-9);
}

#[test]
fn objective_field_matches_criterion() {
    let (x, y) = random_problem(11, 20, 6);
    for penalty in [
        Penalty::Lasso { lambda: 0.2 },
        Penalty::ElasticNet { lambda1: 0.2, lambda2: 0.7 },
        Penalty::Garotte { lambda: 0.1 },
        Penalty::Berhu { lambda: 0.3, delta: 0.2 },
        Penalty::Lad { lambda: 0.4 },
    ] {
        let prob = SeparableProblem::new(x.clone(), y.clone(), penalty).unwrap();
        let f = solve(&prob, None, &CdOptions::default()).unwrap();
        assert!(f.converged);
        let direct = prob.objective(&f.coefficients, f.intercept);
        assert!((direct - f.objective).abs() < 1e-10);
    }
}

#[test]
fn path_starts_at_zero_and_single_point_matches_direct_call() {
    let (x, y) = random_problem(5, 30, 10);
    let prob = SeparableProblem::new(x, y, Penalty::Lasso { lambda: 1.0 }).unwrap();
    let grid = log_grid(prob.lambda_max(), 0.01, 20);
    let path = fit_path(&prob, &grid, &CdOptions::default()).unwrap();
    assert!(path.fits[0].coefficients.iter().all(|&b| b == 0.0));
    assert!(path.fits[1].coefficients.iter().any(|&b| b != 0.0));
    let single = fit_path(&prob, &grid[7..8], &CdOptions::default()).unwrap();
    let direct = solve(&prob.with_primary(grid[7]).unwrap(), None, &CdOptions::default()).unwrap();
    assert_eq!(single.fits[0], direct);
}

#[test]
fn warm_starts_save_sweeps() {
    let (x, y) = random_problem(21, 100, 50);
    let prob = SeparableProblem::new(x, y, Penalty::Lasso { lambda: 1.0 }).unwrap();
    let grid = log_grid(prob.lambda_max(), 0.01, 30);
    let opts = CdOptions::default();
    let warm = fit_path(&prob, &grid, &opts).unwrap().total_sweeps();
    let cold: usize = grid
        .iter()
        .map(|&l| solve(&prob.with_primary(l).unwrap(), None, &opts).unwrap().iterations)
        .sum();
    assert!(warm < cold, "warm {warm} vs cold {cold}");
}

#[test]
fn path_rejects_unsorted_grid_and_reports_index() {
    let (x, y) = random_problem(5, 10, 3);
    let prob = SeparableProblem::new(x, y, Penalty::Lasso { lambda: 1.0 }).unwrap();
    assert!(fit_path(&prob, &[0.1, 0.2], &CdOptions::default()).is_err());
    let tight = CdOptions { max_sweeps: 1, tol: 0.0, ..CdOptions::default() };
    assert_eq!(
        fit_path(&prob, &[0.5, 0.1], &tight),
        Err(Error::NotConverged { index: 0, limit: 1 })
    );
}

fn all_penalties() -> Vec<Penalty> {
    vec![
        Penalty::Lasso { lambda: 0.3 },
        Penalty::ElasticNet { lambda1: 0.3, lambda2: 0.5 },
        Penalty::Garotte { lambda: 0.2 },
        Penalty::Berhu { lambda: 0.3, delta: 0.4 },
        Penalty::Lad { lambda: 0.0 },
        Penalty::Lad { lambda: 0.5 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_sweep_weakly_decreases_objective(seed in 0u64..1000, n in 8usize..30, p in 1usize..6) {
        let (x, y) = random_problem(seed, n, p);
        for penalty in all_penalties() {
            let prob = SeparableProblem::new(x.clone(), y.clone(), penalty).unwrap();
            let opts = CdOptions { record_objective: true, ..CdOptions::default() };
            let f = solve(&prob, None, &opts).unwrap();
            let start = prob.objective(&vec![0.0; p], 0.0);
            let mut prev = start;
            for &v in &f.objective_trace {
                prop_assert!(v <= prev + 1e-12 * (1.0 + prev.abs()));
                prev = v;
            }
        }
    }

    #[test]
    fn lasso_gradient_bound_at_convergence(seed in 0u64..1000, lambda in 0.05f64..2.0) {
        let (x, y) = random_problem(seed, 25, 12);
        let prob = SeparableProblem::new(x.clone(), y.clone(), Penalty::Lasso { lambda }).unwrap();
        let f = lasso_cd(&prob, None, 1e-10).unwrap();
        let r = x.residual(&y, &f.coefficients);
        let worst = x.columns().map(|c| dot(c, &r).abs()).fold(0.0, f64::max);
        prop_assert!(worst <= lambda + 1e-6);
    }

    #[test]
    fn garotte_scalings_are_nonnegative(seed in 0u64..1000, lambda in 0.0f64..1.0) {
        let (x, y) = random_problem(seed, 20, 5);
        let prob = SeparableProblem::new(x, y, Penalty::Garotte { lambda }).unwrap();
        let f = garotte_cd(&prob, None, 1e-10).unwrap();
        prop_assert!(f.coefficients.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn random_starts_agree(seed in 0u64..500) {
        let (x, y) = random_problem(seed, 20, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for penalty in &all_penalties()[..4] {
            let prob = SeparableProblem::new(x.clone(), y.clone(), penalty.clone()).unwrap();
            let base = solve(&prob, None, &CdOptions::with_tol(1e-12)).unwrap().objective;
            for _ in 0..10 {
                let init: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..2.0)).collect();
                let f = solve(&prob, Some(&init), &CdOptions::with_tol(1e-12)).unwrap();
                prop_assert!((f.objective - base).abs() <= 1e-6 * (1.0 + base.abs()));
            }
        }
    }
}

#[test]
fn orthonormalized_groups_are_accepted() {
    let (x, y) = random_problem(31, 30, 6);
    let groups = vec![vec![0, 1, 2], vec![3], vec![4, 5]];
    let penalty = Penalty::GroupedLasso { lambda: 0.05, groups: groups.clone() };
    let raw = SeparableProblem::new(x.clone(), y.clone(), penalty.clone()).unwrap();
    assert!(solve(&raw, None, &CdOptions::default()).is_err());
    let q = orthonormalize_groups(&x, &groups).unwrap();
    for g in &groups {
        for &a in g {
            for &b in g {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot(q.column(a), q.column(b)) - expect).abs() < 1e-12);
            }
        }
    }
    // first column of each group keeps its direction
    assert!((dot(q.column(0), x.column(0)) - 1.0).abs() < 1e-12);
    let prob = SeparableProblem::new(q, y, penalty).unwrap();
    assert!(solve(&prob, None, &CdOptions::default()).is_ok());
}

#[test]
fn orthonormalize_detects_collinear_group() {
    let (x, _) = random_problem(32, 10, 2);
    let c0 = x.column(0).to_vec();
    let dup = DesignMatrix::from_columns(vec![c0.clone(), c0]).unwrap();
    assert!(matches!(orthonormalize_groups(&dup, &[vec![0, 1]]), Err(Error::RankDeficient)));
}
