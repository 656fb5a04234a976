use pathwise::flsa1d::{flsa_objective, flsa_solve, flsa_solve_path, soft_threshold_path, FlsaConfig, PathSchedule};
use pathwise::flsa2d::{flsa2d_objective, flsa2d_solve, soft_threshold_path_2d, two_fold_validate, Flsa2dConfig, PixelGrid};
use pathwise::fused_general::{fused_cd, GeneralFusedProblem};
use pathwise::lasso_family::{fit_path, log_grid, CdOptions, Penalty, SeparableProblem};
use pathwise::numeric::{standardize, DesignMatrix, ResponseVector};
use pathwise::oracle::{
    flsa_oracle, kkt_check_chain, kkt_check_graph, kkt_check_regression, proximal_reference, Edge, ReferenceOptions,
    ReferenceProblem, KKT_TOL,
};
use pathwise::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn design(seed: u64, n: usize, p: usize) -> DesignMatrix {
    let cols = (0..p).map(|j| noise(seed * 100 + j as u64, n)).collect();
    standardize(&DesignMatrix::from_columns(cols).unwrap()).unwrap()
}

fn centered(mut y: Vec<f64>) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter_mut().for_each(|v| *v -= m);
    y
}

#[test]
fn chain_path_matches_oracle_at_every_grid_point() {
    let y = noise(1, 60);
    let schedule = PathSchedule::new(0.2, 2.0, 0.1).unwrap();
    let path = flsa_solve_path(&y, &schedule, 1e-12).unwrap();
    assert_eq!(path.solutions.len(), schedule.grid().len());
    for sol in &path.solutions {
        let exact = flsa_oracle(&y, sol.lambda1, sol.lambda2).unwrap();
        let f = flsa_objective(&y, &sol.beta, sol.lambda1, sol.lambda2);
        let f_exact = flsa_objective(&y, &exact, sol.lambda1, sol.lambda2);
        assert!(f - f_exact <= 1e-9 * f_exact.max(1.0), "l2 {} f {f} exact {f_exact} len {}", sol.lambda2, sol.beta.len());
        assert!(kkt_check_chain(&y, &sol.beta, sol.lambda1, sol.lambda2).feasible());
    }
}

#[test]
fn chain_soft_threshold_equals_resolve() {
    let y = noise(2, 40);
    let base = flsa_solve(&y, 0.0, 0.7, &FlsaConfig::with_tol(1e-12)).unwrap();
    let shifted = soft_threshold_path(&base, 0.4).unwrap();
    let direct = flsa_solve(&y, 0.4, 0.7, &FlsaConfig::with_tol(1e-12)).unwrap();
    for (a, b) in shifted.beta.iter().zip(&direct.beta) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn lasso_path_is_certified() {
    let x = design(3, 80, 10);
    let y = centered(noise(4, 80));
    let problem =
        SeparableProblem::new(x, ResponseVector::new(y).unwrap(), Penalty::Lasso { lambda: 0.0 }).unwrap();
    let grid = log_grid(problem.lambda_max(), 0.01, 25);
    let path = fit_path(&problem, &grid, &CdOptions::with_tol(1e-12)).unwrap();
    let scale = problem.lambda_max().max(1.0);
    for (lambda, fit) in path.grid.iter().zip(&path.fits) {
        let at = problem.with_primary(*lambda).unwrap();
        let cert = kkt_check_regression(&at, &fit.coefficients, fit.intercept, KKT_TOL * scale);
        assert!(cert.feasible, "lambda {lambda}: violation {}", cert.max_violation);
    }
    assert!(path.fits[0].coefficients.iter().all(|&b| b == 0.0));
}

#[test]
fn general_fused_matches_reference() {
    let x = design(5, 30, 6);
    let y = noise(6, 30);
    let problem = GeneralFusedProblem::new(x.clone(), ResponseVector::new(y.clone()).unwrap(), 0.3, 1.0).unwrap();
    let fit = fused_cd(&problem, 1e-12).unwrap();
    assert!(fit.certified);
    let reference = proximal_reference(
        &ReferenceProblem::GeneralFused { x: &x, y: &y, lambda1: 0.3, lambda2: 1.0 },
        &ReferenceOptions::default(),
    )
    .unwrap();
    assert!(fit.fit.objective - reference.objective <= 1e-8 * reference.objective.abs().max(1.0));
}

#[test]
fn grid_solution_satisfies_graph_optimality() {
    let (n1, n2) = (6, 7);
    let grid = PixelGrid::new(n1, n2, noise(7, n1 * n2)).unwrap();
    let sol = flsa2d_solve(&grid, 0.1, 0.4, &Flsa2dConfig::with_tol(1e-12)).unwrap();
    let mut edges = Vec::new();
    for r in 0..n1 {
        for c in 0..n2 {
            let k = r * n2 + c;
            if c + 1 < n2 {
                edges.push(Edge { a: k, b: k + 1, weight: 0.4 });
            }
            if r + 1 < n1 {
                edges.push(Edge { a: k, b: k + n2, weight: 0.4 });
            }
        }
    }
    assert!(kkt_check_graph(grid.values(), &sol.beta, 0.1, &edges).feasible());
    let shifted = soft_threshold_path_2d(&sol, 0.3).unwrap();
    let direct = flsa2d_solve(&grid, 0.3, 0.4, &Flsa2dConfig::with_tol(1e-12)).unwrap();
    let a = flsa2d_objective(&grid, &shifted.beta, 0.3, 0.4, 0.4);
    let b = flsa2d_objective(&grid, &direct.beta, 0.3, 0.4, 0.4);
    assert!((a - b).abs() <= 1e-9 * b.max(1.0));
}

#[test]
fn two_fold_rejects_tiny_grids_and_picks_from_the_grid() {
    let tiny = PixelGrid::new(2, 5, noise(8, 10)).unwrap();
    let got = two_fold_validate(&tiny, &[0.0], &[0.1], &Flsa2dConfig::default());
    assert!(matches!(got, Err(Error::GridTooSmall { .. })));

    let rows: Vec<Vec<f64>> = (0..12)
        .map(|r| (0..12).map(|c| if (3..9).contains(&r) && (3..9).contains(&c) { 2.0 } else { 0.0 }).collect())
        .collect();
    let clean = PixelGrid::from_rows(&rows).unwrap();
    let noisy: Vec<f64> = clean.values().iter().zip(noise(9, 144)).map(|(v, e)| v + 0.3 * e).collect();
    let grid = PixelGrid::new(12, 12, noisy).unwrap();
    let l1 = [0.0, 0.05];
    let l2 = [0.0, 0.1, 0.3, 1.0];
    let res = two_fold_validate(&grid, &l1, &l2, &Flsa2dConfig::default()).unwrap();
    assert!(l1.contains(&res.best_lambda1) && l2.contains(&res.best_lambda2));
    assert!(res.best_lambda2 > 0.0);
    assert_eq!(res.errors.len(), 2);
    assert!(res.errors.iter().all(|row| row.len() == 4));
}
