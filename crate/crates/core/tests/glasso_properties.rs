mod common;

use common::random_spd;
use dcggm_core::eval::{edge_count, DEFAULT_ZERO_TOL};
use dcggm_core::glasso::{glasso_fit_warm, kkt_residual, lasso_cd};
use dcggm_core::matrix::{inv_pd, is_positive_definite};
use dcggm_core::penalties::{adaptive_fit, scad_objective, scad_path, AdaptiveParams, ScadParams};
use dcggm_core::{glasso_fit, GlassoOptions, PenaltySpec, SymMatrix};

fn max_abs(s: &SymMatrix) -> f64 {
    s.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn kkt_holds_on_random_inputs() {
    let opts = GlassoOptions::default();
    for (i, p) in [5, 20, 50].into_iter().enumerate() {
        for rep in 0..4 {
            let s = random_spd(p, 2 * p, 1000 * i as u64 + rep);
            for frac in [0.05, 0.3, 0.7] {
                let lam = frac * s.max_abs_offdiag();
                let sol = glasso_fit(&s, &PenaltySpec::Scalar(lam), &opts).unwrap();
                assert!(sol.converged);
                assert!(is_positive_definite(&sol.omega));
                let kkt = kkt_residual(&sol.omega, &s, &PenaltySpec::Scalar(lam)).unwrap();
                assert!(kkt <= 1e-4 * (1.0 + max_abs(&s)), "p {p} lam {lam} kkt {kkt}");
                assert!((kkt - sol.kkt_residual).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unpenalized_fit_is_the_inverse() {
    for seed in 0..5 {
        let s = random_spd(12, 30, seed);
        let sol = glasso_fit(&s, &PenaltySpec::Scalar(0.0), &GlassoOptions::default()).unwrap();
        assert!(sol.omega.max_abs_diff(&inv_pd(&s).unwrap()).unwrap() < 1e-5);
    }
}

#[test]
fn edges_shrink_as_lambda_grows() {
    for seed in 0..5 {
        let s = random_spd(15, 20, 40 + seed);
        let top = s.max_abs_offdiag();
        let mut prev = usize::MAX;
        for i in 0..10 {
            let lam = top * i as f64 / 9.0;
            let sol = glasso_fit(&s, &PenaltySpec::Scalar(lam), &GlassoOptions::default()).unwrap();
            let e = edge_count(&sol.omega, DEFAULT_ZERO_TOL);
            assert!(e <= prev, "seed {seed} lambda {lam}: {e} > {prev}");
            prev = e;
        }
        assert_eq!(prev, 0);
    }
}

#[test]
fn scalar_and_constant_matrix_penalties_agree() {
    let s = random_spd(10, 15, 7);
    let lam = 0.2 * s.max_abs_offdiag();
    let opts = GlassoOptions::default();
    let a = glasso_fit(&s, &PenaltySpec::Scalar(lam), &opts).unwrap();
    let b = glasso_fit(&s, &PenaltySpec::Matrix(SymMatrix::from_fn(10, |_, _| lam)), &opts).unwrap();
    assert!(a.omega.max_abs_diff(&b.omega).unwrap() <= 1e-10);
}

#[test]
fn warm_start_lands_on_the_cold_solution() {
    let opts = GlassoOptions { tol: 1e-8, ..GlassoOptions::default() };
    for seed in 0..3 {
        let s = random_spd(20, 25, 70 + seed);
        let top = s.max_abs_offdiag();
        let pen = PenaltySpec::Scalar(0.2 * top);
        let start = glasso_fit(&s, &PenaltySpec::Scalar(0.4 * top), &opts).unwrap();
        let cold = glasso_fit(&s, &pen, &opts).unwrap();
        let warm = glasso_fit_warm(&s, &pen, &opts, &start).unwrap();
        assert!(warm.omega.max_abs_diff(&cold.omega).unwrap() <= 1e-6);
    }
}

#[test]
fn diagonal_covariance_gives_diagonal_fit() {
    let s = SymMatrix::from_diag(&[2.0, 4.0]);
    let sol = glasso_fit(&s, &PenaltySpec::Scalar(0.5), &GlassoOptions::default()).unwrap();
    assert!((sol.omega.get(0, 0) - 1.0 / 2.5).abs() < 1e-12);
    assert!((sol.omega.get(1, 1) - 1.0 / 4.5).abs() < 1e-12);
    assert_eq!(sol.omega.get(0, 1), 0.0);
    assert!(sol.kkt_residual <= 1e-8);
}

#[test]
fn lasso_matches_normal_equations_without_penalty() {
    let q = random_spd(6, 10, 3);
    let b = [1.0, -2.0, 0.5, 0.0, 3.0, -1.0];
    let beta = lasso_cd(&q, &b, &[0.0; 6], &[0.0; 6], 1e-10).unwrap();
    let qb = q.matmul(&SymMatrix::identity(6)).unwrap();
    for j in 0..6 {
        let r: f64 = (0..6).map(|k| qb[j * 6 + k] * beta[k]).sum();
        assert!((r - b[j]).abs() < 1e-6);
    }
    assert_eq!(lasso_cd(&q, &[0.0; 6], &[0.3; 6], &[0.0; 6], 1e-10).unwrap(), [0.0; 6]);
}

#[test]
fn scad_rounds_do_not_increase_the_objective() {
    let opts = GlassoOptions { tol: 1e-7, ..GlassoOptions::default() };
    for seed in 0..4 {
        let s = random_spd(12, 20, 200 + seed);
        let params = ScadParams::new(0.3 * s.max_abs_offdiag());
        let path = scad_path(&s, &params, &opts, 3).unwrap();
        let objs: Vec<f64> = path.iter().map(|f| scad_objective(&f.omega, &s, &params).unwrap()).collect();
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] + 1e-6 * (1.0 + w[0].abs()), "{objs:?}");
        }
        for f in &path {
            assert!(is_positive_definite(&f.omega));
        }
    }
}

#[test]
fn heavy_penalties_give_diagonal_baselines() {
    let s = random_spd(8, 12, 9);
    let big = 2.0 * s.max_abs_offdiag();
    let opts = GlassoOptions::default();
    let scad = scad_path(&s, &ScadParams::new(big), &opts, 3).unwrap();
    assert_eq!(edge_count(&scad.last().unwrap().omega, 0.0), 0);
    let adapt = adaptive_fit(&s, &AdaptiveParams::new(big), &opts).unwrap();
    assert_eq!(edge_count(&adapt.omega, 0.0), 0);
    let free = adaptive_fit(&s, &AdaptiveParams::new(0.0), &opts).unwrap();
    assert!(free.omega.max_abs_diff(&inv_pd(&s).unwrap()).unwrap() < 1e-5);
    assert!(free.kkt_residual <= 1e-4 * (1.0 + max_abs(&s)));
}
