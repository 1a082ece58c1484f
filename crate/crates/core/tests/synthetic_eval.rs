mod common;

use common::random_spd;
use dcggm_core::eval::{
    calibrate_edges, confusion, cross_validate, edge_count, f1_score, holdout_neg_loglik, k_grid, kfold_split, lambda_grid,
    DEFAULT_ZERO_TOL,
};
use dcggm_core::matrix::{inv_pd, is_positive_definite, min_eigenvalue_bisect, symmetric_eigenvalues};
use dcggm_core::synthetic::{gen_chain_precision, gen_random_precision, sample_covariance, sample_mvn, shrink_covariance};
use dcggm_core::{make_dataset, Error, Estimator, Kind, Method, SymMatrix};

#[test]
fn random_precision_has_unit_floor() {
    for (p, e, seed) in [(10, 10, 1), (20, 40, 2), (40, 100, 3)] {
        let g = gen_random_precision(p, e, seed).unwrap();
        assert_eq!(g.support.len(), e);
        assert_eq!(g.n_nonzero, e);
        let lmin = if p <= 32 {
            symmetric_eigenvalues(&g.omega_true).into_iter().fold(f64::INFINITY, f64::min)
        } else {
            min_eigenvalue_bisect(&g.omega_true, 1e-10)
        };
        assert!((lmin - 1.0).abs() <= 1e-6, "p {p}: {lmin}");
        assert_eq!(g, gen_random_precision(p, e, seed).unwrap());
    }
    assert!(matches!(gen_random_precision(5, 11, 0), Err(Error::InvalidEdgeCount { .. })));
}

#[test]
fn chain_keeps_printed_values() {
    let g = gen_chain_precision(50, 30, 9).unwrap();
    assert_eq!(g.support.len(), 30);
    for &(j, k) in &g.support {
        let v = g.omega_true.get(j, k);
        assert!(v == 0.5 || v == 0.25);
        assert!(k - j <= 2);
    }
    assert!(is_positive_definite(&g.omega_true));
    assert!(g.sigma_true.max_abs_diff(&inv_pd(&g.omega_true).unwrap()).unwrap() < 1e-12);
    let full = gen_chain_precision(12, 21, 4).unwrap();
    assert_eq!(full.support.len(), 21);
}

#[test]
fn mvn_sample_covariance_is_close() {
    let x = sample_mvn(&SymMatrix::identity(3), 10_000, 17).unwrap();
    let s = sample_covariance(&x);
    assert!(s.max_abs_diff(&SymMatrix::identity(3)).unwrap() < 0.1);
    assert_eq!(x, sample_mvn(&SymMatrix::identity(3), 10_000, 17).unwrap());
}

#[test]
fn shrinkage_restores_definiteness_when_n_is_small() {
    for seed in 0..10 {
        for kind in [Kind::Random, Kind::Chain] {
            let (_, ds) = make_dataset(kind, 30, 15, 30, seed).unwrap();
            assert!(ds.zeta > 0.0 && ds.zeta <= 1.0);
            assert!(is_positive_definite(&ds.s));
        }
    }
    let (s, zeta) = shrink_covariance(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
    assert_eq!((s, zeta), (SymMatrix::from_diag(&[1.0, 3.0]), 0.0));
    assert_eq!(shrink_covariance(&SymMatrix::zeros(2)), Err(Error::ShrinkageFailed));
}

#[test]
fn datasets_are_reproducible() {
    let a = make_dataset(Kind::Chain, 50, 100, 30, 7).unwrap();
    let b = make_dataset(Kind::Chain, 50, 100, 30, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.0.support.len(), 30);
    let (_, r) = make_dataset(Kind::Random, 50, 25, 30, 7).unwrap();
    assert!(is_positive_definite(&r.s));
}

#[test]
fn holdout_loss_is_minimized_by_the_inverse() {
    for seed in 0..5 {
        let s = random_spd(6, 12, 300 + seed);
        let best = inv_pd(&s).unwrap();
        let at_best = holdout_neg_loglik(&best, &s).unwrap();
        for (j, k) in [(0, 0), (0, 1), (2, 5)] {
            for h in [1e-3, -1e-3] {
                let mut moved = best.clone();
                moved.set(j, k, moved.get(j, k) + h);
                assert!(holdout_neg_loglik(&moved, &s).unwrap() > at_best);
            }
        }
        // moving from the identity toward the inverse keeps lowering the loss
        let id = SymMatrix::identity(6);
        let mut prev = holdout_neg_loglik(&id, &s).unwrap();
        for t in [0.25, 0.5, 0.75, 1.0] {
            let o = SymMatrix::from_fn(6, |j, k| (1.0 - t) * id.get(j, k) + t * best.get(j, k));
            let cur = holdout_neg_loglik(&o, &s).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
    }
}

#[test]
fn confusion_counts_cover_the_truth() {
    let (truth, ds) = make_dataset(Kind::Random, 20, 60, 25, 5).unwrap();
    for frac in [0.0, 0.1, 0.5, 1.0] {
        let est = Estimator::new(Method::Glasso);
        let fit = est.fit(&ds.s, frac * ds.s.max_abs_offdiag()).unwrap();
        let c = confusion(&fit.omega, &truth.omega_true, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(c.tp + c.fn_, 25);
        assert_eq!(c.tp + c.fp, fit.edges);
        let f1 = f1_score(&c);
        assert!((0.0..=1.0).contains(&f1));
        assert_eq!(f1 == 1.0, c.tp > 0 && c.fp == 0 && c.fn_ == 0);
    }
}

#[test]
fn folds_partition_any_n() {
    for n in 5..40 {
        let folds = kfold_split(n, 5, n as u64).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn grid_order_does_not_change_the_choice() {
    let (_, ds) = make_dataset(Kind::Chain, 12, 40, 10, 3).unwrap();
    for method in [Method::Glasso, Method::Dc] {
        let est = Estimator::new(method);
        let grid = est.grid(&ds.s, 8);
        let fwd = cross_validate(&est, &ds, &grid, 5, 1).unwrap();
        let rev_grid: Vec<f64> = grid.iter().rev().copied().collect();
        let rev = cross_validate(&est, &ds, &rev_grid, 5, 1).unwrap();
        assert_eq!(fwd.chosen, rev.chosen);
        assert_eq!(fwd.chosen_edges, rev.chosen_edges);
        assert!(grid.contains(&fwd.chosen));
        let one = cross_validate(&est, &ds, &grid[2..3], 5, 1).unwrap();
        assert_eq!(one.chosen, grid[2]);
    }
}

#[test]
fn lambda_max_clears_every_edge() {
    let s = random_spd(10, 20, 77);
    let grid = lambda_grid(&s, 100);
    assert_eq!(grid.len(), 100);
    let fit = Estimator::new(Method::Glasso).fit(&s, *grid.last().unwrap()).unwrap();
    assert_eq!(fit.edges, 0);
    assert!(fit.kkt_residual <= 1e-8);
    let k = k_grid(50, 100);
    assert_eq!((k[0], *k.last().unwrap()), (51, 1275));
}

#[test]
fn calibration_hits_targets() {
    let (_, ds) = make_dataset(Kind::Random, 20, 60, 25, 8).unwrap();
    for method in [Method::Glasso, Method::Scad, Method::Adapt] {
        let est = Estimator::new(method);
        let zero = calibrate_edges(&est, &ds.s, 0).unwrap();
        assert!(zero.exact && zero.achieved_edges == 0);
        let cal = calibrate_edges(&est, &ds.s, 25).unwrap();
        assert!(cal.evaluations <= 61 + 30);
        assert_eq!(edge_count(&cal.fit.omega, DEFAULT_ZERO_TOL), cal.achieved_edges);
        if method == Method::Glasso {
            assert!(cal.exact, "glasso reached {}", cal.achieved_edges);
        }
    }
    assert!(matches!(calibrate_edges(&Estimator::new(Method::Glasso), &ds.s, 191), Err(Error::InvalidEdgeCount { .. })));
}
