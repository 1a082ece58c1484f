mod common;

use common::{random_spd, to_na};
use dcggm_core::matrix::{cholesky, inv_pd, is_positive_definite, log_det_pd, min_eigenvalue_bisect, symmetric_eigenvalues};
use dcggm_core::norms::{largest_k_norm, soft_threshold, topk_sign_subgradient};
use dcggm_core::SymMatrix;
use proptest::prelude::*;

#[test]
fn cholesky_matches_nalgebra() {
    for (i, p) in [1, 2, 5, 17, 40].into_iter().enumerate() {
        let a = random_spd(p, p + 3, 10 + i as u64);
        let ours = cholesky(&a).unwrap();
        let theirs = nalgebra::Cholesky::new(to_na(&a)).unwrap().l();
        for j in 0..p {
            for k in 0..=j {
                let (x, y) = (ours.get(j, k), theirs[(j, k)]);
                assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "p {p} ({j},{k}) {x} vs {y}");
            }
        }
    }
}

#[test]
fn log_det_and_inverse_match_nalgebra() {
    for seed in 0..20 {
        let p = 2 + seed as usize % 6;
        let a = random_spd(p, p + 1, seed);
        let eig = nalgebra::SymmetricEigen::new(to_na(&a)).eigenvalues;
        let want: f64 = eig.iter().map(|v| v.ln()).sum();
        assert!((log_det_pd(&a).unwrap() - want).abs() < 1e-8);

        let inv = inv_pd(&a).unwrap();
        let prod = a.matmul(&inv).unwrap();
        for j in 0..p {
            for k in 0..p {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((prod[j * p + k] - want).abs() < 1e-8);
            }
        }
        assert!(inv_pd(&inv).unwrap().max_abs_diff(&a).unwrap() < 1e-6);
    }
}

#[test]
fn eigenvalues_match_nalgebra() {
    for seed in 0..10 {
        let a = random_spd(6, 4, 100 + seed);
        let mut theirs: Vec<f64> = nalgebra::SymmetricEigen::new(to_na(&a)).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        let mut ours = symmetric_eigenvalues(&a);
        ours.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((min_eigenvalue_bisect(&a, 1e-10) - theirs[0]).abs() < 1e-8);
    }
}

#[test]
fn indefinite_and_singular_rejected() {
    let a = SymMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
    assert!(!is_positive_definite(&a));
    assert!(log_det_pd(&a).is_err());
    let mut shifted = random_spd(8, 3, 5);
    let lmin = nalgebra::SymmetricEigen::new(to_na(&shifted)).eigenvalues.min();
    for j in 0..8 {
        shifted.set(j, j, shifted.get(j, j) - lmin - 1e-3);
    }
    assert!(!is_positive_definite(&shifted));
}

proptest! {
    #[test]
    fn soft_threshold_is_odd(x in -1e3..1e3f64, t in 0.0..10.0f64) {
        prop_assert_eq!(soft_threshold(-x, t), -soft_threshold(x, t));
        prop_assert!(soft_threshold(x, t).abs() <= x.abs());
    }

    #[test]
    fn largest_k_is_monotone_and_ends_at_l1(v in prop::collection::vec(-10.0..10.0f64, 1..30)) {
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        let mut prev = 0.0;
        for k in 1..=v.len() {
            let cur = largest_k_norm(&v, k).unwrap();
            prop_assert!(cur >= prev);
            prev = cur;
        }
        prop_assert!((prev - l1).abs() <= 1e-12 * (1.0 + l1));
    }

    #[test]
    fn sign_subgradient_attains_norm(v in prop::collection::vec(0.01..10.0f64, 1..30), flips in prop::collection::vec(any::<bool>(), 30), k in 1usize..30) {
        let v: Vec<f64> = v.iter().zip(&flips).map(|(&x, &f)| if f { -x } else { x }).collect();
        let k = k.min(v.len());
        let s = topk_sign_subgradient(&v, k, &[]).unwrap();
        let dot: f64 = v.iter().zip(&s).map(|(a, b)| a * b).sum();
        let norm = largest_k_norm(&v, k).unwrap();
        prop_assert!((dot - norm).abs() <= 1e-12 * (1.0 + norm));
        prop_assert_eq!(s.iter().map(|x| x.abs()).sum::<f64>(), k as f64);
    }
}
