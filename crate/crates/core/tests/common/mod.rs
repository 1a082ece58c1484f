#![allow(dead_code)]

use dcggm_core::SymMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample covariance of `m` standard normal draws plus a small ridge.
pub fn random_spd(p: usize, m: usize, seed: u64) -> SymMatrix {
    let mut r = rng(seed);
    let b: Vec<f64> = (0..p * m).map(|_| StandardNormal.sample(&mut r)).collect();
    SymMatrix::from_fn(p, |j, k| {
        let dot: f64 = (0..m).map(|i| b[j * m + i] * b[k * m + i]).sum();
        dot / m as f64 + if j == k { 0.1 } else { 0.0 }
    })
}

pub fn to_na(a: &SymMatrix) -> nalgebra::DMatrix<f64> {
    let p = a.dim();
    nalgebra::DMatrix::from_fn(p, p, |j, k| a.get(j, k))
}
