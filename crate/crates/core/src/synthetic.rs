//! Ground-truth precision matrices, Gaussian sampling and covariance
//! shrinkage.
//!
//! All randomness comes from ChaCha streams keyed by explicit seeds, so every
//! stage is reproducible on its own and independent of call order.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::matrix::{inv_pd, is_positive_definite, min_eigenvalue_bisect, symmetric_eigenvalues, Cholesky, SymMatrix};

/// Largest dimension for which the random generator uses the full Jacobi
/// spectrum; beyond it the smallest eigenvalue is found by bisection.
const JACOBI_MAX_DIM: usize = 32;
const CHAIN_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Random,
    Chain,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Random => "random",
            Kind::Chain => "chain",
        }
    }

    pub fn max_edges(&self, p: usize) -> usize {
        match self {
            Kind::Random => p * p.saturating_sub(1) / 2,
            Kind::Chain => (2 * p).saturating_sub(3),
        }
    }
}

impl core::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Kind::Random),
            "chain" => Ok(Kind::Chain),
            _ => Err(Error::InvalidParameter("kind must be random or chain")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub omega_true: SymMatrix,
    pub sigma_true: SymMatrix,
    /// Nonzero off-diagonal positions `(j, k)`, `j < k`, 0-based and sorted.
    pub support: Vec<(usize, usize)>,
    pub kind: Kind,
    pub seed: u64,
    pub n_nonzero: usize,
}

/// `n x p` sample matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_row_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Samples { n, p, data })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Samples { n: indices.len(), p: self.p, data }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Samples,
    /// Shrunk sample covariance.
    pub s: SymMatrix,
    pub zeta: f64,
    pub n: usize,
    pub seed: u64,
}

/// FNV-1a over the stage name, mixed into the parent seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Picks `count` distinct indices from `0..len` uniformly (partial
/// Fisher-Yates), returned sorted.
fn choose_subset(len: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..count {
        let j = Uniform::new(i, len).expect("nonempty range").sample(rng);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| ((j + 1)..p).map(move |k| (j, k))).collect()
}

fn finish(omega: SymMatrix, support: Vec<(usize, usize)>, kind: Kind, seed: u64) -> Result<GroundTruth> {
    let sigma = inv_pd(&omega)?;
    Ok(GroundTruth { n_nonzero: support.len(), omega_true: omega, sigma_true: sigma, support, kind, seed })
}

/// Symmetrized Gaussian matrix with all but `n_edges` off-diagonal pairs
/// zeroed, shifted so that its smallest eigenvalue is 1.
pub fn gen_random_precision(p: usize, n_edges: usize, seed: u64) -> Result<GroundTruth> {
    let max = Kind::Random.max_edges(p);
    if n_edges > max {
        return Err(Error::InvalidEdgeCount { requested: n_edges, max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..p * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let pairs = upper_pairs(p);
    let keep = choose_subset(pairs.len(), n_edges, &mut rng);
    let mut a = SymMatrix::zeros(p);
    for j in 0..p {
        a.set(j, j, raw[j * p + j]);
    }
    let support: Vec<(usize, usize)> = keep.iter().map(|&i| pairs[i]).collect();
    for &(j, k) in &support {
        a.set(j, k, 0.5 * (raw[j * p + k] + raw[k * p + j]));
    }
    let lambda_min = if p <= JACOBI_MAX_DIM {
        symmetric_eigenvalues(&a)[0]
    } else {
        min_eigenvalue_bisect(&a, 1e-9)
    };
    let shift = 1.0 - lambda_min;
    for j in 0..p {
        a.set(j, j, a.get(j, j) + shift);
    }
    finish(a, support, Kind::Random, seed)
}

/// Banded matrix with unit diagonal, 0.5 on the first and 0.25 on the second
/// off-diagonal, randomly thinned to `n_edges` pairs.
pub fn gen_chain_precision(p: usize, n_edges: usize, seed: u64) -> Result<GroundTruth> {
    let max = Kind::Chain.max_edges(p);
    if n_edges > max {
        return Err(Error::InvalidEdgeCount { requested: n_edges, max });
    }
    let mut band: Vec<(usize, usize, f64)> = Vec::with_capacity(max);
    for j in 0..p {
        if j + 1 < p {
            band.push((j, j + 1, 0.5));
        }
        if j + 2 < p {
            band.push((j, j + 2, 0.25));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CHAIN_ATTEMPTS {
        let keep = choose_subset(band.len(), n_edges, &mut rng);
        let mut omega = SymMatrix::identity(p);
        let mut support = Vec::with_capacity(n_edges);
        for &i in &keep {
            let (j, k, v) = band[i];
            omega.set(j, k, v);
            support.push((j, k));
        }
        if is_positive_definite(&omega) {
            support.sort_unstable();
            return finish(omega, support, Kind::Chain, seed);
        }
    }
    Err(Error::GenerationFailed { attempts: CHAIN_ATTEMPTS })
}

pub fn gen_precision(kind: Kind, p: usize, n_edges: usize, seed: u64) -> Result<GroundTruth> {
    match kind {
        Kind::Random => gen_random_precision(p, n_edges, seed),
        Kind::Chain => gen_chain_precision(p, n_edges, seed),
    }
}

/// `n` draws from `N(0, sigma)`. Row `i` comes from ChaCha stream `i` of
/// `seed`, so rows can be regenerated independently.
pub fn sample_mvn(sigma: &SymMatrix, n: usize, seed: u64) -> Result<Samples> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive"));
    }
    let l = Cholesky::factor(sigma)?;
    let p = sigma.dim();
    let mut data = vec![0.0; n * p];
    let mut z = vec![0.0; p];
    for (i, row) in data.chunks_mut(p).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        l.mul_vec(&z, row);
    }
    Ok(Samples { n, p, data })
}

/// Covariance about the sample mean, normalized by `1/n`.
pub fn sample_covariance(x: &Samples) -> SymMatrix {
    let (n, p) = (x.rows(), x.cols());
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut acc = vec![0.0; p * p];
    let mut dev = vec![0.0; p];
    for i in 0..n {
        for ((d, v), m) in dev.iter_mut().zip(x.row(i)).zip(&mean) {
            *d = v - m;
        }
        for j in 0..p {
            let dj = dev[j];
            if dj == 0.0 {
                continue;
            }
            for k in j..p {
                acc[j * p + k] += dj * dev[k];
            }
        }
    }
    SymMatrix::from_fn(p, |j, k| acc[j * p + k] / n as f64)
}

/// Grid resolution of the shrinkage weight.
const ZETA_STEPS: usize = 100;

/// `zeta D_S + (1 - zeta) S` for the smallest `zeta` on the grid
/// `0, 0.01, ..., 1` whose Cholesky pivots all exceed `1e-8 mean(diag S)`.
pub fn shrink_covariance(s: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let p = s.dim();
    let mean_diag = s.diag().iter().sum::<f64>() / p.max(1) as f64;
    if !(mean_diag > 0.0) {
        return Err(Error::ShrinkageFailed);
    }
    let floor = 1e-8 * mean_diag;
    let at = |step: usize| {
        let zeta = step as f64 / ZETA_STEPS as f64;
        let m = SymMatrix::from_fn(p, |j, k| if j == k { s.get(j, j) } else { (1.0 - zeta) * s.get(j, k) });
        (m, zeta)
    };
    let ok = |m: &SymMatrix| Cholesky::factor_with_floor(m, floor).is_ok();
    let (first, _) = at(0);
    if ok(&first) {
        return Ok((first, 0.0));
    }
    let (last, _) = at(ZETA_STEPS);
    if !ok(&last) {
        return Err(Error::ShrinkageFailed);
    }
    // positive definiteness is monotone in zeta; bisect on the grid index
    let (mut bad, mut good) = (0, ZETA_STEPS);
    while good - bad > 1 {
        let mid = (bad + good) / 2;
        if ok(&at(mid).0) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(at(good))
}

/// Ground truth, samples, sample covariance and its shrunk version.
pub fn make_dataset(kind: Kind, p: usize, n: usize, n_edges: usize, seed: u64) -> Result<(GroundTruth, Dataset)> {
    let truth = gen_precision(kind, p, n_edges, derive_seed(seed, "precision"))?;
    let x = sample_mvn(&truth.sigma_true, n, derive_seed(seed, "samples"))?;
    let (s, zeta) = shrink_covariance(&sample_covariance(&x))?;
    Ok((truth, Dataset { x, s, zeta, n, seed }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_base_pattern() {
        let g = gen_chain_precision(4, 5, 3).unwrap();
        let want = SymMatrix::from_rows(&[
            [1.0, 0.5, 0.25, 0.0],
            [0.5, 1.0, 0.5, 0.25],
            [0.25, 0.5, 1.0, 0.5],
            [0.0, 0.25, 0.5, 1.0],
        ])
        .unwrap();
        assert_eq!(g.omega_true, want);
        assert_eq!(g.support, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn chain_edge_bound() {
        assert_eq!(gen_chain_precision(10, 18, 0), Err(Error::InvalidEdgeCount { requested: 18, max: 17 }));
        assert_eq!(gen_random_precision(4, 7, 0).unwrap_err(), Error::InvalidEdgeCount { requested: 7, max: 6 });
    }

    #[test]
    fn random_without_edges_is_diagonal() {
        let g = gen_random_precision(6, 0, 9).unwrap();
        assert!(g.omega_true.offdiag_upper().all(|v| v == 0.0));
        let min = g.omega_true.diag().into_iter().fold(f64::INFINITY, f64::min);
        assert!((min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_covariance_examples() {
        let x = Samples::from_row_major(2, 2, std::vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(sample_covariance(&x), SymMatrix::from_diag(&[1.0, 0.0]));
        let c = Samples::from_row_major(3, 2, std::vec![2.0, 5.0, 2.0, 5.0, 2.0, 5.0]).unwrap();
        assert_eq!(sample_covariance(&c), SymMatrix::zeros(2));
        let one = Samples::from_row_major(1, 3, std::vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sample_covariance(&one), SymMatrix::zeros(3));
    }

    #[test]
    fn shrinkage_leaves_good_matrices_alone() {
        let s = SymMatrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        assert_eq!(shrink_covariance(&s).unwrap(), (s, 0.0));
        let d = SymMatrix::from_diag(&[1.0, 3.0]);
        assert_eq!(shrink_covariance(&d).unwrap(), (d, 0.0));
        assert_eq!(shrink_covariance(&SymMatrix::zeros(2)), Err(Error::ShrinkageFailed));
    }

    #[test]
    fn single_sample_is_finite() {
        let x = sample_mvn(&SymMatrix::identity(3), 1, 5).unwrap();
        assert_eq!(x.rows(), 1);
        assert!(x.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn seeds_are_separated_by_stage() {
        assert_ne!(derive_seed(7, "precision"), derive_seed(7, "samples"));
        assert_eq!(derive_seed(7, "samples"), derive_seed(7, "samples"));
    }
}
