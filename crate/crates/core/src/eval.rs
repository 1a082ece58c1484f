//! Edge-recovery metrics, grids, k-fold cross-validation and fixed-edge
//! calibration for the four estimators.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Uniform};

use crate::dc::{dc_fit, DcOptions};
use crate::error::{Error, Result};
use crate::glasso::{glasso_fit, neg_log_likelihood, GlassoOptions, PenaltySpec};
use crate::matrix::SymMatrix;
use crate::penalties::{adaptive_fit, scad_fit, AdaptiveParams, ScadParams};
use crate::synthetic::{sample_covariance, shrink_covariance, Dataset};

/// Entries with magnitude at or below this count as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
/// Bisection budget for matching a target edge count with a penalty weight.
pub const CALIBRATION_ITERATIONS: usize = 60;

/// Off-diagonal positions `(j, k)`, `j < k`, with `|o_jk| > zero_tol`.
pub fn edge_support(omega: &SymMatrix, zero_tol: f64) -> Vec<(usize, usize)> {
    let p = omega.dim();
    (0..p)
        .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
        .filter(|&(j, k)| omega.get(j, k).abs() > zero_tol)
        .collect()
}

pub fn edge_count(omega: &SymMatrix, zero_tol: f64) -> usize {
    omega.offdiag_upper().filter(|v| v.abs() > zero_tol).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    /// `tp / (tp + fp)`, zero when nothing was selected.
    pub fn precision(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

/// Counts over the upper triangle `j < k`.
pub fn confusion(omega_hat: &SymMatrix, omega_true: &SymMatrix, zero_tol: f64) -> Result<ConfusionCounts> {
    omega_hat.check_dim(omega_true)?;
    let mut c = ConfusionCounts::default();
    for (h, t) in omega_hat.offdiag_upper().zip(omega_true.offdiag_upper()) {
        match (h.abs() > zero_tol, t != 0.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Harmonic mean of precision and recall; zero when `tp = 0`.
pub fn f1_score(c: &ConfusionCounts) -> f64 {
    if c.tp == 0 {
        return 0.0;
    }
    let (pr, rc) = (c.precision(), c.recall());
    2.0 * pr * rc / (pr + rc)
}

/// `-log|O| + tr(O S_test)`.
pub fn holdout_neg_loglik(omega: &SymMatrix, s_test: &SymMatrix) -> Result<f64> {
    neg_log_likelihood(omega, s_test)
}

/// A seeded permutation of `0..n` cut into `k` folds whose sizes differ by
/// at most one (larger folds first).
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::InvalidFolds { folds: k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = Uniform::new_inclusive(0, i).expect("valid range").sample(&mut rng);
        perm.swap(i, j);
    }
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// Cardinality grid from `p + 1` to `p(p+1)/2`, rounded and deduplicated.
pub fn k_grid(p: usize, points: usize) -> Vec<usize> {
    let lo = (p + 1) as f64;
    let hi = (p * (p + 1) / 2) as f64;
    let mut grid: Vec<usize> = Vec::with_capacity(points);
    for v in linspace(lo, hi, points.max(2)) {
        let k = libm::round(v) as usize;
        if grid.last() != Some(&k) {
            grid.push(k);
        }
    }
    grid
}

/// `points` evenly spaced penalties on `[0, max_{j<k} |s_jk|]`; just `{0}`
/// when the covariance is diagonal.
pub fn lambda_grid(s: &SymMatrix, points: usize) -> Vec<f64> {
    let lambda_max = s.max_abs_offdiag();
    if lambda_max == 0.0 {
        return vec![0.0];
    }
    linspace(0.0, lambda_max, points.max(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dc,
    Glasso,
    Scad,
    Adapt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dc, Method::Glasso, Method::Scad, Method::Adapt];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dc => "dc",
            Method::Glasso => "glasso",
            Method::Scad => "scad",
            Method::Adapt => "adapt",
        }
    }

    /// Order in which parameter values give sparser models first.
    fn sparser_first(&self, a: f64, b: f64) -> Ordering {
        match self {
            Method::Dc => a.total_cmp(&b),
            _ => b.total_cmp(&a),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dc" => Ok(Method::Dc),
            "glasso" => Ok(Method::Glasso),
            "scad" => Ok(Method::Scad),
            "adapt" => Ok(Method::Adapt),
            _ => Err(Error::InvalidParameter("method must be one of dc, glasso, scad, adapt")),
        }
    }
}

/// A method plus all of its tuning knobs except the swept parameter
/// (`K` for DC, `lambda` otherwise).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimator {
    pub method: Method,
    pub glasso: GlassoOptions,
    /// DC settings; `k` is overwritten by the swept parameter.
    pub dc: DcOptions,
    pub scad_a: f64,
    pub lla_rounds: usize,
    pub adapt_gamma: f64,
    pub weight_cap: f64,
    pub zero_tol: f64,
}

impl Estimator {
    pub fn new(method: Method) -> Self {
        Estimator {
            method,
            glasso: GlassoOptions::default(),
            dc: DcOptions::new(0),
            scad_a: 3.7,
            lla_rounds: 3,
            adapt_gamma: 0.5,
            weight_cap: 1e6,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    /// Fits at `param`: a cardinality `K` for DC, a penalty weight otherwise.
    pub fn fit(&self, s: &SymMatrix, param: f64) -> Result<FitOutcome> {
        match self.method {
            Method::Dc => {
                if !(param >= 0.0) || libm::trunc(param) != param {
                    return Err(Error::InvalidParameter("DC cardinality must be a nonnegative integer"));
                }
                let opts = DcOptions { k: param as usize, ..self.dc };
                let sol = dc_fit(s, &opts)?;
                let last = sol.trace.last();
                Ok(FitOutcome {
                    iterations: sol.trace.len(),
                    converged: sol.converged,
                    kkt_residual: last.map_or(0.0, |t| t.inner_kkt),
                    constraint_gap: Some(sol.constraint_gap()),
                    edges: edge_count(&sol.omega, self.zero_tol),
                    omega: sol.omega,
                })
            }
            Method::Glasso => {
                let sol = glasso_fit(s, &PenaltySpec::Scalar(param), &self.glasso)?;
                Ok(FitOutcome::from_glasso(sol, self.zero_tol))
            }
            Method::Scad => {
                let params = ScadParams { lambda: param, a: self.scad_a };
                let sol = scad_fit(s, &params, &self.glasso, self.lla_rounds)?;
                Ok(FitOutcome::from_glasso(sol, self.zero_tol))
            }
            Method::Adapt => {
                let params = AdaptiveParams { lambda: param, gamma: self.adapt_gamma, weight_cap: self.weight_cap };
                let sol = adaptive_fit(s, &params, &self.glasso)?;
                Ok(FitOutcome::from_glasso(sol, self.zero_tol))
            }
        }
    }

    /// The grid swept by cross-validation for this method.
    pub fn grid(&self, s: &SymMatrix, points: usize) -> Vec<f64> {
        match self.method {
            Method::Dc => k_grid(s.dim(), points).into_iter().map(|k| k as f64).collect(),
            _ => lambda_grid(s, points),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub omega: SymMatrix,
    /// Sweeps for the lasso-type methods, outer iterations for DC.
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// DC only.
    pub constraint_gap: Option<f64>,
    pub edges: usize,
}

impl FitOutcome {
    fn from_glasso(sol: crate::glasso::GlassoSolution, zero_tol: f64) -> Self {
        FitOutcome {
            edges: edge_count(&sol.omega, zero_tol),
            iterations: sol.sweeps,
            converged: sol.converged,
            kkt_residual: sol.kkt_residual,
            constraint_gap: None,
            omega: sol.omega,
        }
    }
}

/// A fit that failed inside a sweep; it is scored `+inf` and kept here.
#[derive(Clone, Debug, PartialEq)]
pub struct CvFailure {
    pub grid_index: usize,
    pub fold: usize,
    pub error: Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub grid: Vec<f64>,
    /// Mean held-out log-likelihood `log|O| - tr(O S_test)` per grid point.
    pub mean_holdout_ll: Vec<f64>,
    /// Mean edge count of the training-fold fits per grid point.
    pub mean_edges: Vec<f64>,
    pub chosen: f64,
    pub chosen_index: usize,
    pub chosen_edges: usize,
    pub refit: FitOutcome,
    pub failures: Vec<CvFailure>,
}

/// k-fold cross-validation over `grid`, scoring the held-out negative
/// log-likelihood and refitting on `dataset.s` at the best point. Ties go to
/// the sparser model.
pub fn cross_validate(est: &Estimator, dataset: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be nonempty"));
    }
    let split = kfold_split(dataset.x.rows(), folds, seed)?;
    let n = dataset.x.rows();
    let mut nll_sum = vec![0.0; grid.len()];
    let mut edge_sum = vec![0.0; grid.len()];
    let mut edge_fits = vec![0usize; grid.len()];
    let mut failures = Vec::new();
    for (f, test_idx) in split.iter().enumerate() {
        let mut in_test = vec![false; n];
        test_idx.iter().for_each(|&i| in_test[i] = true);
        let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let s_test = sample_covariance(&dataset.x.select_rows(test_idx));
        let s_train = shrink_covariance(&sample_covariance(&dataset.x.select_rows(&train_idx)));
        for (g, &param) in grid.iter().enumerate() {
            let scored = s_train
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|(s, _)| est.fit(s, param))
                .and_then(|fit| Ok((holdout_neg_loglik(&fit.omega, &s_test)?, fit.edges)));
            match scored {
                Ok((nll, edges)) => {
                    nll_sum[g] += nll;
                    edge_sum[g] += edges as f64;
                    edge_fits[g] += 1;
                }
                Err(error) => {
                    nll_sum[g] = f64::INFINITY;
                    failures.push(CvFailure { grid_index: g, fold: f, error });
                }
            }
        }
    }
    let k = split.len() as f64;
    let mean_nll: Vec<f64> = nll_sum.iter().map(|v| v / k).collect();
    let chosen_index = (0..grid.len())
        .min_by(|&a, &b| {
            mean_nll[a].total_cmp(&mean_nll[b]).then_with(|| est.method.sparser_first(grid[a], grid[b]))
        })
        .expect("grid is nonempty");
    let chosen = grid[chosen_index];
    let refit = est.fit(&dataset.s, chosen)?;
    Ok(CvResult {
        grid: grid.to_vec(),
        mean_holdout_ll: mean_nll.iter().map(|v| -v).collect(),
        mean_edges: edge_sum.iter().zip(&edge_fits).map(|(e, &c)| if c == 0 { f64::NAN } else { e / c as f64 }).collect(),
        chosen,
        chosen_index,
        chosen_edges: refit.edges,
        refit,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub fit: FitOutcome,
    pub param: f64,
    pub achieved_edges: usize,
    pub exact: bool,
    /// Number of fits spent.
    pub evaluations: usize,
}

/// Tunes the swept parameter so the fit has `target_edges` edges.
///
/// DC maps the target straight to `K = p + 2 target`. The penalty-based
/// methods bisect `lambda` on `[0, lambda_max]` (widening the upper end if it
/// still leaves too many edges); without an exact hit the closest iterate
/// wins, ties to the sparser one.
pub fn calibrate_edges(est: &Estimator, s: &SymMatrix, target_edges: usize) -> Result<Calibration> {
    let p = s.dim();
    let max_edges = p * p.saturating_sub(1) / 2;
    if target_edges > max_edges {
        return Err(Error::InvalidEdgeCount { requested: target_edges, max: max_edges });
    }
    if est.method == Method::Dc {
        let k = (p + 2 * target_edges) as f64;
        let fit = est.fit(s, k)?;
        return Ok(Calibration {
            achieved_edges: fit.edges,
            exact: fit.edges == target_edges,
            fit,
            param: k,
            evaluations: 1,
        });
    }

    let mut evaluations = 0;
    let mut best: Option<(f64, FitOutcome)> = None;
    let mut consider = |lambda: f64, best: &mut Option<(f64, FitOutcome)>| -> Result<usize> {
        let fit = est.fit(s, lambda)?;
        evaluations += 1;
        let edges = fit.edges;
        let key = |e: usize| (e.abs_diff(target_edges), e);
        if best.as_ref().is_none_or(|(_, b)| key(edges) < key(b.edges)) {
            *best = Some((lambda, fit));
        }
        Ok(edges)
    };

    let mut hi = s.max_abs_offdiag();
    let mut lo = 0.0;
    let mut edges_hi = consider(hi, &mut best)?;
    let mut widen = 0;
    while edges_hi > target_edges && widen < 30 {
        lo = hi;
        hi = if hi == 0.0 { 1.0 } else { 2.0 * hi };
        edges_hi = consider(hi, &mut best)?;
        widen += 1;
    }
    if edges_hi != target_edges {
        for _ in 0..CALIBRATION_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            let e = consider(mid, &mut best)?;
            match e.cmp(&target_edges) {
                Ordering::Equal => break,
                Ordering::Greater => lo = mid,
                Ordering::Less => hi = mid,
            }
        }
    }
    let (param, fit) = best.expect("at least one evaluation");
    Ok(Calibration { achieved_edges: fit.edges, exact: fit.edges == target_edges, fit, param, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_examples() {
        assert!(edge_support(&SymMatrix::identity(3), DEFAULT_ZERO_TOL).is_empty());
        let mut o = SymMatrix::identity(3);
        o.set(0, 1, 1e-12);
        assert!(edge_support(&o, DEFAULT_ZERO_TOL).is_empty());
        o.set(1, 2, -0.3);
        assert_eq!(edge_support(&o, DEFAULT_ZERO_TOL), [(1, 2)]);
    }

    #[test]
    fn confusion_examples() {
        let mut truth = SymMatrix::identity(4);
        let mut hat = SymMatrix::identity(4);
        // truth {b, c, d}, hat {a, b, c}
        let (a, b, c, d) = ((0, 1), (0, 2), (1, 3), (2, 3));
        for (j, k) in [b, c, d] {
            truth.set(j, k, 0.2);
        }
        for (j, k) in [a, b, c] {
            hat.set(j, k, -0.1);
        }
        let cc = confusion(&hat, &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(cc, ConfusionCounts { tp: 2, fp: 1, fn_: 1 });
        assert!((f1_score(&cc) - 2.0 / 3.0).abs() < 1e-15);
        let same = confusion(&truth, &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(same, ConfusionCounts { tp: 3, fp: 0, fn_: 0 });
        assert_eq!(f1_score(&same), 1.0);
        let none = confusion(&SymMatrix::identity(4), &truth, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(none, ConfusionCounts { tp: 0, fp: 0, fn_: 3 });
        assert_eq!(f1_score(&none), 0.0);
    }

    #[test]
    fn holdout_examples() {
        assert_eq!(holdout_neg_loglik(&SymMatrix::identity(3), &SymMatrix::identity(3)).unwrap(), 3.0);
        let v = holdout_neg_loglik(&SymMatrix::from_diag(&[2.0]), &SymMatrix::from_diag(&[1.0])).unwrap();
        assert!((v - (2.0 - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn fold_sizes() {
        let f = kfold_split(10, 5, 1).unwrap();
        assert!(f.iter().all(|x| x.len() == 2));
        let f = kfold_split(11, 5, 1).unwrap();
        let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        assert_eq!(sizes, [3, 2, 2, 2, 2]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(kfold_split(3, 5, 0), Err(Error::InvalidFolds { folds: 5, n: 3 }));
        assert_eq!(kfold_split(11, 5, 9).unwrap(), kfold_split(11, 5, 9).unwrap());
    }

    #[test]
    fn grids() {
        let g = k_grid(50, 100);
        assert_eq!(g[0], 51);
        assert_eq!(*g.last().unwrap(), 1275);
        assert!(g.len() <= 100);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(k_grid(10, 2), [11, 55]);

        assert_eq!(lambda_grid(&SymMatrix::identity(3), 100), [0.0]);
        let mut s = SymMatrix::identity(3);
        s.set(0, 2, -0.8);
        s.set(0, 1, 0.3);
        let g = lambda_grid(&s, 5);
        let want = [0.0, 0.2, 0.4, 0.6, 0.8];
        assert!(g.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn dc_calibration_maps_edges_to_k() {
        let s = SymMatrix::identity(50);
        let cal = calibrate_edges(&Estimator::new(Method::Dc), &s, 30).unwrap();
        assert_eq!(cal.param, 110.0);
        assert_eq!(cal.evaluations, 1);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }
}
