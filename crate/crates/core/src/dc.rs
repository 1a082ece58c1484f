//! Cardinality-constrained precision estimation by a DC algorithm.
//!
//! The constraint `||vec(O)||_0 <= K` is rewritten as
//! `||vec(O)||_1 - |||vec(O)|||_K = 0` and moved into the objective with
//! weight `eta`:
//!
//! ```text
//! -log|O| + tr(O S) + eta (||vec(O)||_1 - |||vec(O)|||_K)
//! ```
//!
//! Each outer iteration linearizes the concave part `-eta |||vec(O)|||_K` at
//! the current iterate through a sign subgradient `V`. What is left is an
//! ordinary graphical lasso on the shifted covariance `S - eta V` with scalar
//! penalty `eta`, so every step is a call to [`glasso_fit`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::glasso::{glasso_fit, neg_log_likelihood, GlassoOptions, PenaltySpec};
use crate::matrix::{frobenius_sq_diff, inv_pd, is_positive_definite, SymMatrix};
use crate::norms::{largest_k_norm, sign};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcOptions {
    /// Number of entries of `vec(O)` allowed to be nonzero, diagonal
    /// included; `E` undirected edges correspond to `K = p + 2E`.
    pub k: usize,
    /// Shrink factor applied to `eta` until `S - eta V` is positive definite.
    pub alpha: f64,
    /// Stop once `||O_t - O_{t-1}||_F^2 < eps`.
    pub eps: f64,
    pub max_outer: usize,
    pub eta_min: f64,
    pub inner: GlassoOptions,
}

impl DcOptions {
    pub fn new(k: usize) -> Self {
        DcOptions { k, alpha: 0.5, eps: 1e-4, max_outer: 50, eta_min: 1e-12, inner: GlassoOptions::default() }
    }

    /// Cardinality for a target number of undirected edges.
    pub fn for_edges(p: usize, edges: usize) -> Self {
        Self::new(p + 2 * edges)
    }

    fn validate(&self, p: usize) -> Result<()> {
        check_k(self.k, p)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)"));
        }
        if !(self.eps > 0.0) || !(self.eta_min > 0.0) || self.max_outer == 0 {
            return Err(Error::InvalidParameter("eps, eta_min and max_outer must be positive"));
        }
        Ok(())
    }
}

/// One outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcTraceEntry {
    pub eta: f64,
    /// `eta = eta0 * alpha^eta_exponent` with `eta0 = min diag(S)`.
    pub eta_exponent: u32,
    /// Penalized objective at the iterate entering this step, weighted by this step's `eta`.
    pub objective_start: f64,
    /// Penalized objective at the new iterate, same `eta`.
    pub objective: f64,
    /// Linearized objective at the entering iterate.
    pub surrogate_start: f64,
    /// Linearized objective at the new iterate.
    pub surrogate: f64,
    pub frob_step: f64,
    /// `||vec(O)||_1 - |||vec(O)|||_K` at the new iterate.
    pub constraint_gap: f64,
    pub inner_sweeps: usize,
    pub inner_converged: bool,
    pub inner_kkt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcSolution {
    pub omega: SymMatrix,
    pub trace: Vec<DcTraceEntry>,
    pub converged: bool,
    pub k: usize,
}

impl DcSolution {
    pub fn constraint_gap(&self) -> f64 {
        self.trace.last().map_or(0.0, |t| t.constraint_gap)
    }
}

fn check_k(k: usize, p: usize) -> Result<()> {
    if k < p || k > p * p {
        return Err(Error::InvalidK { k, min: p, max: p * p });
    }
    Ok(())
}

/// Sign subgradient of the largest-K norm at `vec(omega)`, as a matrix.
///
/// The diagonal is always selected (it is strictly positive for a positive
/// definite iterate). The remaining `k - p` slots go to off-diagonal pairs
/// `(j, k), (k, j)` in order of decreasing magnitude, ties to the smaller
/// flat index; an odd leftover slot stays empty so that `V` is symmetric.
pub fn subgradient_matrix(omega: &SymMatrix, k: usize) -> Result<SymMatrix> {
    let p = omega.dim();
    check_k(k, p)?;
    let mut v = SymMatrix::identity(p);
    let pairs = (k - p) / 2;
    if pairs == 0 {
        return Ok(v);
    }
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for l in (j + 1)..p {
            cand.push((omega.get(j, l).abs(), j, l));
        }
    }
    let by_magnitude = |a: &(f64, usize, usize), b: &(f64, usize, usize)| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2)));
    if pairs < cand.len() {
        cand.select_nth_unstable_by(pairs - 1, by_magnitude);
        cand.truncate(pairs);
    }
    for &(_, j, l) in &cand {
        v.set(j, l, sign(omega.get(j, l)));
    }
    Ok(v)
}

/// First `eta` in `eta0, eta0 alpha, eta0 alpha^2, ...` (with
/// `eta0 = min diag(s)`) for which `s - eta v` is positive definite.
pub fn select_eta(s: &SymMatrix, v: &SymMatrix, alpha: f64, eta_min: f64) -> Result<f64> {
    select_eta_exponent(s, v, alpha, eta_min).map(|(eta, _)| eta)
}

fn select_eta_exponent(s: &SymMatrix, v: &SymMatrix, alpha: f64, eta_min: f64) -> Result<(f64, u32)> {
    s.check_dim(v)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)"));
    }
    let eta0 = s.diag().into_iter().fold(f64::INFINITY, f64::min);
    let mut eta = eta0;
    let mut exponent = 0u32;
    while eta >= eta_min && eta.is_finite() {
        if is_positive_definite(&s.add_scaled(-eta, v)?) {
            return Ok((eta, exponent));
        }
        exponent += 1;
        eta = eta0 * libm::pow(alpha, f64::from(exponent));
    }
    Err(Error::EtaUnderflow { eta })
}

/// `||vec(O)||_1 - |||vec(O)|||_K`, zero exactly when at most `k` entries are nonzero.
pub fn constraint_gap(omega: &SymMatrix, k: usize) -> Result<f64> {
    check_k(k, omega.dim())?;
    let gap = omega.l1_norm() - largest_k_norm(omega.as_slice(), k)?;
    Ok(gap.max(0.0))
}

/// `-log|O| + tr(O S) + eta * constraint_gap(O, k)`.
pub fn dc_objective(omega: &SymMatrix, s: &SymMatrix, eta: f64, k: usize) -> Result<f64> {
    Ok(neg_log_likelihood(omega, s)? + eta * constraint_gap(omega, k)?)
}

/// The convex majorant minimized by one outer step:
/// `-log|O| + tr(O S) + eta ||vec(O)||_1 - eta tr(O V)`.
pub fn linearized_objective(omega: &SymMatrix, s: &SymMatrix, eta: f64, v: &SymMatrix) -> Result<f64> {
    Ok(neg_log_likelihood(omega, s)? + eta * (omega.l1_norm() - omega.trace_product(v)?))
}

/// Runs the DC iteration from `O_0 = (S + I)^{-1}`.
///
/// Hitting `max_outer` returns the last iterate with `converged = false`.
pub fn dc_fit(s: &SymMatrix, opts: &DcOptions) -> Result<DcSolution> {
    let p = s.dim();
    opts.validate(p)?;
    if !s.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut omega = inv_pd(&s.add_scaled(1.0, &SymMatrix::identity(p))?)?;
    let mut trace: Vec<DcTraceEntry> = Vec::new();
    let mut converged = false;
    let mut prev_v: Option<SymMatrix> = None;
    for _ in 0..opts.max_outer {
        let v = subgradient_matrix(&omega, opts.k)?;
        let entry = if prev_v.as_ref() == Some(&v) {
            // same V, hence same eta and the same subproblem: the fit would reproduce omega exactly
            let last = trace[trace.len() - 1];
            let objective = dc_objective(&omega, s, last.eta, opts.k)?;
            let surrogate = linearized_objective(&omega, s, last.eta, &v)?;
            DcTraceEntry {
                objective_start: objective,
                objective,
                surrogate_start: surrogate,
                surrogate,
                frob_step: 0.0,
                ..last
            }
        } else {
            let (eta, eta_exponent) = select_eta_exponent(s, &v, opts.alpha, opts.eta_min)?;
            let step = step_with(s, &omega, v.clone(), eta, eta_exponent, opts)?;
            omega = step.omega;
            step.entry
        };
        prev_v = Some(v);
        let done = entry.frob_step < opts.eps;
        trace.push(entry);
        if done {
            converged = true;
            break;
        }
    }
    Ok(DcSolution { omega, trace, converged, k: opts.k })
}

/// Result of a single outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct DcStep {
    pub omega: SymMatrix,
    pub v: SymMatrix,
    pub shifted: SymMatrix,
    pub entry: DcTraceEntry,
}

/// One outer iteration from `omega`: subgradient, `eta`, then a graphical
/// lasso on `S - eta V` with penalty `eta`.
pub fn dc_step(s: &SymMatrix, omega: &SymMatrix, opts: &DcOptions) -> Result<DcStep> {
    let v = subgradient_matrix(omega, opts.k)?;
    let (eta, eta_exponent) = select_eta_exponent(s, &v, opts.alpha, opts.eta_min)?;
    step_with(s, omega, v, eta, eta_exponent, opts)
}

fn step_with(s: &SymMatrix, omega: &SymMatrix, v: SymMatrix, eta: f64, eta_exponent: u32, opts: &DcOptions) -> Result<DcStep> {
    let shifted = s.add_scaled(-eta, &v)?;
    let fit = glasso_fit(&shifted, &PenaltySpec::Scalar(eta), &opts.inner)?;
    let entry = DcTraceEntry {
        eta,
        eta_exponent,
        objective_start: dc_objective(omega, s, eta, opts.k)?,
        objective: dc_objective(&fit.omega, s, eta, opts.k)?,
        surrogate_start: linearized_objective(omega, s, eta, &v)?,
        surrogate: linearized_objective(&fit.omega, s, eta, &v)?,
        frob_step: frobenius_sq_diff(&fit.omega, omega)?,
        constraint_gap: constraint_gap(&fit.omega, opts.k)?,
        inner_sweeps: fit.sweeps,
        inner_converged: fit.converged,
        inner_kkt: fit.kkt_residual,
    };
    Ok(DcStep { omega: fit.omega, v, shifted, entry })
}
