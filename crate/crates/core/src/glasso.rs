//! Blockwise coordinate-descent graphical lasso.
//!
//! The solver works on the covariance estimate `W`: for every column `i` it
//! solves a lasso problem in the coefficients `beta` against the Gram matrix
//! `W_{-i,-i}`, writes `W_{-i,i} = W_{-i,-i} beta` back and moves on. The
//! precision matrix is rebuilt from the stored coefficients once the sweeps
//! settle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{inv_pd, log_det_pd, Cholesky, SymMatrix};
use crate::norms::{sign, soft_threshold};

/// Entrywise l1 penalty: one weight for every entry or a full weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySpec {
    Scalar(f64),
    Matrix(SymMatrix),
}

impl PenaltySpec {
    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        match self {
            PenaltySpec::Scalar(l) => *l,
            PenaltySpec::Matrix(m) => m.get(j, k),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            PenaltySpec::Scalar(l) => {
                if !(l.is_finite() && *l >= 0.0) {
                    return Err(Error::InvalidParameter("penalty must be finite and nonnegative"));
                }
            }
            PenaltySpec::Matrix(m) => {
                if m.dim() != p {
                    return Err(Error::DimensionMismatch { expected: p, found: m.dim() });
                }
                if m.as_slice().iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(Error::InvalidParameter("penalty must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// The penalty actually applied by a fit: diagonal zeroed when the
    /// diagonal is left unpenalized.
    pub fn effective(&self, p: usize, penalize_diagonal: bool) -> PenaltySpec {
        if penalize_diagonal {
            return self.clone();
        }
        let mut m = SymMatrix::from_fn(p, |j, k| self.at(j, k));
        for j in 0..p {
            m.set(j, j, 0.0);
        }
        PenaltySpec::Matrix(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlassoOptions {
    /// Sweeps stop once the mean absolute change of the off-diagonal of `W`
    /// falls below `tol * mean|offdiag(S)|`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Coordinate-descent threshold for each column lasso.
    pub inner_tol: f64,
    pub penalize_diagonal: bool,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        GlassoOptions { tol: 1e-5, max_sweeps: 200, inner_tol: 1e-7, penalize_diagonal: true }
    }
}

impl GlassoOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("glasso tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlassoSolution {
    pub omega: SymMatrix,
    /// Covariance estimate `W`.
    pub sigma: SymMatrix,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

/// Coordinate descent on `1/2 b'Qb - b'beta + sum rho_j |beta_j|` with `q`
/// a dense symmetric `m x m` Gram matrix, row-major. Returns false if
/// `max_sweeps` ran out first, leaving the last iterate in `beta`.
fn cd_solve(q: &[f64], b: &[f64], rho: &[f64], beta: &mut [f64], inner_tol: f64, max_sweeps: usize) -> bool {
    let m = b.len();
    debug_assert_eq!(q.len(), m * m);
    // grad = Q beta, kept in sync with every coordinate move
    let mut grad = vec![0.0; m];
    for (k, &bk) in beta.iter().enumerate() {
        if bk != 0.0 {
            axpy(bk, &q[k * m..(k + 1) * m], &mut grad);
        }
    }
    // returns |change| and whether the sign of beta_j changed
    let update = |j: usize, beta: &mut [f64], grad: &mut [f64]| -> (f64, bool) {
        let qjj = q[j * m + j];
        let old = beta[j];
        let z = b[j] - (grad[j] - qjj * old);
        let new = soft_threshold(z, rho[j]) / qjj;
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            axpy(delta, &q[j * m..(j + 1) * m], grad);
        }
        (delta.abs(), sign(new) != sign(old))
    };
    let mut sweeps = 0;
    loop {
        // full pass over every coordinate
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..m {
            max_change = max_change.max(update(j, beta, &mut grad).0);
        }
        let scale = 1.0 + beta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max_change <= inner_tol * scale {
            return true;
        }
        // then settle the active set; once a sweep leaves every sign alone,
        // try an exact solve (backing off if it breaks down numerically)
        let mut active: Vec<usize> = (0..m).filter(|&j| beta[j] != 0.0).collect();
        let (mut wait, mut backoff) = (0usize, 1usize);
        loop {
            if sweeps >= max_sweeps {
                return false;
            }
            sweeps += 1;
            let mut max_change = 0.0f64;
            let mut flipped = false;
            for &j in &active {
                let (change, f) = update(j, beta, &mut grad);
                max_change = max_change.max(change);
                flipped |= f;
            }
            let scale = 1.0 + beta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if max_change <= inner_tol * scale {
                break;
            }
            if flipped {
                continue;
            }
            if wait > 0 {
                wait -= 1;
                continue;
            }
            if solve_active(q, b, rho, beta, &mut active, &mut grad) {
                break;
            }
            wait = backoff;
            backoff *= 2;
        }
        if sweeps >= max_sweeps {
            return false;
        }
    }
}

/// Active-set solve. With the signs of `beta` on `active` held fixed the
/// lasso objective is a quadratic minimized by `Q_AA x = b_A - rho_A sign(beta_A)`.
/// If `x` keeps every sign it is taken; otherwise `beta` moves towards `x`
/// up to the first sign change (the objective still decreases), that
/// coordinate leaves the active set and the solve is repeated. Returns
/// false if the linear algebra breaks down; `beta` then holds the last
/// descent step taken.
fn solve_active(
    q: &[f64],
    b: &[f64],
    rho: &[f64],
    beta: &mut [f64],
    active: &mut Vec<usize>,
    grad: &mut [f64],
) -> bool {
    let m = b.len();
    let a = active.len();
    let mut qa = vec![0.0; a * a];
    for (r, &j) in active.iter().enumerate() {
        for (c, &k) in active.iter().enumerate() {
            qa[r * a + c] = q[j * m + k];
        }
    }
    let Ok(mut chol) = Cholesky::factor(&SymMatrix::from_raw(a, qa)) else {
        return false;
    };
    let mut rhs: Vec<f64> = active.iter().map(|&j| b[j] - rho[j] * sign(beta[j])).collect();
    let mut x = vec![0.0; a];
    let mut ok = true;
    while !active.is_empty() {
        x.clear();
        x.extend_from_slice(&rhs);
        chol.solve_in_place(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            ok = false;
            break;
        }
        // largest step in [0, 1] before some coordinate crosses zero
        let mut t = 1.0;
        let mut blocking = None;
        for (r, &j) in active.iter().enumerate() {
            if sign(x[r]) != sign(beta[j]) {
                let tj = beta[j] / (beta[j] - x[r]);
                if tj < t {
                    t = tj;
                    blocking = Some(r);
                }
            }
        }
        for (r, &j) in active.iter().enumerate() {
            beta[j] += t * (x[r] - beta[j]);
        }
        let Some(r) = blocking else { break };
        beta[active[r]] = 0.0;
        active.remove(r);
        rhs.remove(r);
        chol.remove(r);
    }
    // a sign-consistent solve can still leave exact zeros
    active.retain(|&j| beta[j] != 0.0);
    grad.iter_mut().for_each(|g| *g = 0.0);
    for &j in active.iter() {
        axpy(beta[j], &q[j * m..(j + 1) * m], grad);
    }
    ok
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Lasso coordinate descent with Gram matrix `q`, linear term `b` and
/// per-coordinate penalties `rho`, warm-started at `beta0`.
pub fn lasso_cd(q: &SymMatrix, b: &[f64], rho: &[f64], beta0: &[f64], inner_tol: f64) -> Result<Vec<f64>> {
    let m = q.dim();
    for len in [b.len(), rho.len(), beta0.len()] {
        if len != m {
            return Err(Error::DimensionMismatch { expected: m, found: len });
        }
    }
    if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidParameter("lasso penalties must be finite and nonnegative"));
    }
    Cholesky::factor(q)?;
    let mut beta = beta0.to_vec();
    let cap = 10 * GlassoOptions::default().max_sweeps;
    if !cd_solve(q.as_slice(), b, rho, &mut beta, inner_tol, cap) {
        return Err(Error::NonConvergence { iterations: cap });
    }
    Ok(beta)
}

/// Fits the l1-penalized Gaussian likelihood `-log|O| + tr(OS) + sum L_jk |o_jk|`.
///
/// Non-convergence within `max_sweeps` is reported through
/// `converged = false` together with the final iterate.
pub fn glasso_fit(s: &SymMatrix, penalty: &PenaltySpec, opts: &GlassoOptions) -> Result<GlassoSolution> {
    fit(s, penalty, opts, None)
}

/// Same as [`glasso_fit`] but starting from a previous solution.
pub fn glasso_fit_warm(
    s: &SymMatrix,
    penalty: &PenaltySpec,
    opts: &GlassoOptions,
    start: &GlassoSolution,
) -> Result<GlassoSolution> {
    s.check_dim(&start.omega)?;
    fit(s, penalty, opts, Some(start))
}

fn fit(s: &SymMatrix, penalty: &PenaltySpec, opts: &GlassoOptions, start: Option<&GlassoSolution>) -> Result<GlassoSolution> {
    opts.validate()?;
    let p = s.dim();
    penalty.validate(p)?;
    if !s.is_finite() {
        return Err(Error::NonFinite);
    }
    if (0..p).any(|j| !(s.get(j, j) > 0.0)) {
        return Err(Error::InvalidParameter("covariance diagonal must be positive"));
    }
    let penalty = penalty.effective(p, opts.penalize_diagonal);

    // W starts at S + diag(L); the diagonal stays there throughout
    let mut w = s.clone();
    for j in 0..p {
        w.set(j, j, s.get(j, j) + penalty.at(j, j));
    }
    Cholesky::factor(&w)?;
    // coefficient matrix, column i holds beta for the i-th block (entry i unused)
    let mut coef = vec![0.0; p * p];
    if let Some(start) = start {
        for j in 0..p {
            for k in 0..p {
                if j != k {
                    w.set(j, k, start.sigma.get(j, k));
                }
            }
        }
        for i in 0..p {
            let oii = start.omega.get(i, i);
            for j in 0..p {
                if j != i {
                    coef[j * p + i] = -start.omega.get(j, i) / oii;
                }
            }
        }
    }

    let threshold = opts.tol * s.mean_abs_offdiag();
    let pairs = (p * p.saturating_sub(1)) as f64;
    let inner_cap = 10 * opts.max_sweeps;
    let m = p.saturating_sub(1);
    let mut b = vec![0.0; m];
    let mut rho = vec![0.0; m];
    let mut beta = vec![0.0; m];
    let mut w_col = vec![0.0; m];
    let mut w_sub = vec![0.0; m * m];

    let mut sweeps = 0;
    let mut converged = p <= 1;
    let mut inner_ok = true;
    let mut best: Option<(f64, SymMatrix, Vec<f64>)> = None;
    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        inner_ok = true;
        let mut change = 0.0;
        for i in 0..p {
            let full = |j: usize| j + usize::from(j >= i);
            for j in 0..m {
                b[j] = s.get(full(j), i);
                rho[j] = penalty.at(full(j), i);
                beta[j] = coef[full(j) * p + i];
            }
            // W_{-i,-i} copied out contiguously
            for j in 0..m {
                let row = w.row(full(j));
                let dst = &mut w_sub[j * m..(j + 1) * m];
                dst[..i].copy_from_slice(&row[..i]);
                dst[i..].copy_from_slice(&row[i + 1..]);
            }
            inner_ok &= cd_solve(&w_sub, &b, &rho, &mut beta, opts.inner_tol, inner_cap);
            // w_i = W_{-i,-i} beta
            w_col.iter_mut().for_each(|v| *v = 0.0);
            for (k, &bk) in beta.iter().enumerate() {
                if bk != 0.0 {
                    axpy(bk, &w_sub[k * m..(k + 1) * m], &mut w_col);
                }
            }
            for j in 0..m {
                change += (w_col[j] - w.get(full(j), i)).abs();
                w.set(full(j), i, w_col[j]);
                coef[full(j) * p + i] = beta[j];
            }
        }
        let mean_change = change / pairs;
        if mean_change <= threshold {
            converged = true;
        } else if best.as_ref().is_none_or(|(c, _, _)| mean_change < *c) {
            best = Some((mean_change, w.clone(), coef.clone()));
        }
    }
    converged &= inner_ok;
    if !converged {
        if let Some((_, bw, bc)) = best {
            w = bw;
            coef = bc;
        }
    }

    let omega = assemble_precision(&w, &coef);
    Cholesky::factor(&omega)?;
    let kkt = kkt_residual(&omega, s, &penalty)?;
    Ok(GlassoSolution { omega, sigma: w, sweeps, converged, kkt_residual: kkt })
}

/// `o_ii = 1 / (w_ii - w_i' beta_i)`, `o_{-i,i} = -beta_i o_ii`, then
/// averaged with its transpose.
fn assemble_precision(w: &SymMatrix, coef: &[f64]) -> SymMatrix {
    let p = w.dim();
    let mut omega = SymMatrix::zeros(p);
    let data = omega.data_mut();
    for i in 0..p {
        let dot: f64 = (0..p).filter(|&j| j != i).map(|j| w.get(j, i) * coef[j * p + i]).sum();
        let oii = 1.0 / (w.get(i, i) - dot);
        data[i * p + i] = oii;
        for j in 0..p {
            if j != i {
                data[j * p + i] = -coef[j * p + i] * oii;
            }
        }
    }
    omega.symmetrize();
    omega
}

/// Largest violation of the stationarity system `-O^{-1} + S + L * Gamma(O) = 0`
/// with `Gamma` the entrywise subdifferential of `|.|`.
pub fn kkt_residual(omega: &SymMatrix, s: &SymMatrix, penalty: &PenaltySpec) -> Result<f64> {
    omega.check_dim(s)?;
    let p = omega.dim();
    penalty.validate(p)?;
    let cov = inv_pd(omega)?;
    let mut worst = 0.0f64;
    for j in 0..p {
        for k in j..p {
            let g = s.get(j, k) - cov.get(j, k);
            let lam = penalty.at(j, k);
            let o = omega.get(j, k);
            let r = if o != 0.0 { (g + lam * sign(o)).abs() } else { (g.abs() - lam).max(0.0) };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `-log|O| + tr(O S)`.
pub fn neg_log_likelihood(omega: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    Ok(-log_det_pd(omega)? + omega.trace_product(s)?)
}

/// `-log|O| + tr(O S) + sum_jk L_jk |o_jk|`.
pub fn objective_penalized(omega: &SymMatrix, s: &SymMatrix, penalty: &PenaltySpec) -> Result<f64> {
    let p = omega.dim();
    penalty.validate(p)?;
    let base = neg_log_likelihood(omega, s)?;
    let pen: f64 = match penalty {
        PenaltySpec::Scalar(l) => l * omega.l1_norm(),
        PenaltySpec::Matrix(m) => omega.as_slice().iter().zip(m.as_slice()).map(|(o, l)| l * o.abs()).sum(),
    };
    Ok(base + pen)
}
