//! Dense symmetric matrices and the Cholesky-based routines every solver
//! leans on.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Asymmetry tolerated on construction before the input is rejected.
const SYMMETRY_TOL: f64 = 1e-8;

/// Dense symmetric `p x p` matrix stored row-major with both triangles.
///
/// Constructors symmetrize their input as `(A + A^T) / 2`, so the two
/// triangles are always bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, checking shape, finiteness and
    /// (approximate) symmetry.
    pub fn from_row_major(p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::DimensionMismatch { expected: p * p, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for j in 0..p {
            for k in (j + 1)..p {
                let (a, b) = (data[j * p + k], data[k * p + j]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric { row: j, col: k });
                }
            }
        }
        let mut m = SymMatrix { p, data };
        m.symmetrize();
        Ok(m)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.len();
        let mut data = Vec::with_capacity(p * p);
        for row in rows {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(p, data)
    }

    pub fn zeros(p: usize) -> Self {
        SymMatrix { p, data: vec![0.0; p * p] }
    }

    pub fn identity(p: usize) -> Self {
        Self::from_diag(&vec![1.0; p])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let p = diag.len();
        let mut m = Self::zeros(p);
        for (j, &d) in diag.iter().enumerate() {
            m.data[j * p + j] = d;
        }
        m
    }

    /// Evaluates `f(j, k)` on the upper triangle and mirrors it.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(p);
        for j in 0..p {
            for k in j..p {
                let v = f(j, k);
                m.data[j * p + k] = v;
                m.data[k * p + j] = v;
            }
        }
        m
    }

    /// Wraps entries that are symmetric by construction.
    pub(crate) fn from_raw(p: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), p * p);
        SymMatrix { p, data }
    }

    pub(crate) fn symmetrize(&mut self) {
        let p = self.p;
        for j in 0..p {
            for k in (j + 1)..p {
                let v = 0.5 * (self.data[j * p + k] + self.data[k * p + j]);
                self.data[j * p + k] = v;
                self.data[k * p + j] = v;
            }
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.p + k]
    }

    /// Sets entry `(j, k)` and its mirror `(k, j)`.
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        self.data[j * self.p + k] = value;
        self.data[k * self.p + j] = value;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.p..(j + 1) * self.p]
    }

    /// Row-major view, which is also `vec(A)` since `A` is symmetric.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p).map(|j| self.get(j, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: other.p });
        }
        Ok(())
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + scale * b).collect();
        Ok(SymMatrix::from_raw(self.p, data))
    }

    /// `tr(A B)` for symmetric `A`, `B`, i.e. the entrywise inner product.
    pub fn trace_product(&self, other: &SymMatrix) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// General product `A B`, row-major. The result need not be symmetric.
    pub fn matmul(&self, other: &SymMatrix) -> Result<Vec<f64>> {
        self.check_dim(other)?;
        let p = self.p;
        let mut out = vec![0.0; p * p];
        for j in 0..p {
            let a_row = self.row(j);
            let out_row = &mut out[j * p..(j + 1) * p];
            for (m, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(m)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `||vec(A)||_1`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Largest off-diagonal magnitude, `max_{j<k} |a_jk|`.
    pub fn max_abs_offdiag(&self) -> f64 {
        self.offdiag_upper().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_abs_offdiag(&self) -> f64 {
        let count = self.p * self.p.saturating_sub(1) / 2;
        if count == 0 {
            return 0.0;
        }
        self.offdiag_upper().map(f64::abs).sum::<f64>() / count as f64
    }

    /// Upper-triangle off-diagonal entries in row-major order.
    pub fn offdiag_upper(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.p).flat_map(move |j| ((j + 1)..self.p).map(move |k| self.get(j, k)))
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky {
    p: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        Self::factor_with_floor(a, 0.0)
    }

    /// Factorizes `a`, failing as soon as a pivot (before its square root) is
    /// not strictly above `floor`.
    pub fn factor_with_floor(a: &SymMatrix, floor: f64) -> Result<Self> {
        let p = a.dim();
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            for i in j..p {
                let v = a.get(i, j) - dot(&l[i * p..i * p + j], &l[j * p..j * p + j]);
                if i == j {
                    // negated test so that NaN pivots fail too
                    if !(v > floor) {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[j * p + j] = libm::sqrt(v);
                } else {
                    l[i * p + j] = v / l[j * p + j];
                }
            }
        }
        Ok(Cholesky { p, l })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Entry `L_jk` (zero above the diagonal).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.l[j * self.p + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.p).map(|j| libm::log(self.get(j, j))).sum::<f64>()
    }

    /// Computes `L x` for a vector `x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        let p = self.p;
        for (i, o) in out.iter_mut().enumerate().take(p) {
            *o = self.l[i * p..i * p + i + 1].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Turns this into the factor of `A` with row and column `r` deleted.
    ///
    /// The rows below `r` lose their `r`-th column, which is folded back in
    /// as a rank-one update of the trailing block.
    pub fn remove(&mut self, r: usize) {
        let p = self.p;
        assert!(r < p, "index out of range");
        let q = p - 1;
        let mut x: Vec<f64> = ((r + 1)..p).map(|i| self.l[i * p + r]).collect();
        // compact in place; every destination precedes its source
        let l = &mut self.l;
        for i in 1..p {
            if i < r {
                l.copy_within(i * p..i * p + i + 1, i * q);
            } else if i > r {
                let ni = i - 1;
                l.copy_within(i * p..i * p + r, ni * q);
                l.copy_within(i * p + r + 1..i * p + i + 1, ni * q + r);
            }
        }
        l.truncate(q * q);
        for i in 0..q {
            l[i * q + i + 1..(i + 1) * q].fill(0.0);
        }
        for k in r..q {
            let d = l[k * q + k];
            let xk = x[k - r];
            let h = libm::hypot(d, xk);
            let (c, s) = (h / d, xk / d);
            l[k * q + k] = h;
            for u in (k + 1)..q {
                let v = (l[u * q + k] + s * x[u - r]) / c;
                l[u * q + k] = v;
                x[u - r] = c * x[u - r] - s * v;
            }
        }
        self.p = q;
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let p = self.p;
        for i in 0..p {
            b[i] = (b[i] - dot(&self.l[i * p..i * p + i], &b[..i])) / self.l[i * p + i];
        }
        // L^T x = y, sweeping rows of L from the bottom
        for i in (0..p).rev() {
            let xi = b[i] / self.l[i * p + i];
            b[i] = xi;
            for (bm, lm) in b[..i].iter_mut().zip(&self.l[i * p..i * p + i]) {
                *bm -= lm * xi;
            }
        }
    }

    pub fn inverse(&self) -> SymMatrix {
        let p = self.p;
        // x = L^{-1}, lower triangular, built column by column
        let mut x = vec![0.0; p * p];
        for c in 0..p {
            x[c * p + c] = 1.0 / self.get(c, c);
            for i in (c + 1)..p {
                let mut s = 0.0;
                for m in c..i {
                    s += self.l[i * p + m] * x[m * p + c];
                }
                x[i * p + c] = -s / self.get(i, i);
            }
        }
        // A^{-1} = L^{-T} L^{-1}
        let mut inv = vec![0.0; p * p];
        for j in 0..p {
            for k in j..p {
                let mut s = 0.0;
                for m in k..p {
                    s += x[m * p + j] * x[m * p + k];
                }
                inv[j * p + k] = s;
                inv[k * p + j] = s;
            }
        }
        SymMatrix::from_raw(p, inv)
    }
}

/// Inner product with four independent partial sums, which lets the
/// compiler vectorize it.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn cholesky(a: &SymMatrix) -> Result<Cholesky> {
    Cholesky::factor(a)
}

/// `log |A|` for positive definite `A`.
pub fn log_det_pd(a: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::factor(a)?.log_det())
}

pub fn inv_pd(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(Cholesky::factor(a)?.inverse())
}

/// Positive definiteness by Cholesky success.
pub fn is_positive_definite(a: &SymMatrix) -> bool {
    Cholesky::factor(a).is_ok()
}

/// `||A - B||_F^2`.
pub fn frobenius_sq_diff(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_dim(b)?;
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations. Intended for small `p`.
pub fn symmetric_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let p = a.dim();
    let mut m = a.as_slice().to_vec();
    let scale = a.as_slice().iter().map(|v| v * v).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
            .map(|(j, k)| m[j * p + k] * m[j * p + k])
            .sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for j in 0..p {
            for k in (j + 1)..p {
                let ajk = m[j * p + k];
                if ajk == 0.0 {
                    continue;
                }
                let theta = (m[k * p + k] - m[j * p + j]) / (2.0 * ajk);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..p {
                    let (mrj, mrk) = (m[r * p + j], m[r * p + k]);
                    m[r * p + j] = c * mrj - s * mrk;
                    m[r * p + k] = s * mrj + c * mrk;
                }
                for r in 0..p {
                    let (mjr, mkr) = (m[j * p + r], m[k * p + r]);
                    m[j * p + r] = c * mjr - s * mkr;
                    m[k * p + r] = s * mjr + c * mkr;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..p).map(|j| m[j * p + j]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Lower bound on the smallest eigenvalue, accurate to `tol`, found by
/// bisecting on the shift `c` for which `A - c I` stays Cholesky-factorable.
pub fn min_eigenvalue_bisect(a: &SymMatrix, tol: f64) -> f64 {
    let p = a.dim();
    if p == 0 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for j in 0..p {
        let radius: f64 = a.row(j).iter().enumerate().filter(|&(k, _)| k != j).map(|(_, v)| v.abs()).sum();
        lo = lo.min(a.get(j, j) - radius);
        hi = hi.min(a.get(j, j));
    }
    let shifted_pd = |c: f64| {
        let mut m = a.clone();
        for j in 0..p {
            m.data[j * p + j] -= c;
        }
        is_positive_definite(&m)
    };
    let mut step = tol.max(1e-12 * (1.0 + lo.abs()));
    lo -= step;
    while !shifted_pd(lo) {
        step *= 2.0;
        lo -= step;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shifted_pd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
