//! Scalar and vector kernels: soft thresholding, the largest-K norm and its
//! sign subgradient.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// `sign(x) * max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        return Err(Error::InvalidK { k, min: 1, max: len });
    }
    Ok(())
}

/// Descending `|v_i|`, then ascending index.
fn magnitude_order(v: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b))
}

/// Sum of the `k` largest absolute values of `v`.
pub fn largest_k_norm(v: &[f64], k: usize) -> Result<f64> {
    check_k(k, v.len())?;
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    if k < mags.len() {
        mags.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    }
    Ok(mags[..k].iter().sum())
}

/// A subgradient of the largest-K norm at `v`: signs on the `forced` indices
/// and on the `k - |forced|` remaining entries of largest magnitude, zero
/// elsewhere. Ties go to the smaller index.
pub fn topk_sign_subgradient(v: &[f64], k: usize, forced: &[usize]) -> Result<Vec<f64>> {
    check_k(k, v.len())?;
    if forced.len() > k {
        return Err(Error::InvalidK { k, min: forced.len(), max: v.len() });
    }
    let mut s = vec![0.0; v.len()];
    let mut taken = vec![false; v.len()];
    for &i in forced {
        if i >= v.len() {
            return Err(Error::InvalidParameter("forced index out of range"));
        }
        s[i] = sign(v[i]);
        taken[i] = true;
    }
    let mut rest: Vec<usize> = (0..v.len()).filter(|&i| !taken[i]).collect();
    rest.sort_by(magnitude_order(v));
    for &i in rest.iter().take(k - forced.len()) {
        s[i] = sign(v[i]);
    }
    Ok(s)
}
