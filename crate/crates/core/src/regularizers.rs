//! Row-length truncation (T1) and sampled-block singular value clamping (T2).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TamError};
use crate::linalg::{small_svd, thin_qr, SmallSvd};

/// Incoherence level `μ0` of a rank-`k` factor in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceParams {
    pub mu0: f64,
    pub k: usize,
    pub n: usize,
}

impl IncoherenceParams {
    pub fn new(mu0: f64, k: usize, n: usize) -> Result<Self> {
        if !(mu0 >= 1.0) || !mu0.is_finite() {
            return Err(invalid(format!("mu0 must be a finite value >= 1, got {mu0}")));
        }
        if k == 0 || n == 0 {
            return Err(invalid("k and n must be positive"));
        }
        if mu0 * k as f64 > n as f64 {
            return Err(invalid(format!("mu0*k = {} exceeds n = {n}", mu0 * k as f64)));
        }
        Ok(IncoherenceParams { mu0, k, n })
    }

    /// `√(μ0 k / n)`, the flat row length scaled by `√μ0`.
    pub fn row_scale(&self) -> f64 {
        (self.mu0 * self.k as f64 / self.n as f64).sqrt()
    }

    /// Rows at or above this length are truncated.
    pub fn threshold(&self) -> f64 {
        2.0 * self.row_scale()
    }
}

/// T1 on one row: rows of length `≥ 2√(μ0k/n)` are rescaled to length
/// `√(μ0k/n)`; shorter rows pass through.
pub fn t1_row(u: &[f64], params: &IncoherenceParams) -> Vec<f64> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm >= params.threshold() {
        let c = params.row_scale() / norm;
        u.iter().map(|x| x * c).collect()
    } else {
        u.to_vec()
    }
}

/// T1 applied to every row of `u`.
pub fn t1_matrix(u: &DMatrix<f64>, params: &IncoherenceParams) -> DMatrix<f64> {
    let mut out = u.clone();
    let thr = params.threshold();
    let scale = params.row_scale();
    for i in 0..out.nrows() {
        let norm = out.row(i).norm();
        if norm >= thr {
            out.row_mut(i).scale_mut(scale / norm);
        }
    }
    out
}

/// Whether every normalized singular value `σ·√(n/d)` of a `d × k` block
/// lies in `[√a, √(2−a)]`, i.e. whether the normalized Gramian
/// `(n/d)·AᵀA` has its spectrum in `[a, 2−a]`.
///
/// A block with fewer than `k` singular values (`d < k`) is never compliant.
pub fn spectrum_compliant(s: &[f64], k: usize, a: f64, n: usize, d: usize) -> bool {
    if s.len() < k {
        return false;
    }
    let scale = n as f64 / d as f64;
    s.iter().all(|&x| {
        let g = scale * x * x;
        (a..=2.0 - a).contains(&g)
    })
}

/// T2 from an existing SVD of the `d × k` block.
pub fn t2_from_svd(svd: &SmallSvd, a: f64, n: usize, d: usize) -> DMatrix<f64> {
    let norm = (d as f64 / n as f64).sqrt();
    let lo = a.sqrt();
    let hi = (2.0 - a).sqrt();
    let mut us = svd.u.clone();
    for (c, &s) in svd.s.iter().enumerate() {
        let clamped = (s / norm).clamp(lo, hi) * norm;
        us.column_mut(c).scale_mut(clamped);
    }
    us * svd.v.transpose()
}

/// T2: clamps the normalized singular values of the `d × k` block `a_block`
/// into `[√a, √(2−a)]`, keeping its singular vectors. `d` is taken from the
/// block's row count.
///
/// Zero singular values are lifted along the singular vectors picked by
/// [`small_svd`]. If `d < k` the output has rank at most `d`.
pub fn t2(a_block: &DMatrix<f64>, a: f64, n: usize) -> Result<DMatrix<f64>> {
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("T2 level must lie in (0, 1), got {a}")));
    }
    let d = a_block.nrows();
    if d == 0 {
        return Err(invalid("T2 needs a nonempty block"));
    }
    Ok(t2_from_svd(&small_svd(a_block), a, n, d))
}

/// T1 followed by thin QR; returns the orthonormal factor `Q`.
pub fn truncate_and_orthonormalize(ubar: &DMatrix<f64>, params: &IncoherenceParams) -> Result<DMatrix<f64>> {
    let truncated = t1_matrix(ubar, params);
    let qr = thin_qr(&truncated);
    let sigma_k = small_svd(&qr.r).s.last().copied().unwrap_or(0.0);
    if !(sigma_k >= 1e-12) {
        return Err(TamError::DegenerateTruncation { sigma_k });
    }
    Ok(qr.q)
}
