//! Dense small-matrix kernels, sparse truncated SVD and the subspace
//! distance.
//!
//! Factors are `n × k` with `k` small, so every routine here is written to
//! cost `O(n k²)` (dense) or `O(k · nnz)` per sweep (sparse).

use std::ops::Deref;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TamError};
use crate::sparse::SparseMatrix;

/// Tolerance used when a factor claims to be orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Dense `n × k` factor. Row `i` is the vector `u_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    data: DMatrix<f64>,
    orthonormal: bool,
}

impl FactorMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TamError::InvalidParameter("factor has non-finite entries".into()));
        }
        Ok(FactorMatrix {
            data,
            orthonormal: false,
        })
    }

    /// Wraps `data` and checks its column Gram matrix against the identity.
    pub fn orthonormal(data: DMatrix<f64>) -> Result<Self> {
        let mut f = Self::new(data)?;
        let err = orthonormality_error(&f.data);
        if err > ORTHONORMAL_TOL {
            return Err(TamError::InvalidParameter(format!(
                "factor is not orthonormal (max |QᵀQ - I| = {err:.3e})"
            )));
        }
        f.orthonormal = true;
        Ok(f)
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

impl Deref for FactorMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Largest entry of `|QᵀQ − I|`.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let k = g.nrows();
    (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Some diagonal entry of `R` fell below `1e-12 · ‖A‖_F`.
    pub rank_deficient: bool,
}

/// Householder thin QR with a nonnegative `R` diagonal.
pub fn thin_qr(a: &DMatrix<f64>) -> ThinQr {
    let (n, k) = a.shape();
    assert!(n >= k, "thin_qr needs rows >= cols, got {n}x{k}");
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    let cutoff = 1e-12 * a.norm();
    let rank_deficient = k > 0 && (0..k).any(|i| r[(i, i)] <= cutoff);
    ThinQr {
        q,
        r,
        rank_deficient,
    }
}

/// Thin SVD `A = U diag(S) Vᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct SmallSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SmallSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (c, &s) in self.s.iter().enumerate() {
            us.column_mut(c).scale_mut(s);
        }
        us * self.v.transpose()
    }
}

/// Thin SVD of a small dense block.
///
/// Singular triplets are sorted by descending singular value and each left
/// vector is flipped so that its largest-magnitude entry is positive. Left
/// vectors for zero singular values are completed to an orthonormal set.
///
/// Computed as a Householder QR followed by one-sided Jacobi on `R`, which
/// stays accurate on rank-deficient blocks.
pub fn small_svd(a: &DMatrix<f64>) -> SmallSvd {
    let (rows, cols) = a.shape();
    if rows < cols {
        let t = small_svd(&a.transpose());
        return orient(t.v, t.s, t.u);
    }
    let p = cols;
    if p == 0 {
        return SmallSvd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        };
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let (w, v) = one_sided_jacobi(qr.r());
    let norms: Vec<f64> = (0..p).map(|c| w.column(c).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let top = norms[order[0]];
    let cutoff = top * f64::EPSILON * p as f64;
    let mut ur = DMatrix::zeros(p, p);
    let mut vs = DMatrix::zeros(p, p);
    let mut s = Vec::with_capacity(p);
    let mut null = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        vs.set_column(dst, &v.column(src));
        if norms[src] > cutoff {
            ur.set_column(dst, &(w.column(src) / norms[src]));
            s.push(norms[src]);
        } else {
            null.push(dst);
            s.push(0.0);
        }
    }
    complete_columns(&mut ur, &null);
    orient(q * ur, s, vs)
}

/// Applies the sign convention and packs the triplets.
fn orient(mut u: DMatrix<f64>, s: Vec<f64>, mut v: DMatrix<f64>) -> SmallSvd {
    for c in 0..s.len() {
        let pivot = u.column(c).iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
    SmallSvd { u, s, v }
}

/// Hestenes rotations on the columns of `w` until every pair is orthogonal
/// to working precision. Returns `(W V, V)`.
fn one_sided_jacobi(mut w: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = w.ncols();
    let mut v = DMatrix::identity(p, p);
    let tol = f64::EPSILON * (w.nrows() as f64).sqrt();
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate(&mut w, i, j, c, sn);
                rotate(&mut v, i, j, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

fn rotate(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all other
/// columns (classical Gram-Schmidt, applied twice).
fn complete_columns(u: &mut DMatrix<f64>, null: &[usize]) {
    let n = u.nrows();
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|c| !null.contains(c)).collect();
    let mut candidate = 0;
    for &c in null {
        loop {
            let mut x = nalgebra::DVector::zeros(n);
            x[candidate % n] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj = u.column(f).dot(&x);
                    x.axpy(-proj, &u.column(f), 1.0);
                }
            }
            let norm = x.norm();
            if norm > 0.5 {
                u.set_column(c, &(x / norm));
                filled.push(c);
                break;
            }
        }
    }
}

/// Settings for [`truncated_svd_sparse`].
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSvdOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TruncatedSvdOptions {
    fn default() -> Self {
        TruncatedSvdOptions {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Top-`k` singular triplets of a sparse matrix by randomized block power
/// iteration.
///
/// The block carries `k + max(2k, 2)` columns. Each sweep applies `Aᵀ` then
/// `A` with a QR after each product, followed by a Rayleigh-Ritz step on
/// `QᵀA`. Stops once `‖A V − U S‖_F ≤ tol · S[0]`.
pub fn truncated_svd_sparse<R: Rng + ?Sized>(
    a: &SparseMatrix,
    k: usize,
    opts: TruncatedSvdOptions,
    rng: &mut R,
) -> Result<TruncatedSvd> {
    let n_rows = a.nrows();
    let n_cols = a.ncols();
    if k == 0 || k >= n_rows.min(n_cols) {
        return Err(TamError::InvalidParameter(format!(
            "truncated SVD needs 0 < k < min(rows, cols); got k={k} for {n_rows}x{n_cols}"
        )));
    }
    let block = (k + (2 * k).max(2)).min(n_rows.min(n_cols));
    let omega = DMatrix::from_fn(n_cols, block, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = thin_qr(&a.mul_dense(&omega)).q;

    let mut best: Option<TruncatedSvd> = None;
    for it in 1..=opts.max_iter {
        let p = thin_qr(&a.tr_mul_dense(&q)).q;
        q = thin_qr(&a.mul_dense(&p)).q;

        // Rayleigh-Ritz: Bᵀ = Aᵀ Q is n_cols × block.
        let bt = a.tr_mul_dense(&q);
        let svd = small_svd(&bt);
        // Bᵀ = Ub S Vbᵀ  ⇒  B = Vb S Ubᵀ, so left vectors of A are Q Vb.
        let u = &q * svd.v.columns(0, k);
        let v = svd.u.columns(0, k).into_owned();
        let s: Vec<f64> = svd.s[..k].to_vec();

        let mut resid = a.mul_dense(&v);
        for c in 0..k {
            let uc = u.column(c) * s[c];
            let mut col = resid.column_mut(c);
            col -= uc;
        }
        let residual = resid.norm();
        let converged = residual <= opts.tol * s[0].max(f64::MIN_POSITIVE) || s[0] == 0.0;
        let cur = TruncatedSvd {
            u,
            s,
            v,
            iterations: it,
            residual,
        };
        if converged {
            return Ok(cur);
        }
        best = Some(cur);
    }
    let best = best.expect("max_iter >= 1");
    Err(TamError::Convergence {
        what: "truncated sparse SVD",
        iterations: opts.max_iter,
        residual: best.residual,
        best: best.s,
    })
}

fn orthonormal_basis(x: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let qr = thin_qr(x);
    if qr.rank_deficient {
        return Err(TamError::InvalidSubspace(format!("{name} is rank deficient")));
    }
    Ok(qr.q)
}

/// `dist(X, Y) = ‖X̂⊥ᵀ Ŷ‖₂`, the sine of the largest principal angle.
///
/// Uses `‖X̂⊥ᵀŶ‖₂ = ‖Ŷ − X̂X̂ᵀŶ‖₂`, whose square is `1 − σ_min(X̂ᵀŶ)²`;
/// the residual form keeps full relative accuracy for tiny angles.
pub fn subspace_dist(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(TamError::InvalidSubspace(format!(
            "shape mismatch {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let xh = orthonormal_basis(x, "X")?;
    let yh = orthonormal_basis(y, "Y")?;
    Ok(dist_orthonormal(&xh, &yh))
}

/// [`subspace_dist`] for factors that are already orthonormal.
pub fn dist_orthonormal(xh: &DMatrix<f64>, yh: &DMatrix<f64>) -> f64 {
    let resid = yh - xh * (xh.transpose() * yh);
    let s = small_svd(&resid).s;
    s.first().copied().unwrap_or(0.0).clamp(0.0, 1.0)
}

/// Subspace distance for [`FactorMatrix`] operands, skipping the QR when the
/// factor is flagged orthonormal.
pub fn factor_dist(x: &FactorMatrix, y: &FactorMatrix) -> Result<f64> {
    let xh = if x.is_orthonormal() {
        x.as_matrix().clone()
    } else {
        orthonormal_basis(x, "X")?
    };
    let yh = if y.is_orthonormal() {
        y.as_matrix().clone()
    } else {
        orthonormal_basis(y, "Y")?
    };
    if xh.shape() != yh.shape() {
        return Err(TamError::InvalidSubspace("shape mismatch".into()));
    }
    Ok(dist_orthonormal(&xh, &yh))
}

/// `σ_min(X̂ᵀŶ)`, the cosine of the largest principal angle.
pub fn min_principal_cosine(xh: &DMatrix<f64>, yh: &DMatrix<f64>) -> f64 {
    small_svd(&(xh.transpose() * yh)).s.last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn random(n: usize, k: usize, s: u64) -> DMatrix<f64> {
        let mut rng = seed::rng(s);
        DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
    }

    /// Modified Gram-Schmidt, used as an independent QR reference.
    fn mgs(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, k) = a.shape();
        let mut q = a.clone();
        let mut r = DMatrix::zeros(k, k);
        for j in 0..k {
            for i in 0..j {
                let rij = q.column(i).dot(&q.column(j));
                r[(i, j)] = rij;
                let qi = q.column(i).into_owned();
                let mut qj = q.column_mut(j);
                qj.axpy(-rij, &qi, 1.0);
            }
            let nrm = q.column(j).norm();
            r[(j, j)] = nrm;
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
        let _ = n;
        (q, r)
    }

    #[test]
    fn qr_of_orthonormal_is_identity() {
        let q0 = thin_qr(&random(20, 3, 1)).q;
        let qr = thin_qr(&q0);
        assert!((&qr.q - &q0).amax() < 1e-12);
        assert!((&qr.r - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(!qr.rank_deficient);
    }

    #[test]
    fn qr_column_scaling() {
        let a = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
        let qr = thin_qr(&a);
        assert!((qr.r[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((qr.r[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(qr.r[(0, 1)].abs() < 1e-14);
        for c in 0..2 {
            assert!((qr.q.column(c).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn qr_matches_gram_schmidt() {
        let a = random(50, 3, 2);
        let qr = thin_qr(&a);
        assert!((&a - &qr.q * &qr.r).norm() / a.norm() <= 1e-10);
        let (q_mgs, r_mgs) = mgs(&a);
        assert!((&qr.q - q_mgs).amax() < 1e-10);
        assert!((&qr.r - r_mgs).amax() < 1e-10);
    }

    #[test]
    fn qr_flags_rank_deficiency() {
        let mut a = random(10, 3, 3);
        let c0 = a.column(0).into_owned();
        a.set_column(2, &(c0 * 2.0));
        assert!(thin_qr(&a).rank_deficient);
    }

    #[test]
    fn svd_trivial_cases() {
        let s = small_svd(&DMatrix::identity(4, 4)).s;
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let col = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let svd = small_svd(&col);
        assert_eq!(svd.s.len(), 1);
        assert!((svd.s[0] - 1.0).abs() < 1e-14);
        assert!(svd.u[(0, 0)] > 0.0);
    }

    /// Eigenvalues of a symmetric 3×3 matrix from its characteristic
    /// polynomial (trigonometric form of the cubic roots).
    fn sym3_eigs(g: &DMatrix<f64>) -> [f64; 3] {
        let p1 = g[(0, 1)].powi(2) + g[(0, 2)].powi(2) + g[(1, 2)].powi(2);
        let q = g.trace() / 3.0;
        let p2 = (g[(0, 0)] - q).powi(2) + (g[(1, 1)] - q).powi(2) + (g[(2, 2)] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (g - DMatrix::identity(3, 3) * q) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    }

    #[test]
    fn svd_matches_gram_eigen_oracle() {
        let a = random(8, 3, 4);
        let svd = small_svd(&a);
        let eig = sym3_eigs(&(a.transpose() * &a));
        for i in 0..3 {
            assert!((svd.s[i] - eig[i].sqrt()).abs() < 1e-8, "{} vs {}", svd.s[i], eig[i].sqrt());
        }
        assert!((svd.reconstruct() - &a).norm() <= 1e-8 * a.norm());
        assert!(orthonormality_error(&svd.u) < 1e-10);
        assert!(orthonormality_error(&svd.v) < 1e-10);
    }

    #[test]
    fn truncated_svd_diagonal() {
        let vals = [5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.1];
        let trip: Vec<_> = vals.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let a = SparseMatrix::from_triplets(8, 8, &trip);
        let out = truncated_svd_sparse(&a, 2, TruncatedSvdOptions::default(), &mut seed::rng(5)).unwrap();
        assert!((out.s[0] - 5.0).abs() < 1e-9);
        assert!((out.s[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn truncated_svd_rejects_bad_k() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0)]);
        assert!(truncated_svd_sparse(&a, 3, TruncatedSvdOptions::default(), &mut seed::rng(0)).is_err());
    }

    #[test]
    fn dist_trivial_cases() {
        let x = random(12, 3, 6);
        assert!(subspace_dist(&x, &x).unwrap() < 1e-12);
        let e12 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let e13 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((subspace_dist(&e12, &e13).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dist_rejects_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = random(3, 2, 7);
        assert!(matches!(subspace_dist(&x, &y), Err(TamError::InvalidSubspace(_))));
    }

    #[test]
    fn factor_matrix_checks_orthonormality() {
        assert!(FactorMatrix::orthonormal(random(5, 2, 8)).is_err());
        let q = thin_qr(&random(5, 2, 8)).q;
        assert!(FactorMatrix::orthonormal(q).unwrap().is_orthonormal());
    }
}
