//! Analysis-side quantities: incoherence, the restricted isometry Monte
//! Carlo test, bad sets, row-deviation sets, the error matrix `F^t`, and the
//! bad-set bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TamError};
use crate::graph::BipartiteRegularGraph;
use crate::linalg::{dist_orthonormal, orthonormality_error, small_svd};
use crate::synth::GroundTruth;
use crate::tam::{gather_rows, prepare_block};

/// Orthonormality tolerance for diagnostic inputs.
const INPUT_TOL: f64 = 1e-8;

fn require_orthonormal(w: &DMatrix<f64>, name: &str) -> Result<()> {
    let err = orthonormality_error(w);
    if err > INPUT_TOL {
        return Err(invalid(format!("{name} is not orthonormal (max |WᵀW - I| = {err:.3e})")));
    }
    Ok(())
}

/// `μ̂ = (n/k)·max_i ‖w_i‖²`, floored at 1 (its exact lower bound for an
/// orthonormal factor) to absorb rounding.
pub fn incoherence_of(w: &DMatrix<f64>) -> Result<f64> {
    require_orthonormal(w, "factor")?;
    let (n, k) = w.shape();
    let max_sq = (0..n).map(|i| w.row(i).norm_squared()).fold(0.0, f64::max);
    Ok((n as f64 / k as f64 * max_sq).max(1.0))
}

/// `‖(n/d)·W_Sᵀ W_S − I‖₂` for the rows `idx` of `w`.
pub fn gramian_deviation(w: &DMatrix<f64>, idx: &[usize]) -> f64 {
    let n = w.nrows();
    let block = gather_rows(w, idx);
    let k = w.ncols();
    let g = block.transpose() * &block * (n as f64 / idx.len() as f64) - DMatrix::identity(k, k);
    SymmetricEigen::new(g).eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Fraction of `trials` uniform `d`-subsets `S` with
/// `‖(n/d)·Σ_{i∈S} w_i w_iᵀ − I‖₂ > δ`.
pub fn subset_deviation_test<R: Rng + ?Sized>(w: &DMatrix<f64>, d: usize, delta: f64, trials: usize, rng: &mut R) -> Result<f64> {
    let n = w.nrows();
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if d == 0 || d > n {
        return Err(invalid(format!("subset size must satisfy 1 <= d <= n, got d={d}, n={n}")));
    }
    require_orthonormal(w, "factor")?;
    let failures = (0..trials)
        .filter(|_| {
            let idx = sample(rng, n, d).into_vec();
            gramian_deviation(w, &idx) > delta
        })
        .count();
    Ok(failures as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetReport {
    pub t: usize,
    pub indices: Vec<usize>,
    pub fraction: f64,
    /// `(1+ζ)·f(d, 5μ0, 1−β)`, filled by [`bad_set_bounds_check`].
    pub bound_a: Option<f64>,
}

/// Right vertices whose normalized Gramian deviates from the identity by
/// more than `1 − β` in spectral norm. Equivalent to some normalized
/// Gramian eigenvalue leaving `[β, 2−β]`.
pub fn bad_set(w: &DMatrix<f64>, graph: &BipartiteRegularGraph, beta: f64, t: usize) -> Result<BadSetReport> {
    let n = graph.n();
    if w.nrows() != n {
        return Err(invalid(format!("factor has {} rows, graph has n={n}", w.nrows())));
    }
    let indices: Vec<usize> = (0..n)
        .filter(|&j| gramian_deviation(w, graph.left_neighbors_of_right(j)) > 1.0 - beta)
        .collect();
    Ok(BadSetReport {
        t,
        fraction: indices.len() as f64 / n as f64,
        indices,
        bound_a: None,
    })
}

/// `‖u uᵀ − w wᵀ‖₂` in closed form: the difference has rank at most two and
/// its nonzero eigenvalues are `(a−b)/2 ± √(((a+b)/2)² − c²)` with
/// `a = ‖u‖², b = ‖w‖², c = u·w`.
pub fn rank_two_gap(u: &[f64], w: &[f64]) -> f64 {
    let a: f64 = u.iter().map(|x| x * x).sum();
    let b: f64 = w.iter().map(|x| x * x).sum();
    let c: f64 = u.iter().zip(w).map(|(x, y)| x * y).sum();
    let half_sum = 0.5 * (a + b);
    0.5 * (a - b).abs() + (half_sum * half_sum - c * c).max(0.0).sqrt()
}

/// `Q^t(τ) = { i : ‖u_i^t u_i^{tT} − u_i^* u_i^{*T}‖₂ > τ/n }`.
///
/// Evaluated on `ut` as given; see [`align_to`] for the rotation under
/// which the row-deviation bound is stated.
pub fn q_set(ut: &DMatrix<f64>, ustar: &DMatrix<f64>, tau: f64) -> Result<Vec<usize>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    if ut.shape() != ustar.shape() {
        return Err(invalid("factor shapes differ"));
    }
    let n = ut.nrows();
    let thr = tau / n as f64;
    let row = |m: &DMatrix<f64>, i: usize| m.row(i).iter().copied().collect::<Vec<_>>();
    Ok((0..n).filter(|&i| rank_two_gap(&row(ut, i), &row(ustar, i)) > thr).collect())
}

/// `U^t R` with `R` orthogonal such that `U*ᵀ U^t R` is symmetric
/// (`R = W2 W1ᵀ` from the SVD `U*ᵀU^t = W1 Σ W2ᵀ`).
pub fn align_to(ut: &DMatrix<f64>, ustar: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = small_svd(&(ustar.transpose() * ut));
    ut * (&svd.v * svd.u.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDeviationCheck {
    pub tau: f64,
    pub gamma: f64,
    pub q_size: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `(τ²/(6μ0k) − 3γ²μ0k)·|Q^t(τ)| ≤ 2kγ²n` after aligning `ut` to `ustar`.
/// `slack` is added to the right-hand side.
pub fn row_deviation_check(ut: &DMatrix<f64>, ustar: &DMatrix<f64>, mu0: f64, tau: f64, slack: f64) -> Result<RowDeviationCheck> {
    require_orthonormal(ut, "U^t")?;
    require_orthonormal(ustar, "U*")?;
    let (n, k) = ut.shape();
    let kf = k as f64;
    let aligned = align_to(ut, ustar);
    let gamma = dist_orthonormal(ustar, ut);
    let q_size = q_set(&aligned, ustar, tau)?.len();
    let lhs = (tau * tau / (6.0 * mu0 * kf) - 3.0 * gamma * gamma * mu0 * kf) * q_size as f64;
    let rhs = 2.0 * kf * gamma * gamma * n as f64;
    Ok(RowDeviationCheck {
        tau,
        gamma,
        q_size,
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

/// `f(d, μ, a) = 3k√(πd)·exp(−(a²/2)/(μk + μka/3)·d)`.
pub fn f_bound(d: usize, mu: f64, a: f64, k: usize) -> f64 {
    let d = d as f64;
    let k = k as f64;
    let rate = (a * a / 2.0) / (mu * k + mu * k * a / 3.0);
    3.0 * k * (std::f64::consts::PI * d).sqrt() * (-rate * d).exp()
}

/// `α = (1−β−δ)/(12μ0k)` and `ρ_t = 2k / ((1−β−δ)²/(24μ0k) − 3γ_t²μ0k)`.
pub fn alpha_rho(beta: f64, delta: f64, mu0: f64, k: usize, gamma_t: f64) -> Result<(f64, f64)> {
    let gap = 1.0 - beta - delta;
    if !(gap > 0.0) {
        return Err(invalid(format!("need beta + delta < 1, got {beta} + {delta}")));
    }
    let k = k as f64;
    let alpha = gap / (12.0 * mu0 * k);
    let denom = gap * gap / (24.0 * mu0 * k) - 3.0 * gamma_t * gamma_t * mu0 * k;
    if !(denom > 0.0) {
        return Err(TamError::OutOfRange(format!(
            "gamma_t = {gamma_t} makes the rho_t denominator nonpositive ({denom:.3e})"
        )));
    }
    Ok((alpha, 2.0 * k / denom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTermReport {
    pub f_fro_over_sigmak: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub gamma: f64,
    pub bad_count: usize,
}

/// The error matrix `F^t` of the compact V-update
/// `Ṽ^{t+1} = V*Σ*U*ᵀU^t − F^t`, with row `j` equal to
/// `v_j*ᵀ Σ* (Dᵀ B̂^j − Ĉ^{jT}) (B̂^j)⁻¹`, `D = U^{tT} U*`.
///
/// `B̂^j` and `Ĉ^j` use the same spectrum check and T2 clamp as the
/// algorithm. Returns `F^t` and the bad set.
pub fn error_matrix(ut: &DMatrix<f64>, truth: &GroundTruth, graph: &BipartiteRegularGraph, beta: f64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let n = graph.n();
    let d = graph.d();
    let k = ut.ncols();
    if ut.nrows() != n || truth.n() != n || truth.k() != k {
        return Err(invalid("shapes of U^t, ground truth and graph disagree"));
    }
    let scale = n as f64 / d as f64;
    let d_mat = ut.transpose() * truth.u_star();
    let vs = truth.v_sigma();
    let mut f = DMatrix::zeros(n, k);
    let mut bad = Vec::new();
    for j in 0..n {
        let idx = graph.left_neighbors_of_right(j);
        let prepared = prepare_block(&gather_rows(ut, idx), beta, n);
        if prepared.thresholded {
            bad.push(j);
        }
        let a = &prepared.effective;
        let b_hat = a.transpose() * a * scale;
        let c_hat = a.transpose() * gather_rows(truth.u_star(), idx) * scale;
        let inner = d_mat.transpose() * &b_hat - c_hat.transpose();
        let b_inv = b_hat
            .try_inverse()
            .ok_or_else(|| TamError::Invariant(format!("B̂ for target {j} is singular")))?;
        let row = vs.row(j) * inner * b_inv;
        f.set_row(j, &row);
    }
    Ok((f, bad))
}

/// `‖F^t/σ_k*‖_F` against `max{dist(U^t, U*), ε/2} / (5√(10k))`.
pub fn error_term(ut: &DMatrix<f64>, truth: &GroundTruth, graph: &BipartiteRegularGraph, beta: f64, epsilon: f64) -> Result<ErrorTermReport> {
    require_orthonormal(ut, "U^t")?;
    let (f, bad) = error_matrix(ut, truth, graph, beta)?;
    let k = truth.k() as f64;
    let sigma_k = truth.sigma()[truth.k() - 1];
    let gamma = dist_orthonormal(truth.u_star(), ut);
    let f_fro_over_sigmak = f.norm() / sigma_k;
    let bound = gamma.max(epsilon / 2.0) / (5.0 * (10.0 * k).sqrt());
    Ok(ErrorTermReport {
        f_fro_over_sigmak,
        bound,
        satisfied: f_fro_over_sigmak <= bound,
        gamma,
        bad_count: bad.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadSetBounds {
    pub gamma: f64,
    pub fraction: f64,
    /// `(1+ζ)·f(d, 5μ0, 1−β)`.
    pub bound_a: f64,
    pub holds_a: bool,
    /// `1.1e·(e²ρ_tγ_t²/α)^{αd} + (1+ζ)·f(d, μ0, δ)`; `None` when `ρ_t` is
    /// undefined for this `γ_t`.
    pub bound_b: Option<f64>,
    pub holds_b: Option<bool>,
    /// `1.1e·(e²ρ_tγ_t²/α)^{αd} + ζ`.
    pub bound_c: Option<f64>,
    pub holds_c: Option<bool>,
}

/// Evaluates the three bad-set size bounds at the current iterate.
///
/// The second and third bounds need `ρ_t > 0`; they are reported as not
/// applicable otherwise.
#[allow(clippy::too_many_arguments)]
pub fn bad_set_bounds_check(
    ut: &DMatrix<f64>,
    ustar: &DMatrix<f64>,
    graph: &BipartiteRegularGraph,
    beta: f64,
    delta: f64,
    mu0: f64,
    zeta: f64,
) -> Result<BadSetBounds> {
    require_orthonormal(ut, "U^t")?;
    require_orthonormal(ustar, "U*")?;
    let k = ut.ncols();
    let d = graph.d();
    let fraction = bad_set(ut, graph, beta, 0)?.fraction;
    let gamma = dist_orthonormal(ustar, ut);
    let bound_a = (1.0 + zeta) * f_bound(d, 5.0 * mu0, 1.0 - beta, k);
    let tail = match alpha_rho(beta, delta, mu0, k, gamma) {
        Ok((alpha, rho)) => {
            let e = std::f64::consts::E;
            Some(1.1 * e * (e * e * rho * gamma * gamma / alpha).powf(alpha * d as f64))
        }
        Err(TamError::OutOfRange(_)) => None,
        Err(other) => return Err(other),
    };
    let bound_b = tail.map(|x| x + (1.0 + zeta) * f_bound(d, mu0, delta, k));
    let bound_c = tail.map(|x| x + zeta);
    Ok(BadSetBounds {
        gamma,
        fraction,
        bound_a,
        holds_a: fraction <= bound_a,
        bound_b,
        holds_b: bound_b.map(|b| fraction <= b),
        bound_c,
        holds_c: bound_c.map(|b| fraction <= b),
    })
}

impl BadSetReport {
    pub fn with_bound(mut self, d: usize, mu0: f64, beta: f64, k: usize, zeta: f64) -> Self {
        self.bound_a = Some((1.0 + zeta) * f_bound(d, 5.0 * mu0, 1.0 - beta, k));
        self
    }
}
