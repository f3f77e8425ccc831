//! Ground-truth rank-k matrices with measured incoherence.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::incoherence_of;
use crate::error::{invalid, Result};
use crate::linalg::{thin_qr, FactorMatrix};

/// `M = U* diag(σ) V*ᵀ`, exposed entrywise.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    u_star: FactorMatrix,
    v_star: FactorMatrix,
    sigma: Vec<f64>,
    mu0_actual: f64,
}

impl GroundTruth {
    /// Validates orthonormal factors and a positive nonincreasing spectrum,
    /// then measures the incoherence of both factors.
    pub fn new(u_star: DMatrix<f64>, v_star: DMatrix<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_sigma(&sigma)?;
        if u_star.shape() != v_star.shape() || u_star.ncols() != sigma.len() {
            return Err(invalid(format!(
                "factor shapes {:?}, {:?} do not match {} singular values",
                u_star.shape(),
                v_star.shape(),
                sigma.len()
            )));
        }
        let u_star = FactorMatrix::orthonormal(u_star)?;
        let v_star = FactorMatrix::orthonormal(v_star)?;
        let mu0_actual = incoherence_of(&u_star)?.max(incoherence_of(&v_star)?);
        Ok(GroundTruth {
            u_star,
            v_star,
            sigma,
            mu0_actual,
        })
    }

    pub fn n(&self) -> usize {
        self.u_star.nrows()
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn u_star(&self) -> &DMatrix<f64> {
        self.u_star.as_matrix()
    }

    pub fn v_star(&self) -> &DMatrix<f64> {
        self.v_star.as_matrix()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `max(μ(U*), μ(V*))`, measured.
    pub fn mu0_actual(&self) -> f64 {
        self.mu0_actual
    }

    pub fn kappa(&self) -> f64 {
        self.sigma[0] / self.sigma[self.sigma.len() - 1]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.sigma
            .iter()
            .enumerate()
            .map(|(l, s)| self.u_star[(i, l)] * s * self.v_star[(j, l)])
            .sum()
    }

    /// `‖M‖_F = ‖σ‖₂` for orthonormal factors.
    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `V* Σ*`, the right factor scaled by the singular values.
    pub fn v_sigma(&self) -> DMatrix<f64> {
        let mut vs = self.v_star.as_matrix().clone();
        for (c, &s) in self.sigma.iter().enumerate() {
            vs.column_mut(c).scale_mut(s);
        }
        vs
    }

    /// Ground truth of `Mᵀ`: the factors swap roles.
    pub fn transposed(&self) -> Self {
        GroundTruth {
            u_star: self.v_star.clone(),
            v_star: self.u_star.clone(),
            sigma: self.sigma.clone(),
            mu0_actual: self.mu0_actual,
        }
    }

    /// Dense `n × n` matrix. Only sensible for small `n`.
    pub fn materialize(&self) -> DMatrix<f64> {
        self.u_star.as_matrix() * self.v_sigma().transpose()
    }
}

fn check_sigma(sigma: &[f64]) -> Result<()> {
    if sigma.is_empty() {
        return Err(invalid("need at least one singular value"));
    }
    if sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(invalid(format!("singular values must be positive and finite: {sigma:?}")));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid(format!("singular values must be nonincreasing: {sigma:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatMode {
    /// `U* = V* = 1/√n`. Rank one only.
    Deterministic,
    /// Orthonormalized random-sign columns; rows are close to flat.
    RandomSigns,
}

fn random_sign_basis<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let x = DMatrix::from_fn(n, k, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
        let qr = thin_qr(&x);
        if !qr.rank_deficient {
            return qr.q;
        }
    }
}

/// Rank-`k` ground truth with near-flat factors.
pub fn gen_flat<R: Rng + ?Sized>(n: usize, k: usize, sigma: &[f64], mode: FlatMode, rng: &mut R) -> Result<GroundTruth> {
    if k == 0 || k >= n {
        return Err(invalid(format!("need 0 < k < n, got k={k}, n={n}")));
    }
    if sigma.len() != k {
        return Err(invalid(format!("expected {k} singular values, got {}", sigma.len())));
    }
    check_sigma(sigma)?;
    let (u, v) = match mode {
        FlatMode::Deterministic => {
            if k != 1 {
                return Err(invalid("deterministic flat mode is rank one only"));
            }
            let f = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
            (f.clone(), f)
        }
        FlatMode::RandomSigns => (random_sign_basis(n, k, rng), random_sign_basis(n, k, rng)),
    };
    GroundTruth::new(u, v, sigma.to_vec())
}

/// Fraction of rows placed in the nearly collinear cluster, chosen so that a
/// random `d`-subset lands entirely inside it with probability about 1%.
pub fn adversarial_cluster_fraction(d: usize) -> f64 {
    0.01f64.powf(1.0 / d as f64)
}

/// Relative spread of cluster rows around their common direction.
pub const ADVERSARIAL_JITTER: f64 = 1e-6;

fn adversarial_factor<R: Rng + ?Sized>(n: usize, k: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let cluster = ((adversarial_cluster_fraction(d) * n as f64).round() as usize).clamp(1, n - k);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut direction: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|x| *x /= norm);

    let mut x = DMatrix::zeros(n, k);
    for (pos, &i) in perm.iter().enumerate() {
        if pos < cluster {
            let scale = 1.0 + 0.5 * rng.sample::<f64, _>(StandardNormal).abs();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            for c in 0..k {
                let jitter: f64 = rng.sample(StandardNormal);
                x[(i, c)] = sign * scale * (direction[c] + ADVERSARIAL_JITTER * jitter);
            }
        } else {
            for c in 0..k {
                x[(i, c)] = rng.sample(StandardNormal);
            }
        }
    }
    // Column mixing by QR keeps the cluster rows collinear.
    thin_qr(&x).q
}

/// Rank-`k` ground truth whose factors put a large fraction of rows on a
/// common line (up to a `1e-6` jitter). A target whose `d` sampled rows all
/// come from that cluster has a nearly singular Gramian.
pub fn gen_adversarial_gramian<R: Rng + ?Sized>(n: usize, k: usize, d: usize, sigma: &[f64], rng: &mut R) -> Result<GroundTruth> {
    if k < 2 {
        return Err(invalid("adversarial Gramian instances need k >= 2"));
    }
    if k >= n || d == 0 || d > n {
        return Err(invalid(format!("need k < n and 1 <= d <= n, got n={n}, k={k}, d={d}")));
    }
    if sigma.len() != k {
        return Err(invalid(format!("expected {k} singular values, got {}", sigma.len())));
    }
    check_sigma(sigma)?;
    let u = adversarial_factor(n, k, d, rng);
    let v = adversarial_factor(n, k, d, rng);
    GroundTruth::new(u, v, sigma.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;
    use crate::seed;

    #[test]
    fn deterministic_flat() {
        let gt = gen_flat(16, 1, &[2.5], FlatMode::Deterministic, &mut seed::rng(0)).unwrap();
        assert!((gt.mu0_actual() - 1.0).abs() < 1e-12);
        assert!((gt.entry(3, 7) - 2.5 / 16.0).abs() < 1e-15);
        assert!(gen_flat(16, 2, &[2.0, 1.0], FlatMode::Deterministic, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn random_flat_is_measured() {
        let gt = gen_flat(1024, 3, &[3.0, 2.0, 1.0], FlatMode::RandomSigns, &mut seed::rng(1)).unwrap();
        let mu = incoherence_of(&FactorMatrix::orthonormal(gt.u_star().clone()).unwrap())
            .unwrap()
            .max(incoherence_of(&FactorMatrix::orthonormal(gt.v_star().clone()).unwrap()).unwrap());
        assert_eq!(gt.mu0_actual(), mu);
        assert!(gt.mu0_actual() >= 1.0);
        assert!(orthonormality_error(gt.u_star()) < 1e-10);
        assert!((gt.kappa() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_and_norm() {
        let gt = gen_flat(50, 2, &[2.0, 1.0], FlatMode::RandomSigns, &mut seed::rng(2)).unwrap();
        assert_eq!(gt.kappa(), 2.0);
        let dense = gt.materialize();
        assert!((dense.norm() - 5f64.sqrt()).abs() < 1e-12);
        for (i, j) in [(0, 0), (3, 17), (49, 2)] {
            assert!((dense[(i, j)] - gt.entry(i, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_validation() {
        let mut rng = seed::rng(3);
        assert!(gen_flat(10, 2, &[1.0, 2.0], FlatMode::RandomSigns, &mut rng).is_err());
        assert!(gen_flat(10, 2, &[1.0, 0.0], FlatMode::RandomSigns, &mut rng).is_err());
        assert!(gen_flat(10, 2, &[1.0], FlatMode::RandomSigns, &mut rng).is_err());
        assert!(gen_flat(10, 10, &[1.0; 10], FlatMode::RandomSigns, &mut rng).is_err());
    }

    #[test]
    fn adversarial_rank_one_rejected() {
        assert!(gen_adversarial_gramian(100, 1, 5, &[1.0], &mut seed::rng(4)).is_err());
    }

    #[test]
    fn adversarial_cluster_blocks_are_near_singular() {
        let (n, k, d) = (400, 2, 6);
        let gt = gen_adversarial_gramian(n, k, d, &[2.0, 1.0], &mut seed::rng(5)).unwrap();
        // Pick d rows from the cluster: they share a direction, so the
        // smallest singular value of the block is tiny relative to the largest.
        let u = gt.u_star();
        let collinear = |a: usize, b: usize| {
            let (ra, rb) = (u.row(a), u.row(b));
            let cos = ra.dot(&rb) / (ra.norm() * rb.norm());
            1.0 - cos.abs() < 1e-8
        };
        let anchor = (0..n)
            .max_by_key(|&a| (0..n).filter(|&b| collinear(a, b)).count())
            .unwrap();
        let cluster: Vec<usize> = (0..n).filter(|&i| collinear(anchor, i)).collect();
        assert!(cluster.len() as f64 >= 0.5 * adversarial_cluster_fraction(d) * n as f64);
        let block = crate::tam::gather_rows(u, &cluster[..d]);
        let s = crate::linalg::small_svd(&block).s;
        assert!(s[1] < 1e-4 * s[0], "{s:?}");
    }
}
