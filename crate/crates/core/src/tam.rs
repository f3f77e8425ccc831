//! Thresholded alternating minimization and the unregularized baseline.
//!
//! One iteration `t` performs two half-steps:
//!
//! * V-update on graph `t+1`: for every right vertex `j`, solve a `k × k`
//!   least-squares system built from the rows `u_i`, `i ∈ S_j^L`; QR the
//!   stacked solutions, truncate long rows, orthonormalize again.
//! * U-update on graph `N+t+1`: the same with the roles of the sides swapped.
//!
//! Before each solve the normalized Gramian `(n/d)·Σ u_i u_iᵀ` is checked
//! against `[β, 2−β]`; blocks that fail are replaced by their T2 clamp.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TamError};
use crate::graph::{observed_matrix, BipartiteRegularGraph, ObservedValues, SampleSchedule};
use crate::linalg::{dist_orthonormal, small_svd, thin_qr, truncated_svd_sparse, FactorMatrix, TruncatedSvdOptions};
use crate::regularizers::{spectrum_compliant, t2_from_svd, truncate_and_orthonormalize, IncoherenceParams};
use crate::seed;
use crate::synth::GroundTruth;

/// Smallest admissible iteration count `N = 1 + ⌈log(2/ε) / log 4⌉`.
pub fn derive_iteration_count(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 2.0 / 3.0) {
        return Err(invalid(format!("epsilon must lie in (0, 2/3), got {epsilon}")));
    }
    Ok(1 + ((2.0 / epsilon).ln() / 4f64.ln()).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamConfig {
    /// Target rank.
    pub k: usize,
    /// Sampling degree of every graph in the schedule.
    pub d: usize,
    /// Number of iterations `N`.
    pub iterations: usize,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub mu0: f64,
    pub svd_tol: f64,
    pub svd_max_iter: usize,
    /// Vanilla AM counts a solve as ill-conditioned when
    /// `σ_min(G) < ill_conditioned_rcond · σ_max(G)`.
    pub ill_conditioned_rcond: f64,
    pub seed: u64,
}

impl TamConfig {
    /// Config with `N` derived from `epsilon` and default `β = 0.5`,
    /// `δ = 0.1`.
    pub fn new(k: usize, d: usize, epsilon: f64, mu0: f64, seed: u64) -> Result<Self> {
        let cfg = TamConfig {
            k,
            d,
            iterations: derive_iteration_count(epsilon)?,
            beta: 0.5,
            delta: 0.1,
            epsilon,
            mu0,
            svd_tol: 1e-12,
            svd_max_iter: 2000,
            ill_conditioned_rcond: 1e-8,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("rank k must be positive"));
        }
        if self.d < self.k {
            return Err(invalid(format!(
                "degree d={} is below the rank k={}; every sampled Gramian would be singular",
                self.d, self.k
            )));
        }
        if self.iterations == 0 {
            return Err(invalid("iteration count N must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0 - self.delta) {
            return Err(invalid(format!(
                "beta must lie in (0, 1 - delta) = (0, {}), got {}",
                1.0 - self.delta,
                self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 2.0 / 3.0) {
            return Err(invalid(format!("epsilon must lie in (0, 2/3), got {}", self.epsilon)));
        }
        if !(self.mu0 >= 1.0) {
            return Err(invalid(format!("mu0 must be >= 1, got {}", self.mu0)));
        }
        Ok(())
    }

    fn check_schedule(&self, schedule: &SampleSchedule) -> Result<()> {
        self.validate()?;
        if schedule.d != self.d || schedule.iterations != self.iterations {
            return Err(invalid(format!(
                "schedule (d={}, N={}) does not match config (d={}, N={})",
                schedule.d, schedule.iterations, self.d, self.iterations
            )));
        }
        if self.k >= schedule.n {
            return Err(invalid(format!("rank k={} must be below n={}", self.k, schedule.n)));
        }
        Ok(())
    }

    pub fn incoherence(&self, n: usize) -> Result<IncoherenceParams> {
        IncoherenceParams::new(self.mu0, self.k, n)
    }
}

/// Which side of the bipartite graph the update solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// One row per right vertex `j`, built from the left factor over
    /// `S_j^L` (the V-update).
    Right,
    /// One row per left vertex `i`, built from the right factor over
    /// `S_i^R` (the U-update).
    Left,
}

impl Side {
    pub fn neighbors<'g>(&self, graph: &'g BipartiteRegularGraph, target: usize) -> &'g [usize] {
        match self {
            Side::Right => graph.left_neighbors_of_right(target),
            Side::Left => graph.right_neighbors_of_left(target),
        }
    }

    pub fn observed<'v>(&self, values: &'v ObservedValues, target: usize) -> &'v [f64] {
        match self {
            Side::Right => values.column(target),
            Side::Left => values.row(target),
        }
    }
}

/// Rows of `w` indexed by `idx`, stacked into a `|idx| × k` block.
pub fn gather_rows(w: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), w.ncols(), |r, c| w[(idx[r], c)])
}

/// A sampled `d × k` block after the spectrum check.
#[derive(Debug, Clone)]
pub struct PreparedBlock {
    /// The block used in the least-squares solve: the raw rows, or their T2
    /// clamp when the check failed.
    pub effective: DMatrix<f64>,
    pub thresholded: bool,
    /// Normalized Gramian eigenvalues `(n/d)·σ²` of the raw block,
    /// descending, padded with zeros up to `k`.
    pub normalized_spectrum: Vec<f64>,
}

/// Runs the spectrum check on a sampled block and applies T2 if it fails.
/// The block SVD is computed once and reused for the clamp.
pub fn prepare_block(block: &DMatrix<f64>, beta: f64, n: usize) -> PreparedBlock {
    let (d, k) = block.shape();
    let svd = small_svd(block);
    let scale = n as f64 / d as f64;
    let mut normalized_spectrum: Vec<f64> = svd.s.iter().map(|s| scale * s * s).collect();
    normalized_spectrum.resize(k, 0.0);
    if spectrum_compliant(&svd.s, k, beta, n, d) {
        PreparedBlock {
            effective: block.clone(),
            thresholded: false,
            normalized_spectrum,
        }
    } else {
        PreparedBlock {
            effective: t2_from_svd(&svd, beta, n, d),
            thresholded: true,
            normalized_spectrum,
        }
    }
}

/// Output of one half-step.
#[derive(Debug, Clone)]
pub struct FactorUpdate {
    /// Stacked least-squares solutions (`Ṽ^{t+1}` or `Ũ^{t+1}`).
    pub tilde: DMatrix<f64>,
    /// Targets where T2 fired, ascending.
    pub bad_set: Vec<usize>,
    pub min_normalized_sigma: f64,
    pub max_normalized_sigma: f64,
    /// Smallest eigenvalue over all `k × k` matrices actually inverted.
    pub min_inverted_sigma: f64,
    pub ill_conditioned: usize,
}

struct TargetSolve {
    row: DVector<f64>,
    thresholded: bool,
    min_norm: f64,
    max_norm: f64,
    min_inverted: f64,
    ill_conditioned: bool,
}

fn reduce_targets(n: usize, k: usize, solves: Vec<TargetSolve>) -> FactorUpdate {
    let mut tilde = DMatrix::zeros(n, k);
    let mut bad_set = Vec::new();
    let mut min_normalized_sigma = f64::INFINITY;
    let mut max_normalized_sigma = f64::NEG_INFINITY;
    let mut min_inverted_sigma = f64::INFINITY;
    let mut ill_conditioned = 0;
    for (t, s) in solves.into_iter().enumerate() {
        tilde.set_row(t, &s.row.transpose());
        if s.thresholded {
            bad_set.push(t);
        }
        min_normalized_sigma = min_normalized_sigma.min(s.min_norm);
        max_normalized_sigma = max_normalized_sigma.max(s.max_norm);
        min_inverted_sigma = min_inverted_sigma.min(s.min_inverted);
        ill_conditioned += usize::from(s.ill_conditioned);
    }
    FactorUpdate {
        tilde,
        bad_set,
        min_normalized_sigma,
        max_normalized_sigma,
        min_inverted_sigma,
        ill_conditioned,
    }
}

fn sym_min_eig(g: &DMatrix<f64>) -> (f64, f64) {
    let s = small_svd(g).s;
    (s.last().copied().unwrap_or(0.0), s.first().copied().unwrap_or(0.0))
}

/// One thresholded half-step.
///
/// `w` is the current orthonormal factor on the opposite side of `side`.
/// For each target the normalized Gramian is checked against `[β, 2−β]`;
/// compliant targets solve with the raw rows, the rest with the T2-clamped
/// block. Every inverted matrix has `σ_min ≥ β·d/n`.
pub fn update_factor(
    w: &DMatrix<f64>,
    graph: &BipartiteRegularGraph,
    values: &ObservedValues,
    beta: f64,
    side: Side,
) -> Result<FactorUpdate> {
    let n = graph.n();
    let d = graph.d();
    let k = w.ncols();
    if w.nrows() != n {
        return Err(invalid(format!("factor has {} rows, graph has n={n}", w.nrows())));
    }
    let floor = beta * d as f64 / n as f64;
    let solves: Vec<TargetSolve> = (0..n)
        .into_par_iter()
        .map(|target| {
            let idx = side.neighbors(graph, target);
            let m = DVector::from_column_slice(side.observed(values, target));
            let prepared = prepare_block(&gather_rows(w, idx), beta, n);
            let a = &prepared.effective;
            let gram = a.transpose() * a;
            let rhs = a.transpose() * m;
            let (min_inv, _) = sym_min_eig(&gram);
            if min_inv < floor - 1e-12 {
                return Err(TamError::Invariant(format!(
                    "Gramian for target {target} has sigma_min {min_inv:.3e} below beta*d/n = {floor:.3e}"
                )));
            }
            let row = Cholesky::new(gram)
                .ok_or_else(|| TamError::Invariant(format!("Gramian for target {target} is not positive definite")))?
                .solve(&rhs);
            Ok(TargetSolve {
                row,
                thresholded: prepared.thresholded,
                min_norm: prepared.normalized_spectrum.last().copied().unwrap_or(0.0),
                max_norm: prepared.normalized_spectrum.first().copied().unwrap_or(0.0),
                min_inverted: min_inv,
                ill_conditioned: false,
            })
        })
        .collect::<Result<_>>()?;
    Ok(reduce_targets(n, k, solves))
}

/// Unthresholded half-step; singular systems are solved by least-norm
/// pseudo-inverse.
pub fn update_factor_vanilla(
    w: &DMatrix<f64>,
    graph: &BipartiteRegularGraph,
    values: &ObservedValues,
    side: Side,
    rcond: f64,
) -> Result<FactorUpdate> {
    let n = graph.n();
    let d = graph.d();
    let k = w.ncols();
    if w.nrows() != n {
        return Err(invalid(format!("factor has {} rows, graph has n={n}", w.nrows())));
    }
    let scale = n as f64 / d as f64;
    let solves: Vec<TargetSolve> = (0..n)
        .into_par_iter()
        .map(|target| {
            let idx = side.neighbors(graph, target);
            let m = DVector::from_column_slice(side.observed(values, target));
            let a = gather_rows(w, idx);
            let gram = a.transpose() * &a;
            let rhs = a.transpose() * m;
            let svd = small_svd(&gram);
            let smax = svd.s.first().copied().unwrap_or(0.0);
            let smin = svd.s.last().copied().unwrap_or(0.0);
            let cutoff = 1e-14 * smax.max(f64::MIN_POSITIVE);
            // G = U S Vᵀ ⇒ G⁺ b = V S⁺ Uᵀ b.
            let mut coeff = svd.u.transpose() * rhs;
            for (c, &s) in svd.s.iter().enumerate() {
                coeff[c] = if s > cutoff { coeff[c] / s } else { 0.0 };
            }
            TargetSolve {
                row: &svd.v * coeff,
                thresholded: false,
                min_norm: scale * smin,
                max_norm: scale * smax,
                min_inverted: smin,
                ill_conditioned: smin < rcond * smax || smax == 0.0,
            }
        })
        .collect();
    Ok(reduce_targets(n, k, solves))
}

/// Per-iteration record. Distances are filled only when ground truth is
/// supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub bad_count_v: usize,
    pub bad_count_u: usize,
    /// `dist(U^t, U*)`.
    pub dist_u_in: Option<f64>,
    /// `dist(V^{t+1}, V*)`.
    pub dist_v: Option<f64>,
    /// `dist(U^{t+1}, U*)`.
    pub dist_u: Option<f64>,
    pub min_normalized_sigma: f64,
    pub max_normalized_sigma: f64,
    pub min_inverted_sigma: f64,
    pub ill_conditioned: usize,
    /// Largest row norm of `V^{t+1}` and `U^{t+1}`.
    pub max_row_norm_v: f64,
    pub max_row_norm_u: f64,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `dist(U^0, U*)` when ground truth is supplied.
    pub dist_u0: Option<f64>,
    pub init_time_s: f64,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn total_bad(&self) -> usize {
        self.records.iter().map(|r| r.bad_count_u + r.bad_count_v).sum()
    }

    pub fn total_ill_conditioned(&self) -> usize {
        self.records.iter().map(|r| r.ill_conditioned).sum()
    }

    /// Half-step contraction ratios `dist_out / max{dist_in, ε/2}` in order
    /// `V^1 / U^0, U^1 / V^1, V^2 / U^1, …`.
    pub fn contraction_ratios(&self, epsilon: f64) -> Vec<f64> {
        let floor = epsilon / 2.0;
        let mut out = Vec::new();
        for r in &self.records {
            if let (Some(u_in), Some(v), Some(u)) = (r.dist_u_in, r.dist_v, r.dist_u) {
                out.push(v / u_in.max(floor));
                out.push(u / v.max(floor));
            }
        }
        out
    }

    pub fn wall_time_s(&self) -> f64 {
        self.init_time_s + self.records.iter().map(|r| r.wall_time_s).sum::<f64>()
    }
}

/// Algorithm output: `M_N = U^{N−1} Ṽ^{N,T}`.
#[derive(Debug, Clone)]
pub struct TamResult {
    pub u_final: FactorMatrix,
    pub v_tilde_final: DMatrix<f64>,
    pub trace: IterationTrace,
}

impl TamResult {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.u_final.row(i).dot(&self.v_tilde_final.row(j))
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        self.u_final.as_matrix() * self.v_tilde_final.transpose()
    }
}

/// What an observer sees after each half-step.
#[derive(Debug)]
pub struct HalfStep<'a> {
    pub t: usize,
    pub side: Side,
    /// Orthonormal factor the update was computed from.
    pub input: &'a DMatrix<f64>,
    pub graph: &'a BipartiteRegularGraph,
    pub values: &'a ObservedValues,
    pub update: &'a FactorUpdate,
    /// Orthonormal factor produced by QR, T1 and re-orthonormalization.
    pub output: &'a DMatrix<f64>,
}

/// Initial factor: top-`k` left singular vectors of `(n/d)·P_{Ω0}(M)`,
/// truncated and re-orthonormalized.
pub fn initialize(schedule: &SampleSchedule, config: &TamConfig) -> Result<DMatrix<f64>> {
    config.check_schedule(schedule)?;
    let n = schedule.n;
    let (graph, values) = schedule.init_graph();
    let a = observed_matrix(graph, values).scaled(n as f64 / schedule.d as f64);
    let mut rng = seed::child_rng(config.seed, seed::SVD_INIT, 0);
    let opts = TruncatedSvdOptions {
        tol: config.svd_tol,
        max_iter: config.svd_max_iter,
    };
    let top = truncated_svd_sparse(&a, config.k, opts, &mut rng)?;
    truncate_and_orthonormalize(&top.u, &config.incoherence(n)?)
}

fn max_row_norm(w: &DMatrix<f64>) -> f64 {
    (0..w.nrows()).map(|i| w.row(i).norm()).fold(0.0, f64::max)
}

#[derive(Clone, Copy)]
enum Variant {
    Thresholded,
    Vanilla,
}

fn run(
    schedule: &SampleSchedule,
    config: &TamConfig,
    truth: Option<&GroundTruth>,
    variant: Variant,
    observer: &mut dyn FnMut(&HalfStep<'_>) -> Result<()>,
) -> Result<TamResult> {
    config.check_schedule(schedule)?;
    let n = schedule.n;
    if let Some(gt) = truth {
        if gt.n() != n || gt.k() != config.k {
            return Err(invalid(format!(
                "ground truth is {}x{} but the run expects n={n}, k={}",
                gt.n(),
                gt.k(),
                config.k
            )));
        }
    }
    let params = config.incoherence(n)?;
    let dist_to = |w: &DMatrix<f64>, star: &DMatrix<f64>| dist_orthonormal(star, w);

    let start = Instant::now();
    let mut u = match variant {
        Variant::Thresholded => initialize(schedule, config)?,
        Variant::Vanilla => {
            let (graph, values) = schedule.init_graph();
            let a = observed_matrix(graph, values).scaled(n as f64 / schedule.d as f64);
            let mut rng = seed::child_rng(config.seed, seed::SVD_INIT, 0);
            let opts = TruncatedSvdOptions {
                tol: config.svd_tol,
                max_iter: config.svd_max_iter,
            };
            thin_qr(&truncated_svd_sparse(&a, config.k, opts, &mut rng)?.u).q
        }
    };
    let mut trace = IterationTrace {
        dist_u0: truth.map(|gt| dist_to(&u, gt.u_star())),
        init_time_s: start.elapsed().as_secs_f64(),
        records: Vec::with_capacity(config.iterations),
    };

    let half_step = |w: &DMatrix<f64>, graph: &BipartiteRegularGraph, values: &ObservedValues, side: Side| {
        let upd = match variant {
            Variant::Thresholded => update_factor(w, graph, values, config.beta, side)?,
            Variant::Vanilla => update_factor_vanilla(w, graph, values, side, config.ill_conditioned_rcond)?,
        };
        let qr = thin_qr(&upd.tilde);
        let next = match variant {
            Variant::Thresholded => truncate_and_orthonormalize(&qr.q, &params)?,
            Variant::Vanilla => qr.q,
        };
        Ok::<_, TamError>((upd, next))
    };

    let mut u_prev = u.clone();
    let mut v_tilde = DMatrix::zeros(n, config.k);
    for t in 0..config.iterations {
        let iter_start = Instant::now();
        let (graph, values) = schedule.v_graph(t);
        let (vu, v) = half_step(&u, graph, values, Side::Right)?;
        observer(&HalfStep {
            t,
            side: Side::Right,
            input: &u,
            graph,
            values,
            update: &vu,
            output: &v,
        })?;

        let (graph, values) = schedule.u_graph(t);
        let (uu, u_next) = half_step(&v, graph, values, Side::Left)?;
        observer(&HalfStep {
            t,
            side: Side::Left,
            input: &v,
            graph,
            values,
            update: &uu,
            output: &u_next,
        })?;

        trace.records.push(IterationRecord {
            t,
            bad_count_v: vu.bad_set.len(),
            bad_count_u: uu.bad_set.len(),
            dist_u_in: truth.map(|gt| dist_to(&u, gt.u_star())),
            dist_v: truth.map(|gt| dist_to(&v, gt.v_star())),
            dist_u: truth.map(|gt| dist_to(&u_next, gt.u_star())),
            min_normalized_sigma: vu.min_normalized_sigma.min(uu.min_normalized_sigma),
            max_normalized_sigma: vu.max_normalized_sigma.max(uu.max_normalized_sigma),
            min_inverted_sigma: vu.min_inverted_sigma.min(uu.min_inverted_sigma),
            ill_conditioned: vu.ill_conditioned + uu.ill_conditioned,
            max_row_norm_v: max_row_norm(&v),
            max_row_norm_u: max_row_norm(&u_next),
            wall_time_s: iter_start.elapsed().as_secs_f64(),
        });

        v_tilde = vu.tilde;
        u_prev = std::mem::replace(&mut u, u_next);
    }

    Ok(TamResult {
        u_final: FactorMatrix::orthonormal(u_prev)?,
        v_tilde_final: v_tilde,
        trace,
    })
}

/// Runs the thresholded algorithm. Distances to the ground truth are traced
/// when `truth` is given.
pub fn run_tam(schedule: &SampleSchedule, config: &TamConfig, truth: Option<&GroundTruth>) -> Result<TamResult> {
    run(schedule, config, truth, Variant::Thresholded, &mut |_| Ok(()))
}

/// [`run_tam`] with a callback after every half-step.
pub fn run_tam_observed(
    schedule: &SampleSchedule,
    config: &TamConfig,
    truth: Option<&GroundTruth>,
    observer: &mut dyn FnMut(&HalfStep<'_>) -> Result<()>,
) -> Result<TamResult> {
    run(schedule, config, truth, Variant::Thresholded, observer)
}

/// Alternating minimization without spectrum checks, T2 or T1.
pub fn run_vanilla_am(
    schedule: &SampleSchedule,
    config: &TamConfig,
    truth: Option<&GroundTruth>,
) -> Result<TamResult> {
    run(schedule, config, truth, Variant::Vanilla, &mut |_| Ok(()))
}
