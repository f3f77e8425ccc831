//! Experiment orchestration: instance construction, relative error, runtime
//! scaling, parameter sweeps and degree selection.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TamError};
use crate::graph::{sample_rrg_schedule, SampleSchedule};
use crate::io;
use crate::linalg::thin_qr;
use crate::seed;
use crate::synth::{gen_adversarial_gramian, gen_flat, FlatMode, GroundTruth};
use crate::tam::{derive_iteration_count, run_tam, run_vanilla_am, TamConfig, TamResult};

/// `‖M − U Ṽᵀ‖_F / ‖M‖_F` without forming an `n × n` matrix.
///
/// With `A = [U*, U]` and `B = [V*Σ*, −Ṽ]` the residual is `A Bᵀ`; a thin QR
/// `A = Q R` gives `‖A Bᵀ‖_F = ‖B Rᵀ‖_F`, an `n × 2k` product.
pub fn relative_error(truth: &GroundTruth, result: &TamResult) -> Result<f64> {
    factored_relative_error(truth, result.u_final.as_matrix(), &result.v_tilde_final)
}

/// [`relative_error`] for an arbitrary factor pair `(U, Ṽ)`.
pub fn factored_relative_error(truth: &GroundTruth, u: &DMatrix<f64>, v_tilde: &DMatrix<f64>) -> Result<f64> {
    let n = truth.n();
    if u.nrows() != n || v_tilde.nrows() != n || u.ncols() != v_tilde.ncols() {
        return Err(invalid(format!(
            "result factors {:?} and {:?} do not match ground truth with n={n}",
            u.shape(),
            v_tilde.shape()
        )));
    }
    let (k, r) = (truth.k(), u.ncols());
    let mut a = DMatrix::zeros(n, k + r);
    a.columns_mut(0, k).copy_from(truth.u_star());
    a.columns_mut(k, r).copy_from(u);
    let mut b = DMatrix::zeros(n, k + r);
    b.columns_mut(0, k).copy_from(&truth.v_sigma());
    b.columns_mut(k, r).copy_from(&(-v_tilde));
    let qr = thin_qr(&a);
    Ok((b * qr.r.transpose()).norm() / truth.frobenius_norm())
}

/// Dense reference for [`relative_error`]; materializes both matrices.
pub fn relative_error_dense(truth: &GroundTruth, result: &TamResult) -> Result<f64> {
    if result.u_final.nrows() != truth.n() {
        return Err(invalid("result and ground truth sizes differ"));
    }
    let m = truth.materialize();
    Ok((&m - result.materialize()).norm() / m.norm())
}

/// Singular values spaced geometrically from `kappa` down to 1.
pub fn geometric_sigma(k: usize, kappa: f64) -> Vec<f64> {
    if k == 1 {
        return vec![kappa];
    }
    (0..k).map(|l| kappa.powf((k - 1 - l) as f64 / (k - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSpec {
    Flat {
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default = "default_flat_mode")]
        mode: FlatMode,
    },
    Adversarial {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Ground truth read from a directory written by [`io::write_truth`].
    External { truth_dir: PathBuf },
}

fn default_kappa() -> f64 {
    2.0
}

fn default_flat_mode() -> FlatMode {
    FlatMode::RandomSigns
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec::Flat {
            kappa: default_kappa(),
            mode: default_flat_mode(),
        }
    }
}

impl InstanceSpec {
    /// Builds the ground truth for one cell. `seed` is the cell's root seed.
    pub fn build(&self, n: usize, k: usize, d: usize, seed: u64) -> Result<GroundTruth> {
        let mut rng = seed::child_rng(seed, seed::INSTANCE, 0);
        match self {
            InstanceSpec::Flat { kappa, mode } => gen_flat(n, k, &geometric_sigma(k, *kappa), *mode, &mut rng),
            InstanceSpec::Adversarial { kappa } => gen_adversarial_gramian(n, k, d, &geometric_sigma(k, *kappa), &mut rng),
            InstanceSpec::External { truth_dir } => {
                let (truth, _) = io::read_truth(truth_dir)?;
                if truth.n() != n || truth.k() != k {
                    return Err(invalid(format!(
                        "external truth is n={}, k={} but the cell asks for n={n}, k={k}",
                        truth.n(),
                        truth.k()
                    )));
                }
                Ok(truth)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Tam,
    VanillaAm,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Tam => "tam",
            Algorithm::VanillaAm => "vanilla_am",
        }
    }

    pub fn run(&self, schedule: &SampleSchedule, config: &TamConfig, truth: Option<&GroundTruth>) -> Result<TamResult> {
        match self {
            Algorithm::Tam => run_tam(schedule, config, truth),
            Algorithm::VanillaAm => run_vanilla_am(schedule, config, truth),
        }
    }
}

/// One fully specified experiment: instance, schedule and algorithm config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub beta: f64,
    pub delta: f64,
    pub iterations: Option<usize>,
}

/// Everything one cell needs to run, built deterministically from its spec.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub truth: GroundTruth,
    pub schedule: SampleSchedule,
    pub config: TamConfig,
}

impl CellSpec {
    /// Ground truth from `derive(seed, "instance")`, schedule from
    /// `derive(seed, "schedule")`, and `μ0` set to the measured incoherence.
    pub fn prepare(&self, instance: &InstanceSpec) -> Result<PreparedCell> {
        let truth = instance.build(self.n, self.k, self.d, self.seed)?;
        let mut config = TamConfig::new(self.k, self.d, self.epsilon, truth.mu0_actual(), self.seed)?;
        config.beta = self.beta;
        config.delta = self.delta;
        if let Some(iters) = self.iterations {
            config = config.with_iterations(iters);
        }
        config.validate()?;
        let schedule = sample_rrg_schedule(
            self.n,
            self.d,
            config.iterations,
            |i, j| truth.entry(i, j),
            seed::derive(self.seed, seed::SCHEDULE, 0),
        )?;
        Ok(PreparedCell { truth, schedule, config })
    }
}

/// Metrics for one (cell, algorithm) pair. Wall time lives outside so that
/// the results index is byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub status: String,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub mu0_actual: Option<f64>,
    pub relative_error: Option<f64>,
    pub final_dist_u: Option<f64>,
    pub median_contraction: Option<f64>,
    pub mean_bad_fraction: Option<f64>,
    pub total_bad: Option<usize>,
    pub ill_conditioned: Option<usize>,
}

impl CellResult {
    fn failed(spec: &CellSpec, algorithm: Algorithm, err: &TamError) -> Self {
        CellResult {
            n: spec.n,
            k: spec.k,
            d: spec.d,
            epsilon: spec.epsilon,
            seed: spec.seed,
            algorithm,
            status: "failed".into(),
            error: Some(err.to_string()),
            iterations: None,
            mu0_actual: None,
            relative_error: None,
            final_dist_u: None,
            median_contraction: None,
            mean_bad_fraction: None,
            total_bad: None,
            ill_conditioned: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Summary metrics of a finished run against its ground truth.
pub fn summarize(spec: &CellSpec, algorithm: Algorithm, prepared: &PreparedCell, result: &TamResult) -> Result<CellResult> {
    let trace = &result.trace;
    let half_steps = 2 * trace.records.len();
    Ok(CellResult {
        n: spec.n,
        k: spec.k,
        d: spec.d,
        epsilon: spec.epsilon,
        seed: spec.seed,
        algorithm,
        status: "ok".into(),
        error: None,
        iterations: Some(prepared.config.iterations),
        mu0_actual: Some(prepared.truth.mu0_actual()),
        relative_error: Some(relative_error(&prepared.truth, result)?),
        final_dist_u: trace.records.last().and_then(|r| r.dist_u_in),
        median_contraction: median(&trace.contraction_ratios(spec.epsilon)),
        mean_bad_fraction: Some(trace.total_bad() as f64 / (half_steps * spec.n) as f64),
        total_bad: Some(trace.total_bad()),
        ill_conditioned: Some(trace.total_ill_conditioned()),
    })
}

/// Runs `algorithms` on one cell, converting errors into failed rows.
/// Returns the rows and the wall time of each successful run.
pub fn run_cell(
    spec: &CellSpec,
    instance: &InstanceSpec,
    algorithms: &[Algorithm],
    out_dir: Option<&Path>,
) -> Vec<(CellResult, Option<f64>)> {
    let prepared = match spec.prepare(instance) {
        Ok(p) => p,
        Err(e) => return algorithms.iter().map(|&a| (CellResult::failed(spec, a, &e), None)).collect(),
    };
    algorithms
        .iter()
        .map(|&alg| {
            let start = Instant::now();
            let outcome = alg.run(&prepared.schedule, &prepared.config, Some(&prepared.truth)).and_then(|res| {
                let elapsed = start.elapsed().as_secs_f64();
                if let Some(dir) = out_dir {
                    io::write_trace_csv(&dir.join(cell_dir_name(spec, alg)).join("trace.csv"), &res.trace.records)?;
                }
                Ok((summarize(spec, alg, &prepared, &res)?, elapsed))
            });
            match outcome {
                Ok((row, t)) => (row, Some(t)),
                Err(e) => (CellResult::failed(spec, alg, &e), None),
            }
        })
        .collect()
}

pub fn cell_dir_name(spec: &CellSpec, alg: Algorithm) -> String {
    format!(
        "n{}_k{}_d{}_eps{:e}_seed{}_{}",
        spec.n,
        spec.k,
        spec.d,
        spec.epsilon,
        spec.seed,
        alg.name()
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub d: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub instance: InstanceSpec,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `0` uses the rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub iterations: Option<usize>,
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Tam]
}

fn default_beta() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, len) in [
            ("n", self.n.len()),
            ("k", self.k.len()),
            ("d", self.d.len()),
            ("epsilon", self.epsilon.len()),
            ("seeds", self.seeds.len()),
            ("algorithms", self.algorithms.len()),
        ] {
            if len == 0 {
                return Err(invalid(format!("experiment grid axis `{name}` is empty")));
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        for &eps in &self.epsilon {
            derive_iteration_count(eps)?;
        }
        Ok(())
    }

    /// Grid cells in `n, k, d, epsilon, seed` order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                for &d in &self.d {
                    for &epsilon in &self.epsilon {
                        for &seed in &self.seeds {
                            out.push(CellSpec {
                                n,
                                k,
                                d,
                                epsilon,
                                seed,
                                beta: self.beta,
                                delta: self.delta,
                                iterations: self.iterations,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<CellResult>,
    /// Wall time per row, `None` for failed rows.
    pub wall_times: Vec<Option<f64>>,
    pub failures: usize,
}

pub const RESULTS_FILE: &str = "results.csv";

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))
}

/// Executes every cell of the grid. Failed cells are recorded and the sweep
/// continues. With an output directory, per-cell traces, `results.csv` and
/// `timings.json` are written; `results.csv` is replaced atomically.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepSummary> {
    config.validate()?;
    let cells = config.cells();
    let out_dir = config.out_dir.as_deref();
    let pairs: Vec<(CellResult, Option<f64>)> = pool(config.threads)?.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|spec| run_cell(spec, &config.instance, &config.algorithms, out_dir))
            .collect()
    });
    let (rows, wall_times): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let failures = rows.iter().filter(|r| !r.is_ok()).count();
    let summary = SweepSummary {
        rows,
        wall_times,
        failures,
    };
    if let Some(dir) = out_dir {
        write_results(&dir.join(RESULTS_FILE), &summary.rows)?;
        io::write_json(&dir.join("timings.json"), &summary.wall_times)?;
    }
    Ok(summary)
}

pub fn write_results(path: &Path, rows: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    io::write_atomic(path, &w.into_inner().map_err(|e| TamError::Io(e.into_error()))?)
}

pub fn read_results(path: &Path) -> Result<Vec<CellResult>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(TamError::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub n: Vec<usize>,
    pub k: usize,
    pub d: usize,
    pub iterations: usize,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub median_seconds: f64,
    pub seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log t` against `log n`; `None` with fewer than
    /// two distinct sizes.
    pub exponent: Option<f64>,
}

/// Times `run_tam` (initialization included, instance and schedule
/// generation excluded) on flat rank-`k` instances.
pub fn runtime_scaling(config: &ScalingConfig) -> Result<ScalingReport> {
    if config.n.is_empty() || config.repetitions == 0 {
        return Err(invalid("scaling needs at least one size and one repetition"));
    }
    let mut rows = Vec::with_capacity(config.n.len());
    for &n in &config.n {
        let spec = CellSpec {
            n,
            k: config.k,
            d: config.d,
            epsilon: 0.5,
            seed: config.seed,
            beta: default_beta(),
            delta: default_delta(),
            iterations: Some(config.iterations),
        };
        let prepared = spec.prepare(&InstanceSpec::default())?;
        let mut seconds = Vec::with_capacity(config.repetitions);
        for _ in 0..config.repetitions {
            let start = Instant::now();
            run_tam(&prepared.schedule, &prepared.config, None)?;
            seconds.push(start.elapsed().as_secs_f64());
        }
        rows.push(ScalingRow {
            n,
            median_seconds: median(&seconds).unwrap_or(f64::NAN),
            seconds,
        });
    }
    let exponent = fit_exponent(&rows);
    Ok(ScalingReport { rows, exponent })
}

fn fit_exponent(rows: &[ScalingRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_seconds > 0.0)
        .map(|r| ((r.n as f64).ln(), r.median_seconds.ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeProbe {
    pub d: usize,
    pub median_contraction: Option<f64>,
    pub success_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSelection {
    pub selected: Option<usize>,
    pub probes: Vec<DegreeProbe>,
}

/// Walks `d_grid` in order and returns the first degree at which TAM
/// contracts on the pilot seeds: median half-step contraction ratio at most
/// `max_ratio` and every pilot run reaching relative error `≤ ε`.
pub fn select_contraction_degree(
    n: usize,
    k: usize,
    epsilon: f64,
    instance: &InstanceSpec,
    d_grid: &[usize],
    pilot_seeds: &[u64],
    max_ratio: f64,
) -> Result<DegreeSelection> {
    if d_grid.is_empty() || pilot_seeds.is_empty() {
        return Err(invalid("degree selection needs a nonempty grid and pilot seed list"));
    }
    let mut probes = Vec::new();
    for &d in d_grid {
        let rows: Vec<CellResult> = pilot_seeds
            .iter()
            .flat_map(|&seed| {
                let spec = CellSpec {
                    n,
                    k,
                    d,
                    epsilon,
                    seed,
                    beta: default_beta(),
                    delta: default_delta(),
                    iterations: None,
                };
                run_cell(&spec, instance, &[Algorithm::Tam], None)
            })
            .map(|(r, _)| r)
            .collect();
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.median_contraction).collect();
        let successes = rows.iter().filter(|r| r.relative_error.is_some_and(|e| e <= epsilon)).count();
        let probe = DegreeProbe {
            d,
            median_contraction: median(&ratios),
            success_fraction: successes as f64 / rows.len() as f64,
        };
        let ok = probe.success_fraction == 1.0 && probe.median_contraction.is_some_and(|m| m <= max_ratio);
        probes.push(probe);
        if ok {
            return Ok(DegreeSelection {
                selected: Some(d),
                probes,
            });
        }
    }
    Ok(DegreeSelection { selected: None, probes })
}
