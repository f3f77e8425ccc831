use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tam::diagnostics::{subset_deviation_test, bad_set, error_term, incoherence_of, bad_set_bounds_check};
use tam::graph::sample_rrg_schedule;
use tam::harness::{
    factored_relative_error, geometric_sigma, median, relative_error, run_sweep, runtime_scaling, Algorithm,
    ExperimentConfig, ScalingConfig,
};
use tam::io;
use tam::seed;
use tam::synth::{gen_adversarial_gramian, gen_flat, FlatMode};
use tam::tam::{derive_iteration_count, TamConfig};
use tam::TamError;

#[derive(Parser)]
#[command(name = "tam", version, about = "Thresholded alternating minimization for matrix completion")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config file (sweep: experiment grid; bench: scaling config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Flat,
    FlatOnes,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Tam,
    VanillaAm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth matrix.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = InstanceKind::Flat)]
        instance: InstanceKind,
        /// Degree the adversarial instance is tuned for.
        #[arg(long, default_value_t = 10)]
        d: usize,
    },
    /// Sample an RRG schedule from a saved ground truth.
    Sample {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        d: usize,
        /// Iteration count N; derived from --epsilon when omitted.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Run TAM or vanilla AM on a saved schedule.
    Run {
        /// Path to schedule.json.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Incoherence parameter; defaults to the truth's measured value or 1.
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Ground-truth directory for distances and relative error.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Tam)]
        algorithm: AlgorithmArg,
    },
    /// Diagnostics for a saved factor against one graph of a schedule.
    Diagnose {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Result directory; its `u_final.csv` is diagnosed. Defaults to U*.
        #[arg(long)]
        result: Option<PathBuf>,
        /// Graph index within the schedule.
        #[arg(long, default_value_t = 1)]
        graph: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.5)]
        zeta: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Runtime against n.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2000, 4000])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
    /// Run a full experiment grid from --config.
    Sweep,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Partial(usize),
}

impl From<TamError> for Failure {
    fn from(e: TamError) -> Self {
        match e {
            TamError::Convergence { .. }
            | TamError::DegenerateTruncation { .. }
            | TamError::Invariant(_)
            | TamError::SamplingFailure { .. }
            | TamError::Inconsistency(_)
            | TamError::InvalidSubspace(_)
            | TamError::OutOfRange(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn require_out(global: &Global) -> CliResult<&Path> {
    global
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("this subcommand needs --out <dir>".into()))
}

fn emit<T: Serialize>(format: Format, value: &T) -> CliResult<()> {
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(value).map_err(TamError::from)?;
            println!("{text}");
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(value).map_err(TamError::from)?;
            w.flush().map_err(TamError::from)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GenSummary {
    out: String,
    n: usize,
    k: usize,
    mu0_actual: f64,
    kappa: f64,
}

#[derive(Serialize)]
struct SampleSummary {
    manifest: String,
    n: usize,
    d: usize,
    iterations: usize,
    observations: usize,
}

#[derive(Serialize)]
struct RunSummary {
    algorithm: &'static str,
    n: usize,
    k: usize,
    d: usize,
    iterations: usize,
    relative_error: Option<f64>,
    final_dist_u: Option<f64>,
    median_contraction: Option<f64>,
    total_bad: usize,
    ill_conditioned: usize,
    init_time_s: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    graph: usize,
    incoherence: f64,
    subset_deviation_failure_fraction: f64,
    bad_set: tam::diagnostics::BadSetReport,
    bounds: tam::diagnostics::BadSetBounds,
    error_term: tam::diagnostics::ErrorTermReport,
}

#[derive(Serialize)]
struct SweepLine {
    cells: usize,
    failures: usize,
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::Gen { n, k, kappa, instance, d } => {
            let out = require_out(g)?;
            let mut rng = seed::child_rng(g.seed, seed::INSTANCE, 0);
            let sigma = geometric_sigma(k, kappa);
            let (truth, kind) = match instance {
                InstanceKind::Flat => (gen_flat(n, k, &sigma, FlatMode::RandomSigns, &mut rng)?, "flat"),
                InstanceKind::FlatOnes => (gen_flat(n, k, &sigma, FlatMode::Deterministic, &mut rng)?, "flat-ones"),
                InstanceKind::Adversarial => (gen_adversarial_gramian(n, k, d, &sigma, &mut rng)?, "adversarial"),
            };
            io::write_truth(out, &truth, Some(g.seed), kind)?;
            emit(
                g.format,
                &GenSummary {
                    out: out.display().to_string(),
                    n,
                    k,
                    mu0_actual: truth.mu0_actual(),
                    kappa: truth.kappa(),
                },
            )
        }
        Command::Sample {
            truth,
            d,
            iterations,
            epsilon,
        } => {
            let out = require_out(g)?;
            let (truth, _) = io::read_truth(&truth)?;
            let iterations = match iterations {
                Some(n) => n,
                None => derive_iteration_count(epsilon)?,
            };
            let schedule_seed = seed::derive(g.seed, seed::SCHEDULE, 0);
            let schedule = sample_rrg_schedule(truth.n(), d, iterations, |i, j| truth.entry(i, j), schedule_seed)?;
            io::write_schedule(out, &schedule, schedule_seed)?;
            emit(
                g.format,
                &SampleSummary {
                    manifest: out.join(io::MANIFEST_FILE).display().to_string(),
                    n: schedule.n,
                    d,
                    iterations,
                    observations: schedule.total_observations(),
                },
            )
        }
        Command::Run {
            schedule,
            k,
            epsilon,
            mu0,
            beta,
            delta,
            truth,
            algorithm,
        } => {
            let out = require_out(g)?;
            let (schedule, _) = io::read_schedule(&schedule)?;
            let truth = truth.map(|p| io::read_truth(&p).map(|t| t.0)).transpose()?;
            let mu0 = mu0.or(truth.as_ref().map(|t| t.mu0_actual())).unwrap_or(1.0);
            let mut config = TamConfig::new(k, schedule.d, epsilon, mu0, g.seed)?.with_iterations(schedule.iterations);
            config.beta = beta;
            config.delta = delta;
            let alg = match algorithm {
                AlgorithmArg::Tam => Algorithm::Tam,
                AlgorithmArg::VanillaAm => Algorithm::VanillaAm,
            };
            let result = alg.run(&schedule, &config, truth.as_ref())?;
            io::write_result(out, &result)?;
            let trace = &result.trace;
            let summary = RunSummary {
                algorithm: alg.name(),
                n: schedule.n,
                k,
                d: schedule.d,
                iterations: schedule.iterations,
                relative_error: truth.as_ref().map(|t| relative_error(t, &result)).transpose()?,
                final_dist_u: trace.records.last().and_then(|r| r.dist_u_in),
                median_contraction: median(&trace.contraction_ratios(epsilon)),
                total_bad: trace.total_bad(),
                ill_conditioned: trace.total_ill_conditioned(),
                init_time_s: trace.init_time_s,
                wall_time_s: trace.wall_time_s(),
            };
            io::write_json(&out.join("summary.json"), &summary)?;
            emit(g.format, &summary)
        }
        Command::Diagnose {
            schedule,
            truth,
            result,
            graph,
            beta,
            delta,
            epsilon,
            zeta,
            trials,
        } => {
            let (schedule, _) = io::read_schedule(&schedule)?;
            let (truth, _) = io::read_truth(&truth)?;
            let graph_ref = schedule
                .graphs
                .get(graph)
                .ok_or_else(|| Failure::Usage(format!("schedule has {} graphs, asked for {graph}", schedule.graphs.len())))?;
            let u = match &result {
                Some(dir) => io::read_result_factors(dir)?.0,
                None => truth.u_star().clone(),
            };
            let mut rng = seed::child_rng(g.seed, seed::SUBSET_DEVIATION, 0);
            let report = DiagnoseReport {
                graph,
                incoherence: incoherence_of(&u)?,
                subset_deviation_failure_fraction: subset_deviation_test(truth.u_star(), schedule.d, delta, trials, &mut rng)?,
                bad_set: bad_set(&u, graph_ref, beta, graph)?.with_bound(schedule.d, truth.mu0_actual(), beta, truth.k(), zeta),
                bounds: bad_set_bounds_check(&u, truth.u_star(), graph_ref, beta, delta, truth.mu0_actual(), zeta)?,
                error_term: error_term(&u, &truth, graph_ref, beta, epsilon)?,
            };
            if let Some(out) = &g.out {
                io::write_json(&out.join("diagnostics.json"), &report)?;
                io::write_index_list(&out.join("bad_set.txt"), &report.bad_set.indices)?;
            }
            if let Some(dir) = &result {
                let (u, v) = io::read_result_factors(dir)?;
                eprintln!("relative error of saved result: {:.3e}", factored_relative_error(&truth, &u, &v)?);
            }
            // Nested report: always JSON.
            emit(Format::Json, &report)
        }
        Command::Bench {
            n,
            d,
            k,
            iterations,
            repetitions,
        } => {
            let config = match &g.config {
                Some(p) => io::read_json(p)?,
                None => ScalingConfig {
                    n,
                    k,
                    d,
                    iterations,
                    repetitions,
                    seed: g.seed,
                },
            };
            let report = runtime_scaling(&config)?;
            let mut csv_out = String::from("n,median_seconds\n");
            for r in &report.rows {
                csv_out.push_str(&format!("{},{}\n", r.n, r.median_seconds));
            }
            if let Some(out) = &g.out {
                io::write_atomic(&out.join("scaling.csv"), csv_out.as_bytes())?;
                io::write_json(&out.join("scaling.json"), &report)?;
            }
            match g.format {
                Format::Csv => print!("{csv_out}"),
                Format::Json => emit(g.format, &report)?,
            }
            Ok(())
        }
        Command::Sweep => {
            let path = g
                .config
                .as_deref()
                .ok_or_else(|| Failure::Usage("sweep needs --config <json>".into()))?;
            let mut config: ExperimentConfig = io::read_json(path)?;
            if g.out.is_some() {
                config.out_dir = g.out.clone();
            }
            if g.threads != 0 {
                config.threads = g.threads;
            }
            let summary = run_sweep(&config)?;
            emit(
                g.format,
                &SweepLine {
                    cells: summary.rows.len(),
                    failures: summary.failures,
                },
            )?;
            if summary.failures > 0 {
                return Err(Failure::Partial(summary.failures));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.global.threads != 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("sweep finished with {n} failed cell(s)");
            ExitCode::from(3)
        }
    }
}
