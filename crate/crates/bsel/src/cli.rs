//! Command-line interface: argument parsing, dispatch, and output formatting.
//!
//! Every subcommand prints a single JSON document to stdout whose fields
//! embed the full parameter set (including the resolved master seed), so any
//! artifact can be reproduced from its own header. Bulk data (sweep tables,
//! plot points, measure dumps) goes to files named by `--out`-style flags;
//! those files start with `#`-prefixed metadata lines for the same reason.
//!
//! Exit codes: 0 success, 1 I/O failure or failed checks, 2 usage error,
//! 3 capacity/budget exceeded, 4 numeric failure (including a sequence that
//! turns out not to be admissible), 5 internal invariant violation.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::admissible::{
    self, build_sequence, certificate_lower_bound, check_admissibility, AdmissibleError,
};
use crate::dynamics::{self, DynamicsError};
use crate::estimator::{
    self, default_burnin, estimate_speed, fit_scaling, read_sweep_csv, sweep, write_sweep_csv,
    EstimatorError, FitPoint, SweepConfig,
};
use crate::exact_chain::{build_chain, exact_speed, ChainError};
use crate::population::{ModelParams, PopulationError};
use crate::proof_checks::{standard_suite, ProofCheckError};
use crate::theory::{critical_speed, derived_constants, Regime, TheoryError};

/// Environment variable consulted for the master seed when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "BSEL_SEED";

/// Branching-selection particle system: theory constants, exact small-N
/// speeds, Monte Carlo speed estimation, scaling fits, certified lower
/// bounds, and proof-support checks.
#[derive(Debug, Parser)]
#[command(name = "bsel", version, about, max_term_width = 100)]
pub struct Cli {
    /// Master seed for all randomness (default: $BSEL_SEED, else 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel subcommands (sweep, checks).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the limiting speed and derived constants at a given p.
    Theory(TheoryArgs),
    /// Run one trajectory and print recorded front statistics.
    Simulate(SimulateArgs),
    /// Estimate the speed for one (p, N) by batch means.
    Speed(SpeedArgs),
    /// Run a replicated speed sweep over several N and write a CSV table.
    Sweep(SweepArgs),
    /// Fit a finite-size scaling law to a sweep CSV.
    Fit(FitArgs),
    /// Exact speed of the small-N quotient chain.
    Exact(ExactArgs),
    /// Build the barrier measure sequence and certify a speed lower bound.
    Admissible(AdmissibleArgs),
    /// Run the randomized proof-support checks.
    Checks(ChecksArgs),
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Step-up probability, in (0, 1).
    #[arg(long)]
    pub p: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Step-up probability, in (0, 1).
    #[arg(long)]
    pub p: f64,

    /// Population size.
    #[arg(long = "N", value_name = "N")]
    pub n: u64,

    /// Number of selection steps.
    #[arg(long)]
    pub steps: u64,

    /// Record front statistics every this many steps.
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
}

#[derive(Debug, Args)]
pub struct SpeedArgs {
    /// Step-up probability, in (0, 1).
    #[arg(long)]
    pub p: f64,

    /// Population size.
    #[arg(long = "N", value_name = "N")]
    pub n: u64,

    /// Number of selection steps after burn-in.
    #[arg(long)]
    pub steps: u64,

    /// Burn-in steps discarded before measuring (default: steps / 10).
    #[arg(long)]
    pub burnin: Option<u64>,

    /// Number of batches for the batch-means error bar (minimum 8).
    #[arg(long, default_value_t = 16)]
    pub batches: u32,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Step-up probability, in (0, 1).
    #[arg(long)]
    pub p: f64,

    /// Comma-separated population sizes, strictly ascending.
    #[arg(
        long = "Ns",
        value_name = "N1,N2,...",
        value_delimiter = ',',
        required = true
    )]
    pub ns: Vec<u64>,

    /// Selection steps per run after burn-in.
    #[arg(long)]
    pub steps: u64,

    /// Burn-in steps per run (default: steps / 10).
    #[arg(long)]
    pub burnin: Option<u64>,

    /// Batches per run for error bars (minimum 8).
    #[arg(long, default_value_t = 16)]
    pub batches: u32,

    /// Independent replicates per N.
    #[arg(long, default_value_t = 4)]
    pub replicates: u32,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV produced by the sweep subcommand.
    #[arg(long)]
    pub input: PathBuf,

    /// Scaling regime: subcritical, critical, or supercritical
    /// (default: classify from the p recorded in the CSV).
    #[arg(long)]
    pub regime: Option<Regime>,

    /// Optional path for two-column plot data (x y per line).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Step-up probability, in (0, 1).
    #[arg(long)]
    pub p: f64,

    /// Population size (small: the class space grows quickly).
    #[arg(long = "N", value_name = "N")]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct AdmissibleArgs {
    /// Step-up probability, in (0, 1/2).
    #[arg(long)]
    pub p: f64,

    /// Horizon of the measure sequence.
    #[arg(long)]
    pub m: u64,

    /// Tail-window length multiplier (window length A * m^(2/3)).
    #[arg(long = "A", value_name = "A", default_value_t = 8)]
    pub tail_factor: u64,

    /// Margin for the terminal-mass property and the tail bound.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,

    /// Population size at which to evaluate the certified lower bound.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<u64>,

    /// Optional CSV path for the full measure sequence (i,x,value rows).
    #[arg(long)]
    pub dump_measures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChecksArgs {}

/// One error type per failure class, carrying the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::ChecksFailed { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PopulationError> for CliError {
    fn from(e: PopulationError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::DiameterInvariant { .. } => CliError::Internal(e.to_string()),
            DynamicsError::CountOverflow => CliError::Capacity(e.to_string()),
            DynamicsError::InvalidQ(_)
            | DynamicsError::InvalidRecordEvery
            | DynamicsError::Population(_) => CliError::Usage(e.to_string()),
            DynamicsError::InsufficientMass { .. } | DynamicsError::MassMismatch { .. } => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::StateBudget { .. } | ChainError::EnumerationBudget { .. } => {
                CliError::Capacity(e.to_string())
            }
            ChainError::Numeric(_) => CliError::Numeric(e.to_string()),
            ChainError::Population(inner) => CliError::from(inner),
            ChainError::Dynamics(inner) => CliError::from(*inner),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::RunControls(_) | EstimatorError::Grid => CliError::Usage(e.to_string()),
            EstimatorError::RowFailed { .. } => {
                // Keep the row context in the message, classify by the leaf.
                let msg = e.to_string();
                let mut leaf = &e as &dyn std::error::Error;
                while let Some(next) = leaf.source() {
                    leaf = next;
                }
                let _ = leaf;
                CliError::Numeric(msg)
            }
            EstimatorError::NoiseFloor { .. } | EstimatorError::Pool(_) => {
                CliError::Numeric(e.to_string())
            }
            EstimatorError::Csv(_) => CliError::Usage(e.to_string()),
            EstimatorError::Theory(inner) => CliError::from(inner),
            EstimatorError::Dynamics(inner) => CliError::from(*inner),
            EstimatorError::Io(source) => CliError::Io {
                path: String::from("<stream>"),
                source,
            },
        }
    }
}

impl From<AdmissibleError> for CliError {
    fn from(e: AdmissibleError) -> Self {
        match e {
            AdmissibleError::Parameters(_)
            | AdmissibleError::InfeasibleBarriers { .. }
            | AdmissibleError::InvalidPath(_) => CliError::Usage(e.to_string()),
            AdmissibleError::Numeric(_) | AdmissibleError::NotAdmissible { .. } => {
                CliError::Numeric(e.to_string())
            }
            AdmissibleError::Internal(_) => CliError::Internal(e.to_string()),
            AdmissibleError::Theory(inner) => CliError::from(inner),
            AdmissibleError::Dynamics(inner) => CliError::from(*inner),
        }
    }
}

impl From<ProofCheckError> for CliError {
    fn from(e: ProofCheckError) -> Self {
        match e {
            ProofCheckError::Parameters(_) | ProofCheckError::WindowOverrun { .. } => {
                CliError::Usage(e.to_string())
            }
            ProofCheckError::CapExceeded { .. } => CliError::Capacity(e.to_string()),
            ProofCheckError::Theory(inner) => CliError::from(inner),
            ProofCheckError::Dynamics(inner) => CliError::from(*inner),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Resolves the master seed: `--seed` flag, else the environment variable,
/// else 0. A set-but-unparsable variable is a usage error, not a silent 0.
pub fn resolve_seed(flag: Option<u64>, env_value: Option<&str>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match env_value {
        None => Ok(0),
        Some(raw) => raw.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got {raw:?}"
            ))
        }),
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io {
        path: String::from("<stdout>"),
        source: std::io::Error::other(e),
    })?;
    out.write_all(b"\n").map_err(|e| CliError::Io {
        path: String::from("<stdout>"),
        source: e,
    })
}

#[derive(Debug, Serialize)]
struct TheoryOutput {
    p: f64,
    regime: Regime,
    /// Limiting speed: rate-function root for p < 1/2, otherwise 1.
    v: f64,
    /// Derived constants; absent outside the subcritical regime.
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<crate::theory::TheoryConstants>,
}

fn run_theory(args: &TheoryArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let regime = Regime::classify(args.p)?;
    let v = critical_speed(args.p)?;
    let constants = match regime {
        Regime::Subcritical => Some(derived_constants(args.p)?),
        _ => None,
    };
    print_json(
        out,
        &TheoryOutput {
            p: args.p,
            regime,
            v,
            constants,
        },
    )
}

#[derive(Debug, Serialize)]
struct SimulateOutput {
    trajectory: dynamics::Trajectory,
    max_diameter: u64,
    diameter_bound: u64,
}

fn run_simulate(args: &SimulateArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let params = ModelParams::new(args.p, args.n)?;
    let trajectory = dynamics::evolve(params, args.steps, args.record_every, seed)?;
    let max_diameter = trajectory
        .records
        .iter()
        .map(|r| r.diameter)
        .max()
        .unwrap_or(0);
    let bound = dynamics::diameter_bound(args.n);
    print_json(
        out,
        &SimulateOutput {
            trajectory,
            max_diameter,
            diameter_bound: bound,
        },
    )
}

#[derive(Debug, Serialize)]
struct SpeedOutput {
    p: f64,
    n: u64,
    estimate: estimator::SpeedEstimate,
    /// Limiting speed at this p, for eyeballing the finite-size gap.
    v_limit: f64,
    gap_hat: f64,
}

fn run_speed(args: &SpeedArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let params = ModelParams::new(args.p, args.n)?;
    let burnin = args
        .burnin
        .unwrap_or_else(|| default_burnin(args.n, args.steps, args.batches));
    let estimate = estimate_speed(params, args.steps, burnin, args.batches, seed)?;
    let v_limit = critical_speed(args.p)?;
    print_json(
        out,
        &SpeedOutput {
            p: args.p,
            n: args.n,
            gap_hat: v_limit - estimate.v_hat,
            v_limit,
            estimate,
        },
    )
}

#[derive(Debug, Serialize)]
struct SweepOutput {
    config: SweepConfig,
    rows_written: usize,
    out: String,
}

fn run_sweep(
    args: &SweepArgs,
    seed: u64,
    jobs: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = SweepConfig {
        p: args.p,
        n_list: args.ns.clone(),
        steps: args.steps,
        burnin: args.burnin,
        batches: args.batches,
        replicates: args.replicates,
        master_seed: seed,
        jobs,
    };
    let rows = sweep(&cfg)?;
    // Metadata must not mention `jobs`: the table is byte-identical for any
    // worker count, and the header should prove it.
    let ns_list = args
        .ns
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let meta: Vec<(&str, String)> = vec![
        ("p", format!("{}", args.p)),
        ("Ns", ns_list),
        ("steps", args.steps.to_string()),
        (
            "burnin",
            args.burnin
                .map_or_else(|| String::from("auto"), |b| b.to_string()),
        ),
        ("batches", args.batches.to_string()),
        ("replicates", args.replicates.to_string()),
        ("seed", seed.to_string()),
    ];
    let file = File::create(&args.out).map_err(|e| io_err(&args.out, e))?;
    let mut writer = BufWriter::new(file);
    write_sweep_csv(&mut writer, &rows, &meta).map_err(|e| io_err(&args.out, e))?;
    writer.flush().map_err(|e| io_err(&args.out, e))?;
    print_json(
        out,
        &SweepOutput {
            config: cfg,
            rows_written: rows.len(),
            out: args.out.display().to_string(),
        },
    )
}

#[derive(Debug, Serialize)]
struct FitOutput {
    input: String,
    report: estimator::FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    plot: Option<String>,
}

/// Axis labels for the plot-data header, per regime.
fn plot_axes(regime: Regime) -> (&'static str, &'static str) {
    match regime {
        Regime::Subcritical => ("log(log N)", "log gap"),
        Regime::Critical => ("log N", "log gap"),
        Regime::Supercritical => ("N", "-log gap"),
    }
}

/// Writes fit points as two whitespace-separated columns with `#` headers,
/// ready for gnuplot or numpy.loadtxt.
fn emit_plot_data(
    points: &[FitPoint],
    regime: Regime,
    slope: f64,
    intercept: f64,
    path: &Path,
) -> Result<(), CliError> {
    let (x_label, y_label) = plot_axes(regime);
    let mut text = String::new();
    let _ = writeln!(text, "# regime = {regime:?}");
    let _ = writeln!(text, "# slope = {slope}");
    let _ = writeln!(text, "# intercept = {intercept}");
    let _ = writeln!(text, "# columns: {x_label}  {y_label}");
    for pt in points {
        let _ = writeln!(text, "{} {}", pt.x, pt.y);
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn run_fit(args: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = File::open(&args.input).map_err(|e| io_err(&args.input, e))?;
    let rows = read_sweep_csv(BufReader::new(file))?;
    let regime = match args.regime {
        Some(r) => r,
        None => {
            let p = rows
                .first()
                .ok_or_else(|| CliError::Usage(String::from("sweep CSV has no data rows")))?
                .p;
            Regime::classify(p)?
        }
    };
    let report = fit_scaling(&rows, regime)?;
    if let Some(path) = &args.out {
        emit_plot_data(&report.points, regime, report.slope, report.intercept, path)?;
    }
    print_json(
        out,
        &FitOutput {
            input: args.input.display().to_string(),
            plot: args.out.as_ref().map(|p| p.display().to_string()),
            report,
        },
    )
}

#[derive(Debug, Serialize)]
struct ExactOutput {
    p: f64,
    n: u64,
    /// Number of canonical gap classes reachable from the packed start.
    classes: usize,
    /// Exact stationary speed of the quotient chain.
    v_exact: f64,
    /// Limiting speed at this p, always an upper bound.
    v_limit: f64,
    gap: f64,
}

fn run_exact(args: &ExactArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = ModelParams::new(args.p, args.n)?;
    let chain = build_chain(params)?;
    let classes = chain.len();
    let v_exact = exact_speed(params)?;
    let v_limit = critical_speed(args.p)?;
    print_json(
        out,
        &ExactOutput {
            p: args.p,
            n: args.n,
            classes,
            v_exact,
            v_limit,
            gap: v_limit - v_exact,
        },
    )
}

#[derive(Debug, Serialize)]
struct AdmissibleOutput {
    p: f64,
    m: u64,
    tail_factor: u64,
    beta: f64,
    report: admissible::AdmissibilityReport,
    /// Only with --N: the certified lower bound at that population size.
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<admissible::Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    measures_csv: Option<String>,
}

fn dump_measures(seq: &admissible::AdmissibleSequence, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "i,x,value")?;
        for (i, nu) in seq.measures().iter().enumerate() {
            for (x, value) in nu.iter() {
                writeln!(w, "{i},{x},{value}")?;
            }
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

fn run_admissible(args: &AdmissibleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seq = build_sequence(args.p, args.m, args.tail_factor)?;
    let report = check_admissibility(&seq, args.beta);
    if let Some(path) = &args.dump_measures {
        dump_measures(&seq, path)?;
    }
    let certificate = match args.n {
        Some(n) => Some(certificate_lower_bound(
            args.p,
            n,
            args.m,
            args.tail_factor,
            args.beta,
        )?),
        None => None,
    };
    let admissible = report.admissible;
    print_json(
        out,
        &AdmissibleOutput {
            p: args.p,
            m: args.m,
            tail_factor: args.tail_factor,
            beta: args.beta,
            report,
            certificate,
            measures_csv: args.dump_measures.as_ref().map(|p| p.display().to_string()),
        },
    )?;
    if !admissible {
        return Err(CliError::Numeric(format!(
            "sequence at p = {}, m = {} is not admissible for beta = {}",
            args.p, args.m, args.beta
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ChecksOutput {
    seed: u64,
    passed: usize,
    failed: usize,
    checks: Vec<crate::proof_checks::CheckOutcome>,
}

fn run_checks(seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let checks = standard_suite(seed)?;
    let passed = checks.iter().filter(|c| c.passed).count();
    let failed = checks.len() - passed;
    let total = checks.len();
    print_json(
        out,
        &ChecksOutput {
            seed,
            passed,
            failed,
            checks,
        },
    )?;
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total });
    }
    Ok(())
}

/// Dispatches a parsed command, writing its JSON result to `out`.
///
/// The caller is responsible for having sized the global worker pool to
/// `cli.jobs`; this function only threads the value through to sweep
/// configuration for reproducibility metadata.
pub fn run_to(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = resolve_seed(cli.seed, std::env::var(SEED_ENV_VAR).ok().as_deref())?;
    if cli.jobs == 0 {
        return Err(CliError::Usage(String::from("--jobs must be at least 1")));
    }
    match &cli.command {
        Command::Theory(args) => run_theory(args, out),
        Command::Simulate(args) => run_simulate(args, seed, out),
        Command::Speed(args) => run_speed(args, seed, out),
        Command::Sweep(args) => run_sweep(args, seed, cli.jobs, out),
        Command::Fit(args) => run_fit(args, out),
        Command::Exact(args) => run_exact(args, out),
        Command::Admissible(args) => run_admissible(args, out),
        Command::Checks(_) => run_checks(seed, out),
    }
}

/// Dispatches to stdout. Used by the binary entry point.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_to(cli, &mut lock)
}
