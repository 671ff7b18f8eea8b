//! Command-line entry point shared by the binary and the integration tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::accumulators::{Beta1Mode, DecaySchedule};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, SavedTrace};
use crate::moreau::{moreau_gradient, theory_bound, BoundConstants, BoundVariant, ProxPointOptions};
use crate::numeric::DiagonalMetric;
use crate::problems::{CompositeProblem, PhaseRetrieval};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "emaopt", version, about = "Adaptive EMA subgradient methods: experiments and diagnostics")]
struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sweep described by a config file and write CSVs.
    Run {
        config: PathBuf,
        /// Output directory (the EMAOPT_OUTPUT_DIR variable takes precedence).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
    /// Print the a priori stationarity bound as JSON.
    Bound(BoundArgs),
    /// Moreau envelope report at `x_{t*}` of a saved trace, as JSON.
    Stationarity {
        trace: PathBuf,
        /// Envelope parameter, or `default` for 1/(2ρ).
        zeta: String,
        /// `identity` or `vhat` (the metric `v̂_{t*}^{1/2}`).
        #[arg(long, default_value = "identity")]
        metric: String,
        /// Phase retrieval instance file to use instead of regenerating it.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = crate::moreau::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
}

#[derive(clap::Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value = "projected-fema")]
    variant: String,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    rho_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    g_inf: f64,
    #[arg(long)]
    d_inf: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 0.9)]
    beta3: f64,
    /// Geometric decay `β₁,ₜ = β₁πᵗ⁻¹`; constant `β₁` when absent.
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta_psi: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    lambda_min_q: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(|e| match e {
        // An unreadable config file is a usage error, not a run failure.
        Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
        other => other,
    })
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate { config } => {
            let c = load_config(&config)?;
            println!(
                "{}: ok ({} algorithms × {} stepsizes × {} repetitions, T + 1 = {})",
                config.display(),
                c.algorithms.len(),
                c.grid.count,
                c.run.repetitions,
                c.horizon() + 1
            );
            Ok(())
        }
        Command::Run { config, output } => {
            let c = load_config(&config)?;
            let env = std::env::var(harness::OUTPUT_DIR_ENV).ok();
            let dir = harness::resolve_output_dir(env.as_deref(), output.as_deref(), &c);
            let result = harness::run_experiment(&c)?;
            let paths = harness::write_outputs(&result, &dir)?;
            log::info!("wrote {} files to {}", paths.len(), dir.display());
            if !result.failures.is_empty() {
                eprintln!(
                    "warning: {} of {} runs failed; see {}",
                    result.failures.len(),
                    result.failures.len() + result.records.len(),
                    dir.join(harness::output::FAILURES_FILE).display()
                );
            }
            if result.records.is_empty() {
                return Err(Error::RunsFailed(result.failures.len()));
            }
            Ok(())
        }
        Command::Bound(args) => {
            let variant: BoundVariant = args.variant.parse()?;
            let mode = match args.pi {
                Some(pi) => Beta1Mode::Geometric { pi },
                None => Beta1Mode::Constant,
            };
            let schedule = DecaySchedule::new(args.beta1, mode, args.beta2, args.beta3)?;
            let constants = BoundConstants {
                rho: args.rho,
                rho_bar: args.rho_bar,
                g_inf: args.g_inf,
                d_inf: args.d_inf,
                dim: args.dim,
                horizon: args.horizon,
                schedule,
                alpha: args.alpha,
                delta_psi: args.delta_psi,
                mu: args.mu,
                lipschitz: args.lipschitz,
                lambda_min_q: args.lambda_min_q,
            };
            let breakdown = theory_bound(&constants, variant)?;
            print_json(&breakdown)
        }
        Command::Stationarity {
            trace,
            zeta,
            metric,
            instance,
            max_iter,
        } => {
            let saved = SavedTrace::load(&trace)?;
            let problem: Arc<dyn CompositeProblem> = match instance {
                Some(path) => Arc::new(PhaseRetrieval::read_from(&path)?),
                None => harness::instance_for(&saved.problem, saved.master_seed, saved.repetition)?.problem,
            };
            let m = match metric.as_str() {
                "identity" => DiagonalMetric::identity(problem.dim()),
                "vhat" => DiagonalMetric::new(saved.v_hat_tstar.clone())?.sqrt(),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "metric must be `identity` or `vhat`, got `{other}`"
                    )))
                }
            };
            let zeta = if zeta == "default" {
                harness::experiment::reporting_zeta(problem.as_ref(), &m)
            } else {
                zeta.parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("zeta must be a number or `default`, got `{zeta}`")))?
            };
            let options = ProxPointOptions {
                max_iter,
                ..ProxPointOptions::default()
            };
            let report = moreau_gradient(problem.as_ref(), &saved.x_tstar, zeta, &m, &options)?;
            print_json(&report)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}
