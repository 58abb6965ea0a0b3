//! `jumpcurv`: curvature bounds for jump processes and their numerical checks.

mod commands;
mod config;
mod error;
mod inputs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::commands::{JInputs, JMethodArg, Outcome};
use crate::config::{load_config, load_preset, Loaded, StrategyName};
use crate::error::{CliError, CliResult};
use crate::report::{render, write_out, Format};

/// Environment variable fixing the worker thread count.
const WORKERS_ENV: &str = "JUMPCURV_WORKERS";

#[derive(Parser)]
#[command(name = "jumpcurv", version, about = "Coarse Ricci curvature bounds for jump processes")]
struct Cli {
    /// Report format on stdout or in --out.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W1 distance between two measures.
    Wasserstein {
        #[arg(long)]
        m1: PathBuf,
        #[arg(long)]
        m2: PathBuf,
        #[arg(long)]
        metric: String,
        /// Write an optimal plan as CSV `source,target,weight`.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// The J functional or one of its bounds.
    J {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long)]
        m1: PathBuf,
        #[arg(long)]
        m2: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long, value_enum, default_value_t = JMethodArg::Exact)]
        method: JMethodArg,
        /// Reference measure for the density form; counting measure by default.
        #[arg(long)]
        zeta: Option<PathBuf>,
        #[arg(long)]
        beta_x: Option<f64>,
        #[arg(long)]
        beta_y: Option<f64>,
    },
    /// Curvature lower bound: closed form and pair search.
    Bound(ModelArgs),
    /// First eigenpair of a birth-death chain killed at 0.
    Eigen(ModelArgs),
    /// Herding threshold and agents bounds.
    Threshold(ModelArgs),
    /// One trajectory.
    Simulate(ModelArgs),
    /// One trajectory of the optimal coupling.
    Couple(ModelArgs),
    /// Fitted contraction rate of the optimal coupling.
    Contract(ModelArgs),
    /// Exit times from a consensus state.
    Herd(ModelArgs),
    /// Bound and contraction fit with a verdict.
    Verify(ModelArgs),
    /// Print the resolved configuration, defaults filled in, as TOML.
    Config(ModelArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "preset"])))]
struct ModelArgs {
    /// TOML run configuration.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Shipped preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Write the CSV series here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    overrides: RunOverrides,
}

/// Command-line replacements for `[run]` entries.
#[derive(Args, Default)]
pub struct RunOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub start_y: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub start_z: Option<Vec<usize>>,
    #[arg(long)]
    pub z_threshold: Option<f64>,
    #[arg(long)]
    pub absorption: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub claimed_bound: Option<f64>,
}

impl clap::ValueEnum for StrategyName {
    fn value_variants<'a>() -> &'a [Self] {
        &[StrategyName::Exhaustive, StrategyName::Adjacent, StrategyName::Random]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            StrategyName::Exhaustive => "exhaustive",
            StrategyName::Adjacent => "adjacent",
            StrategyName::Random => "random",
        }))
    }
}

fn configure_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("{WORKERS_ENV}=`{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("cannot start {n} workers: {e}")))
}

fn load(args: &ModelArgs) -> CliResult<Loaded> {
    let mut loaded = match (&args.model, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => load_preset(name)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    commands::apply_overrides(&mut loaded, &args.overrides)?;
    Ok(loaded)
}

fn run(cli: &Cli) -> CliResult<(Outcome, Option<PathBuf>, Option<PathBuf>)> {
    let with_model = |args: &ModelArgs, f: fn(&Loaded) -> CliResult<Outcome>| -> CliResult<_> {
        let loaded = load(args)?;
        let json = cli.out.clone().or_else(|| loaded.config.output.json.clone());
        let csv = args.csv.clone().or_else(|| loaded.config.output.csv.clone());
        Ok((f(&loaded)?, json, csv))
    };
    match &cli.command {
        Command::Wasserstein { m1, m2, metric, plan } => {
            Ok((commands::wasserstein_cmd(m1, m2, metric, plan.is_some())?, cli.out.clone(), plan.clone()))
        }
        Command::J { x, y, m1, m2, metric, method, zeta, beta_x, beta_y } => {
            let inputs = JInputs { x, y, m1, m2, metric, method: *method, zeta: zeta.as_ref(), beta_x: *beta_x, beta_y: *beta_y };
            Ok((commands::j_cmd(&inputs)?, cli.out.clone(), None))
        }
        Command::Bound(a) => with_model(a, commands::bound_cmd),
        Command::Eigen(a) => with_model(a, commands::eigen_cmd),
        Command::Threshold(a) => with_model(a, commands::threshold_cmd),
        Command::Simulate(a) => with_model(a, commands::simulate_cmd),
        Command::Couple(a) => with_model(a, commands::couple_cmd),
        Command::Contract(a) => with_model(a, commands::contract_cmd),
        Command::Herd(a) => with_model(a, commands::herd_cmd),
        Command::Verify(a) => with_model(a, commands::verify_cmd),
        Command::Config(_) => unreachable!("handled in main"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = Cli::parse();
    if let Command::Config(args) = &cli.command {
        let result = load(args).and_then(|l| config::emit_config(&l.config)).and_then(|t| write_out(&t, cli.out.as_deref()));
        return result.map_or_else(|e| fail(&e), |_| ExitCode::SUCCESS);
    }
    let result = configure_workers().and_then(|_| run(&cli)).and_then(|(outcome, json, csv)| {
        write_out(&render(&outcome.report, cli.format), json.as_deref())?;
        if let (Some(text), Some(path)) = (&outcome.csv, csv) {
            write_out(text, Some(&path))?;
        }
        outcome.violation.map_or(Ok(()), |v| Err(CliError::Violation(v)))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("jumpcurv: {e}");
    e.exit_code()
}
