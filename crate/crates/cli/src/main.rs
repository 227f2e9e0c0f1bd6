//! `recon`: validate hierarchical panels, reconcile base forecasts and run
//! expanding-window evaluations.
//!
//! Exit codes: 0 success, 1 validation or constraint failure, 2 usage or
//! I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "recon",
    version,
    about = "Coherent forecast reconciliation for linked hierarchies"
)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check hierarchy specs and the coherence of a panel.
    Validate(ValidateArgs),
    /// Reconcile one set of base forecasts.
    Reconcile(ReconcileArgs),
    /// Run the expanding-window evaluation.
    Evaluate(EvaluateArgs),
    /// Write a synthetic coherent panel for the given hierarchies.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Shared {
    /// Hierarchy spec (JSON or TOML), one per side.
    #[arg(long = "hierarchy", value_name = "PATH")]
    pub hierarchy: Vec<PathBuf>,
    /// Name of the shared top series (defaults to the first spec's top).
    #[arg(long)]
    pub top: Option<String>,
    /// Panel in long format (`series,period,value`).
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Relative coherence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for `simulate` (default 0); recorded in `run.json`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML manifest supplying defaults for any of these flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Args, Debug)]
pub struct ForecasterArgs {
    /// Built-in base forecaster: naive, rw-drift or ar.
    #[arg(long)]
    pub forecaster: Option<String>,
    /// Fixed AR order (otherwise chosen by AICc).
    #[arg(long)]
    pub ar_order: Option<usize>,
    /// Largest AR order tried by AICc.
    #[arg(long)]
    pub ar_max_order: Option<usize>,
    /// Forecast horizons 1..=H.
    #[arg(long)]
    pub horizons: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReconcileArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Weighting: ols, wls or mint-shr.
    #[arg(long)]
    pub method: Option<String>,
    /// Base forecasts (`series,horizon,value`). Without it, base forecasts
    /// are built from `--data`.
    #[arg(long, value_name = "PATH")]
    pub base: Option<PathBuf>,
    /// One-step residuals (`series,period,value`).
    #[arg(long, value_name = "PATH")]
    pub residuals: Option<PathBuf>,
    /// Fixed shrinkage intensity for mint-shr.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Also write the weight matrix to `w.csv`.
    #[arg(long)]
    pub dump_w: bool,
    #[command(flatten)]
    pub forecaster: ForecasterArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// First period of every training window (YYYYQn).
    #[arg(long)]
    pub first_train_start: Option<String>,
    /// Last period of the first training window (YYYYQn).
    #[arg(long)]
    pub first_train_end: Option<String>,
    /// Comma-separated subset of base, ols, wls, mint-shr.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Read base forecasts from `<dir>/<origin>/base.csv` and `residuals.csv`.
    #[arg(long, value_name = "DIR")]
    pub external_base_dir: Option<PathBuf>,
    /// Also reconcile each hierarchy on its own.
    #[arg(long)]
    pub side_only: bool,
    /// Relative floor on residual variances.
    #[arg(long)]
    pub variance_floor: Option<f64>,
    #[command(flatten)]
    pub forecaster: ForecasterArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Number of quarters.
    #[arg(long)]
    pub periods: Option<usize>,
    /// First quarter (YYYYQn).
    #[arg(long)]
    pub start: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Reconcile(a) => commands::reconcile(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
