//! `pure-explore`: oracle computations, single runs and Monte-Carlo batches.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 batch
//! failure (more than 1% of runs failed).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use pure_explore::sim::scenario::ScenarioName;
use thiserror::Error;

/// Environment variable that overrides `--jobs`.
pub const THREADS_ENV: &str = "PUREEXPLORE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pure_explore::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use pure_explore::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::Domain { .. } | E::Dimension { .. } | E::Invalid(_) | E::Output(_) => 2,
                E::Batch { .. } => 4,
                _ => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pure-explore",
    version,
    about = "Fixed-confidence pure exploration with multiple correct answers"
)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Oracle value, characteristic time, oracle answers and weights at a mean vector.
    Solve(SolveArgs),
    /// One run of a strategy; prints the run record as JSON.
    Run(RunArgs),
    /// Monte-Carlo batch from an experiment plan.
    Bench(BenchArgs),
    /// Monte-Carlo batch of a built-in scenario.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem JSON (file path or inline object).
    #[arg(long)]
    pub problem: String,
    /// Comma-separated arm means, e.g. --mu=-1,-0.5
    #[arg(long, allow_hyphen_values = true)]
    pub mu: String,
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,
    /// Variance of the Gaussian family.
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Auto,
    ClosedForm,
    Iterative,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Value tolerance of the iterative solver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also compute the mixed equilibrium of every oracle answer.
    #[arg(long)]
    pub equilibrium: bool,
    /// Simplex grid resolution used to seed equilibrium candidates.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Strategy JSON (file path or inline object).
    #[arg(long)]
    pub strategy: String,
    /// Confidence level, replacing the one in the strategy.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record every n-th round in the trace.
    #[arg(long)]
    pub trace_every: Option<u64>,
    /// Write the record to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub replications: Option<u64>,
    /// Confidence level applied to every strategy.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores; overridden by PUREEXPLORE_THREADS).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory for tau.csv, props.csv and aggregate.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Print the resolved plan as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment plan JSON (file path or inline object).
    #[arg(long)]
    pub plan: String,
    #[command(flatten)]
    pub batch: BatchArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// fig2, fig3 or fig4.
    #[arg(value_parser = parse_scenario)]
    pub name: ScenarioName,
    /// Leading coordinate of the fig2 normals.
    #[arg(long)]
    pub lead: Option<f64>,
    #[command(flatten)]
    pub batch: BatchArgs,
}

fn parse_scenario(s: &str) -> Result<ScenarioName, String> {
    s.parse().map_err(|e: pure_explore::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Run(a) => commands::run(a),
        Command::Bench(a) => commands::bench(a),
        Command::Scenario(a) => commands::scenario(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
