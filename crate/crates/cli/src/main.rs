mod example;
mod experiment;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "trwmap",
    version,
    about = "MAP estimation with tree-reweighted max-product"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model stored as JSON.
    Solve(SolveArgs),
    /// Run a built-in worked example and check its known outcomes.
    Example(ExampleArgs),
    /// Compare edge-based and tree-based updates on random Ising grids.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Exhaustive search.
    Brute,
    /// Ordinary max-product (message passing with every rho_e = 1).
    Maxprod,
    /// Edge-based reparameterization updates.
    TrwEdge,
    /// Reweighted message passing.
    TrwMsg,
    /// Tree-based updates.
    TrwTree,
    /// Local polytope relaxation by simplex.
    Lp,
}

#[derive(Args)]
pub struct IterationArgs {
    /// Weight on the new iterate.
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Convergence tolerance on log changes.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long = "max-iters", default_value_t = 10_000)]
    pub max_iters: usize,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Model document.
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Multiply every edge table by this factor before solving.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// `uniform` (all spanning trees, equal weight) or a tree / rho document.
    #[arg(long, default_value = "uniform")]
    pub rho: String,
    /// Tree distribution document; overrides --rho.
    #[arg(long)]
    pub trees: Option<PathBuf>,
    #[command(flatten)]
    pub iteration: IterationArgs,
    /// Root node for dual extraction.
    #[arg(long, default_value_t = 0)]
    pub root: usize,
    /// Compare the result with exhaustive search.
    #[arg(long = "verify-oracle")]
    pub verify_oracle: bool,
    /// Write a JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    Cycle4,
    Triangle,
    Diamond,
    #[value(name = "fig2", alias = "three-trees")]
    ThreeTrees,
}

#[derive(Args)]
pub struct ExampleArgs {
    #[arg(value_enum)]
    pub name: ExampleName,
    /// Coupling of the triangle example.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    Attractive,
    Mixed,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub cols: usize,
    #[arg(long, value_enum, default_value_t = Regime::Attractive)]
    pub regime: Regime,
    /// Comma-separated coupling strengths; defaults to 0.2, 0.4, ..., 2.0.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long = "max-iters", default_value_t = 5_000)]
    pub max_iters: usize,
    /// Check certificates by exhaustive search. On by default for grids of
    /// at most 16 nodes.
    #[arg(long = "verify-oracle")]
    pub verify_oracle: bool,
    /// CSV destination; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command ended, short of an error.
pub enum Status {
    Ok,
    NoCertificate,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Solve(args) => solve::run(&args),
        Command::Example(args) => Ok(example::run(&args)),
        Command::Experiment(args) => experiment::run(&args),
    };
    match status {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NoCertificate) => ExitCode::from(2),
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
