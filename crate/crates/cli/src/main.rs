use std::path::PathBuf;
use std::process::ExitCode;

use bernstein_copula::fit::{FitMethod, RankScale};
use bernstein_copula::sim::CopulaKind;
use bernstein_copula::DensityKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::CliError;

/// Fit, sample and compare grid-type and Bernstein copulas.
#[derive(Debug, Parser)]
#[command(name = "bcopula", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a uniform-margin joint table from raw observations.
    Fit(FitArgs),
    /// Evaluate a copula density on a grid and draw a contour plot.
    Density(DensityArgs),
    /// Draw points from a copula.
    Sample(SampleArgs),
    /// Compare probable maximum losses across dependence scenarios.
    Compare(CompareArgs),
    /// Run the loss comparison for a single scenario.
    Simulate(SimulateArgs),
    /// Check partition-of-unity families and joint tables.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Closed,
    Qp,
}

impl From<Method> for FitMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Closed => FitMethod::ClosedForm,
            Method::Qp => FitMethod::Qp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Ranks {
    #[value(name = "n")]
    N,
    #[value(name = "n+1")]
    NPlusOne,
}

impl From<Ranks> for RankScale {
    fn from(r: Ranks) -> Self {
        match r {
            Ranks::N => RankScale::N,
            Ranks::NPlusOne => RankScale::NPlusOne,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Bernstein,
    Grid,
    Independence,
    Gaussian,
}

impl From<Kind> for CopulaKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bernstein => CopulaKind::Bernstein,
            Kind::Grid => CopulaKind::Grid,
            Kind::Independence => CopulaKind::Independence,
            Kind::Gaussian => CopulaKind::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DensityChoice {
    Bernstein,
    Grid,
}

impl From<DensityChoice> for DensityKind {
    fn from(k: DensityChoice) -> Self {
        match k {
            DensityChoice::Bernstein => DensityKind::Bernstein,
            DensityChoice::Grid => DensityKind::Grid,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV of observations, one row per period and one column per risk.
    pub data: PathBuf,
    /// Cells per axis: one size for every axis or one per axis.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub grid: Vec<usize>,
    #[arg(long, value_enum, default_value = "closed")]
    pub method: Method,
    /// Denominator turning ranks into relative ranks.
    #[arg(long, value_enum, default_value = "n")]
    pub ranks: Ranks,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Joint table CSV (two variables).
    pub joint: PathBuf,
    #[arg(long, value_enum, default_value = "bernstein")]
    pub kind: DensityChoice,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    /// Observations whose relative ranks are drawn over the contours.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "n")]
    pub ranks: Ranks,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Joint table CSV, required for the bernstein and grid kinds.
    pub joint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bernstein")]
    pub kind: Kind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension for the independence kind when no joint is given.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Observations for estimating the gaussian correlation.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Correlation of a two-variable gaussian copula.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "data")]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value = "n")]
    pub ranks: Ranks,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// JSON comparison file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the sample size of the file.
    #[arg(long)]
    pub n: Option<usize>,
    /// Overrides the base seed of the file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub compare: CompareArgs,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Grid sizes for fitting the joint from the data file of the config.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Joint table CSV used instead of fitting.
    #[arg(long, conflicts_with = "grid")]
    pub joint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Joint table CSVs to check.
    pub joints: Vec<PathBuf>,
    /// Grid sizes for the partition-of-unity checks.
    #[arg(long, value_delimiter = ',', default_value = "1,4,10")]
    pub grid: Vec<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Density(a) => commands::density(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Compare(a) => commands::compare(&a, None),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 3,
            CliError::Library(bernstein_copula::Error::Numeric(_)) => 4,
            CliError::Library(_) | CliError::Write { .. } => 3,
        }
    }
}
