use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compandor::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "compandor",
    version,
    about = "Spline companding quantizers for a Gaussian source"
)]
pub struct Cli {
    /// key=value file supplying defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one quantizer and report its distortion.
    Design(DesignArgs),
    /// Recompute the spline parameter and SQNR tables.
    Tables(TablesArgs),
    /// Emit curve data for plotting.
    Figure(FigureArgs),
    /// Simulate the quantizer and compare with the analytic SQNR.
    Montecarlo(MonteCarloArgs),
    /// Evaluate every combination of level counts and models.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DesignFlags {
    /// Total number of reproduction levels.
    #[arg(short = 'n', long)]
    pub levels: Option<usize>,
    /// linear, quadratic or optimal.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Equal-width segments on [0, x_max].
    #[arg(long)]
    pub segments: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub design: DesignFlags,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write the fitted model as JSON.
    #[arg(long, value_name = "PATH")]
    pub dump_model: Option<PathBuf>,
    /// Also write the codebook as JSON.
    #[arg(long, value_name = "PATH")]
    pub dump_codebook: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// 1: first-degree spline, 2: quadratic spline, 3: SQNR.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: u8,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// 1: compressor curves, 2: SQNR against bits.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub which: u8,
    /// Points on [0, x_max] for figure 1.
    #[arg(long, default_value_t = 1001)]
    pub samples: usize,
    /// Level count for figure 1.
    #[arg(short = 'n', long)]
    pub levels: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub design: DesignFlags,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shards: Option<u32>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated level counts.
    #[arg(short = 'n', long, value_delimiter = ',')]
    pub levels: Vec<usize>,
    /// Comma-separated models.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelKind>>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
