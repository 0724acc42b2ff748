use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qfilter_core::io::RecordFormat;
use qfilter_core::Scheme;

#[derive(Debug, Parser)]
#[command(name = "qfilter", version, about = "Quantum filtering for open systems driven by Gaussian boson fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file stage by stage and print a report.
    Validate(CommonArgs),
    /// Simulate one measurement record and its conditional state.
    Simulate(RunArgs),
    /// Average many trajectories and compare with the master equation.
    Ensemble(RunArgs),
    /// Solve the master equation on the time grid.
    Master(RunArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Model file (TOML).
    #[arg(long, short)]
    pub model: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Time step (default: model file, else 1e-3).
    #[arg(long, value_parser = positive_f64)]
    pub dt: Option<f64>,
    /// Horizon T (default: model file).
    #[arg(long, value_parser = positive_f64)]
    pub tmax: Option<f64>,
    /// Number of trajectories for `ensemble` (default: model file, else 1000).
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Base random seed (default: model file, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: RecordFormat,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',', value_parser = non_negative_f64)]
    pub snapshots: Option<Vec<f64>>,
    /// Integration scheme: positive-map or euler-maruyama.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a positive finite number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a non-negative finite number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_format(s: &str) -> Result<RecordFormat, String> {
    s.parse().map_err(|e: qfilter_core::io::RecordError| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: qfilter_core::Error| e.to_string())
}
