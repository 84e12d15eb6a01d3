//! `lwgan`: generate toy data, train, score ranks, bootstrap and plot.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 1 on
//! runtime errors.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lwgan_core::{DatasetKind, Mode};

mod commands;
mod config;
mod svg;

/// Error caused by how the program was invoked or configured.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "lwgan", version, about = "Latent Wasserstein GAN toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a toy manifold dataset to CSV.
    GenData(GenDataArgs),
    /// Train a model and write checkpoint.json, metrics.csv and run.json.
    Train(TrainArgs),
    /// Score every rank of a trained model and pick the dimension.
    RankScores(RankScoresArgs),
    /// Bootstrap distribution of the estimated dimension.
    Bootstrap(BootstrapArgs),
    /// Render an SVG from a run directory.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub dataset: DatasetKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training data CSV.
    #[arg(long, required_unless_present = "replay")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// TOML config file.
    #[arg(long, conflicts_with = "replay")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outer iterations `T`.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Latent width `d`.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Z-score the columns before training.
    #[arg(long)]
    pub standardize: bool,
    /// Re-run exactly from an earlier run.json.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaArg {
    Auto,
    Fixed(f64),
}

fn parse_lambda(s: &str) -> Result<LambdaArg, String> {
    if s == "auto" {
        return Ok(LambdaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaArg::Fixed(v)),
        _ => Err(format!("expected `auto` or a non-negative number, got `{s}`")),
    }
}

#[derive(Args, Debug)]
pub struct RankScoresArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Penalty weight, or `auto` for the subset procedure.
    #[arg(long, value_parser = parse_lambda, default_value = "auto")]
    pub lambda: LambdaArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML config; defaults to the run.json beside the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// rank_summary.json giving `r_hat`, `lambda` and `n`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub r_hat: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Simulated sample size per round.
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Training iterations per round.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Retrain from fresh parameters instead of the checkpoint.
    #[arg(long)]
    pub cold: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Scatter,
    Scores,
    Losses,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Output file; defaults to `<kind>.svg` in the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rank for the scatter plot; defaults to the stored estimate.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Maximum points per scatter series.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.is::<UsageError>() || matches!(e.downcast_ref::<lwgan_core::Error>(), Some(lwgan_core::Error::UnknownDataset(_)))
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::RankScores(a) => commands::rank_scores(&a),
        Command::Bootstrap(a) => commands::bootstrap(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_argument() {
        assert_eq!(parse_lambda("auto"), Ok(LambdaArg::Auto));
        assert_eq!(parse_lambda("0"), Ok(LambdaArg::Fixed(0.0)));
        assert_eq!(parse_lambda("1e9"), Ok(LambdaArg::Fixed(1e9)));
        assert!(parse_lambda("-1").is_err());
        assert!(parse_lambda("nan").is_err());
        assert!(parse_lambda("big").is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&UsageError("x".into()).into()), 2);
        let e = anyhow::Error::new(lwgan_core::Error::UnknownDataset("x".into())).context("loading");
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
