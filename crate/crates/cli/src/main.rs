mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

/// Simulate, fit, train, evaluate and inspect temporal point process models
/// of sparse events in dense frame streams.
#[derive(Debug, Parser)]
#[command(name = "tpm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic or classical-process dataset (JSONL plus header).
    Simulate(SimulateArgs),
    /// Fit a classical point process or a Markov chain baseline.
    Fit(FitArgs),
    /// Train a TPM or the regression baseline.
    Train(TrainArgs),
    /// Teacher-forced evaluation of a model, baseline or the oracle.
    Evaluate(EvaluateArgs),
    /// Export per-transition predicted time densities for plotting.
    ExportArrivalPattern(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON, tagged by "source"). Defaults to the bundled
    /// quickstart synthetic config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output dataset path; the header goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_sequences: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Poisson,
    Hawkes,
    SelfCorrecting,
    Markov,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub model: FitModel,
    /// Markov chain order.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub max_frames: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Regression,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training config (JSON); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Intensity head, A or B.
    #[arg(long)]
    pub head: Option<String>,
    /// Train a baseline instead of a TPM.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path; defaults to `<out>.log.json`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TPM or regression checkpoint.
    #[arg(long, conflicts_with_all = ["fit", "oracle"])]
    pub checkpoint: Option<PathBuf>,
    /// Output of `fit`; give once for a classical model and once for a
    /// Markov table to combine them.
    #[arg(long)]
    pub fit: Vec<PathBuf>,
    /// Score the ground truth itself.
    #[arg(long, conflicts_with = "fit")]
    pub oracle: bool,
    /// Cap on the Markov context length; defaults to the table order.
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    /// Report name; defaults to the model kind.
    #[arg(long)]
    pub name: Option<String>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV report path; defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write one JSON line per transition.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Points per transition grid.
    #[arg(long, default_value_t = 501)]
    pub points: usize,
    /// The grid spans this many predicted intervals.
    #[arg(long, default_value_t = 5.0)]
    pub span_factor: f64,
    #[arg(long)]
    pub max_frames: Option<usize>,
    /// Output path; `.csv` selects long-format CSV, anything else JSON.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::ExportArrivalPattern(a) => commands::export_arrival_pattern(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
