mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

const CONFIG_KEYS: &str = "\
Config file: flat TOML, every key optional. Flags override file values.
Defaults marked [published] follow the original method; [chosen] are ours.

  version = 1                 schema version [chosen]
  seed = 42                   root of all randomness [chosen]
  t0 = 190                    encoder length, readings [published]
  tau = 12                    forecast length, readings (60 min) [published]
  enc_hidden = 120            encoder hidden size per direction [published]
  dec_hidden = 30             decoder hidden size [published]
  embed_dim = 5               patient embedding size [published]
  attn_heads = 4              attention heads [chosen]
  attn_hidden = 64            attention projection size [chosen]
  head_hidden = 60            output MLP hidden size [chosen]
  use_attention = true        [published]
  use_embedding = true        [published]
  use_time_features = true    [published]
  cadence_secs = 300          nominal sampling interval [published]
  gap_tolerance_secs = 60     allowed cadence deviation [chosen]
  beta = 0.9                  fraction of each batch kept by the trimmed loss [published]
  clip_init = 2.0             initial gradient clip value [published]
  clip_decay = 0.99           clip decay per epoch [published]
  learning_rate = 0.001       [chosen]
  adam_beta1 = 0.9            [chosen]
  adam_beta2 = 0.999          [chosen]
  adam_epsilon = 1e-8         [chosen]
  rectified = true            rectified-variance Adam [published]
  batch_size = 128            [chosen]
  max_epochs = 100            [chosen]
  patience = 10               early-stopping patience, epochs [chosen]
  teacher_forcing_start = 0.0 teacher forcing probability at epoch 0 [chosen]
  teacher_forcing_end = 0.0   probability after the schedule [chosen]
  teacher_forcing_epochs = 0  length of the linear schedule [chosen]
  train_stride = 1            step between training windows [chosen]
  ar_order = 10               AR-I baseline order [chosen]
  ar_differencing = 1         AR-I differencing order [chosen]
  horizons = [3, 6, 9, 12]    evaluated horizons, readings (15/30/45/60 min) [published]

Exit codes: 0 success, 1 runtime or data failure, 2 usage or config error.";

#[derive(Parser)]
#[command(
    name = "glucast",
    version,
    about = "Personalized blood-glucose trajectory forecasting"
)]
#[command(after_long_help = CONFIG_KEYS)]
struct Cli {
    /// Log verbosity (overridden by RUST_LOG).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic CGM data set as CSV.
    Generate(GenerateArgs),
    /// Per-patient autocorrelation with white-noise bands.
    AnalyzeAcf(AcfArgs),
    /// Train the forecaster and write a model file.
    #[command(after_long_help = CONFIG_KEYS)]
    Train(TrainArgs),
    /// Score a model on the test split of a data set.
    Evaluate(EvaluateArgs),
    /// Train and score every method on identical splits.
    #[command(after_long_help = CONFIG_KEYS)]
    Compare(CompareArgs),
    /// Forecast one patient from the readings up to a timestamp.
    Forecast(ForecastArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Number of patients.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub patients: u64,
    /// Days per patient (288 readings per day).
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub days: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Expected fraction of readings disturbed by an artifact excursion.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_rate: f64,
    /// Standard deviation of the sensor noise, mg/dl.
    #[arg(long, default_value_t = 4.0)]
    pub noise_std: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AcfArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Largest lag, readings.
    #[arg(long, default_value_t = 300)]
    pub max_lag: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by the commands that train.
#[derive(Args, Clone, Default)]
pub struct Overrides {
    /// Config file (see the key list below).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of each batch kept by the trimmed loss; 1.0 is plain MSE.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub train_stride: Option<usize>,
    #[arg(long)]
    pub no_attention: bool,
    #[arg(long)]
    pub no_embedding: bool,
    #[arg(long)]
    pub no_time_features: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Horizons in readings; each must be at most the model's tau.
    #[arg(long, value_delimiter = ',', default_value = "3,6,9,12")]
    pub horizons: Vec<usize>,
    /// Long-format metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Score patients the model has not seen with the mean embedding.
    #[arg(long)]
    pub cold_start: bool,
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Long-format metrics CSV for all methods.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub patient: String,
    /// Forecast anchor; readings after it are ignored (RFC 3339 or
    /// `YYYY-MM-DD HH:MM:SS`, UTC).
    #[arg(long)]
    pub at: String,
    /// Use the mean embedding for a patient the model has not seen.
    #[arg(long)]
    pub cold_start: bool,
    /// Forecast CSV; attention weights go next to it. Prints to stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::AnalyzeAcf(a) => commands::analyze_acf(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Forecast(a) => commands::forecast(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
