use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use salcnn::config::RunConfig;
use salcnn::train::Precision;

#[derive(Debug, Parser)]
#[command(name = "salcnn", version, about = "Bearing remaining-useful-life estimation from vibration spectrograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the STFT of every recording of one bearing as CSV and PGM.
    Preprocess(PreprocessArgs),
    /// Train one model on every bearing of a dataset.
    Train(TrainArgs),
    /// Leave-one-bearing-out evaluation.
    Evaluate(EvaluateArgs),
    /// Predict remaining life for every window of one bearing.
    Predict(PredictArgs),
    /// Export attention maps for selected recordings of one bearing.
    Heatmap(HeatmapArgs),
    /// Write the synthetic fleet to disk as acc CSV files.
    Generate(GenerateArgs),
}

/// Where bearings come from. Without either flag the configured data root
/// (or the environment default) is used.
#[derive(Debug, Args)]
pub struct Source {
    /// Directory with one sub-directory per bearing.
    #[arg(long, conflicts_with = "synthetic")]
    pub data_dir: Option<PathBuf>,
    /// Use the built-in synthetic fleet.
    #[arg(long)]
    pub synthetic: bool,
}

/// Command-line overrides; these win over the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub lstm_hidden: Option<usize>,
    #[arg(long)]
    pub lstm_layers: Option<usize>,
    #[arg(long)]
    pub conv_depth: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub synthetic_life_n: Option<usize>,
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => Err(format!("expected f32 or f64, got `{s}`")),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Copy>(dst: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *dst = v;
            }
        }
        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.learning_rate, self.learning_rate);
        set(&mut cfg.train.seed, self.seed);
        set(&mut cfg.train.precision, self.precision);
        set(&mut cfg.model.lstm_hidden, self.lstm_hidden);
        set(&mut cfg.model.lstm_layers, self.lstm_layers);
        set(&mut cfg.model.conv_depth, self.conv_depth);
        set(&mut cfg.model.dropout, self.dropout);
        set(&mut cfg.model.sequence_window, self.window);
        set(&mut cfg.data.stride, self.stride);
        set(&mut cfg.data.synthetic_life_n, self.synthetic_life_n);
        set(&mut cfg.data.synthetic_seed, self.synthetic_seed);
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset root holding the bearing directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Bearing directory name under the data root.
    #[arg(long)]
    pub bearing: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; the loss history and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Replace the network with one that returns the true labels.
    #[arg(long, hide = true)]
    pub perfect_predictor: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bearing_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// STFT settings, and a model section the checkpoint must match.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bearing_dir: PathBuf,
    /// Comma-separated recording indices (0-based), or `early`, `mid`, `late`.
    #[arg(long, default_value = "early,mid,late")]
    pub indices: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub synthetic_life_n: Option<usize>,
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
}
