use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::error::CliResult;

/// Two-stage hierarchical multilabel classifier: parent codes first, then
/// child codes conditioned on the document and the parent probabilities.
#[derive(Debug, Parser)]
#[command(name = "twostage", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Flags override the config file, which
/// overrides built-in defaults.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file for the command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic hierarchical corpus (train/dev/test JSON lines).
    Synth(SynthArgs),
    /// Train a model and write the best checkpoint, log and manifest.
    Train(TrainArgs),
    /// Score a labeled split and report metrics.
    Evaluate(EvaluateArgs),
    /// Predict child codes for unlabeled or labeled documents.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub num_documents: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThresholdPolicyArg {
    Fixed,
    DevTuned,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory holding train.jsonl and dev.jsonl.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_per_direction: Option<usize>,
    #[arg(long)]
    pub max_sequence_length: Option<usize>,
    #[arg(long, value_enum)]
    pub threshold_policy: Option<ThresholdPolicyArg>,
    #[arg(long)]
    pub min_frequency: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Stop child-loss gradients at the parent probabilities.
    #[arg(long)]
    pub detach_parent_probs: bool,
    /// Single-stage ablation: no parent loss and no parent-attention term.
    #[arg(long)]
    pub flat: bool,
    /// Word vectors (`token v1 … v_d` per line) for the token embeddings.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    /// Child-code universe, one code per line. Defaults to the synthetic
    /// manifest when present, otherwise the codes seen in train.jsonl.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MacroModeArg {
    /// Labels with gold positives or predictions.
    Active,
    /// Every label in the universe.
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled JSON-lines split.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub parent_threshold: Option<f64>,
    #[arg(long)]
    pub child_threshold: Option<f64>,
    /// Add parent-level metrics.
    #[arg(long)]
    pub parents: bool,
    /// Add per-frequency-group micro-F1.
    #[arg(long)]
    pub groups: bool,
    /// Print the fixed-width table instead of JSON.
    #[arg(long)]
    pub table: bool,
    #[arg(long = "macro", value_enum)]
    pub macro_mode: Option<MacroModeArg>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON-lines documents; `labels` may be omitted.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub parent_threshold: Option<f64>,
    #[arg(long)]
    pub child_threshold: Option<f64>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(args) => commands::synth(&args),
        Command::Train(args) => commands::train(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Predict(args) => commands::predict(&args),
    }
}
