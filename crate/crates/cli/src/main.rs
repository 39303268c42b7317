//! Batch front end: ranking, ranking comparison, top-n evaluation, synthetic
//! data generation and the attention-difference experiment.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sanrank_core::baselines::MaxFeatures;
use sanrank_core::importance::Method;
use sanrank_core::tabular::TargetColumn;

#[derive(Parser)]
#[command(
    name = "sanrank",
    version,
    about = "Attention-based feature ranking toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the features of a CSV dataset with one method.
    Rank(RankArgs),
    /// Compare ranking files pairwise (FUJI curves + similarity matrix), or
    /// average per-dataset similarity matrices via a manifest.
    Compare(CompareArgs),
    /// Top-n classification sweeps for several methods under shared folds.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic binary dataset with a known relevance mask.
    Synth(SynthArgs),
    /// Train/test attention aggregation on synthetic data (per-class means).
    AttnDiff(AttnDiffArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_max_features(s: &str) -> Result<MaxFeatures, String> {
    if s == "sqrt" {
        Ok(MaxFeatures::Sqrt)
    } else {
        s.parse::<usize>()
            .map(MaxFeatures::Fixed)
            .map_err(|_| format!("expected `sqrt` or an integer, got {s:?}"))
    }
}

/// `all` or an explicit reference-instance count.
#[derive(Clone, Copy)]
struct SampleSize(Option<usize>);

impl std::str::FromStr for SampleSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            Ok(SampleSize(None))
        } else {
            s.parse::<usize>()
                .map(|n| SampleSize(Some(n)))
                .map_err(|_| format!("expected `all` or an integer, got {s:?}"))
        }
    }
}

/// Hyperparameters shared by every command that trains an attention model.
#[derive(Args, Clone)]
struct SanArgs {
    #[arg(long, default_value_t = 128, help = "Hidden layer width")]
    hidden_dim: usize,
    #[arg(long, default_value_t = 32)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.2, help = "Dropout rate on the hidden layer")]
    dropout: f64,
    #[arg(long, default_value_t = 1, help = "Number of attention heads")]
    heads: usize,
}

/// Parameters for the classical baseline rankers.
#[derive(Args, Clone)]
struct BaselineArgs {
    #[arg(long, default_value_t = 10, help = "ReliefF neighbor count")]
    neighbors: usize,
    #[arg(
        long,
        default_value = "all",
        help = "ReliefF reference instances: `all` or a count"
    )]
    sample_size: SampleSize,
    #[arg(long, default_value_t = 10, help = "Mutual-information bins")]
    bins: usize,
    #[arg(long, default_value_t = 100, help = "Forest size")]
    trees: usize,
    #[arg(
        long,
        default_value = "sqrt",
        value_parser = parse_max_features,
        help = "Candidate features per split: `sqrt` or a count"
    )]
    max_features: MaxFeatures,
    #[arg(long, default_value_t = 1, help = "Minimum leaf size")]
    min_leaf: usize,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, help = "Target column name (or 0-based index)")]
    target: TargetColumn,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(
        long,
        help = "Output ranking CSV; a .meta.json sidecar is written next to it"
    )]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, help = "Skip standardization before fitting")]
    no_standardize: bool,
    #[command(flatten)]
    san: SanArgs,
    #[command(flatten)]
    baseline: BaselineArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(
        long,
        num_args = 2..,
        required_unless_present = "matrix_manifest",
        conflicts_with = "matrix_manifest",
        help = "Two or more ranking CSVs over the same feature set"
    )]
    rankings: Vec<PathBuf>,
    #[arg(
        long,
        help = "File listing similarity-matrix CSVs (one path per line); emits their mean"
    )]
    matrix_manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        help = "Cutoff grid, e.g. 1,2,5,10 (default: dense+log)"
    )]
    grid: Option<Vec<usize>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: TargetColumn,
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_method,
        help = "Methods to sweep (default: all seven)"
    )]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(
        long,
        value_delimiter = ',',
        help = "Top-n cutoffs (default: dense+log)"
    )]
    cutoffs: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    no_standardize: bool,
    #[command(flatten)]
    san: SanArgs,
    #[command(flatten)]
    baseline: BaselineArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    features: usize,
    #[arg(long, default_value_t = 50)]
    informative: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(
        long,
        help = "Dataset CSV path; the mask lands next to it as *.mask.csv"
    )]
    out: PathBuf,
}

#[derive(Args)]
struct AttnDiffArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    features: usize,
    #[arg(long, default_value_t = 50)]
    informative: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, help = "Report JSON path; a plottable *.csv lands next to it")]
    out: PathBuf,
    #[command(flatten)]
    san: SanArgs,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rank(args) => commands::rank(args),
        Command::Compare(args) => commands::compare(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Synth(args) => commands::synth(args),
        Command::AttnDiff(args) => commands::attn_diff(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
