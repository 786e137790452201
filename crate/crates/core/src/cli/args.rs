use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Multi-instance partial-label learning with calibrated disambiguation.
#[derive(Debug, Parser)]
#[command(name = "mipl-cdl", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Split a dataset, train a model and evaluate it on the held-out bags.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run the randomized lower-bound sweep.
    Theorem(TheoremArgs),
    /// Paired-seed comparison of two training configs.
    Compare(CompareArgs),
    /// Re-run a command from its manifest and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// TOML config; the `[data]` section is used. Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data seed, overriding `data.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Run seed, overriding `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    /// TOML config; the `[theorem]` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sweep seed, overriding `theorem.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Exactly two configs: arm A then arm B.
    #[arg(long, num_args = 1, required = true)]
    pub config: Vec<PathBuf>,
    /// Dataset file; generated from the shared `[data]` section when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Base run seed shared by both arms; defaults to arm A's `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier command.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}
