//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use invex_core::explain::SmoothingForm;
use invex_core::model::OutputLayer;
use invex_core::partition::PartitionSpec;

#[derive(Debug, Parser)]
#[command(name = "invex", version, about = "Explain classifier decisions with maximally invariant box perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score the features of one input and write a JSON map plus a CSV next to it.
    Explain(ExplainArgs),
    /// Run the quantile-masking benchmark over a dataset and write a long-format CSV.
    Evaluate(EvaluateArgs),
    /// Solve a linear program given as JSON and print the solution as JSON.
    SolveLp(SolveLpArgs),
    /// Write a seeded synthetic stroke dataset and a small MLP trained on it.
    MakeToy(MakeToyArgs),
}

/// Options shared by every attribution method.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// Upper bound on each side of the perturbation box.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Slack penalty for soft constraints; defaults to 2e-4 times the number of groups.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Require every linearized constraint to hold exactly.
    #[arg(long, conflicts_with = "soft")]
    pub hard: bool,
    /// Allow a shared penalized slack on the constraints (the default).
    #[arg(long)]
    pub soft: bool,
    /// Feature grouping: HxW patches per channel, or "none" for one group per feature.
    /// Defaults to 8x8 when the input carries a shape, otherwise "none".
    #[arg(long)]
    pub patch: Option<PartitionSpec>,
    /// Number of Gaussian noises whose linearizations are added as extra constraints.
    #[arg(long, default_value_t = 9)]
    pub smooth_n: usize,
    /// Standard deviation of those noises.
    #[arg(long, default_value_t = 0.05)]
    pub smooth_sigma: f64,
    /// How noise rows are anchored back at the input: rederived or literal.
    #[arg(long, default_value_t = SmoothingForm::Rederived)]
    pub smoothing_form: SmoothingForm,
    /// Class scores to linearize: logits or softmax.
    #[arg(long, default_value_t = OutputLayer::Logits)]
    pub output_layer: OutputLayer,
    /// Root seed; every random stage derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Value written into masked or occluded features.
    #[arg(long, default_value_t = 0.5)]
    pub mask_value: f64,
    /// SmoothGrad sample count.
    #[arg(long, default_value_t = 50)]
    pub sg_n: usize,
    /// SmoothGrad noise standard deviation.
    #[arg(long, default_value_t = 0.15)]
    pub sg_sigma: f64,
    /// Integrated-gradients Riemann steps.
    #[arg(long, default_value_t = 64)]
    pub ig_steps: usize,
    /// Integrated-gradients constant baseline value.
    #[arg(long, default_value_t = 0.5)]
    pub ig_baseline: f64,
    /// Occlusion tile HxW; defaults to the patch grouping ("none" gives single pixels).
    #[arg(long)]
    pub occlusion: Option<PartitionSpec>,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Input point as JSON (array or {values, shape}) or CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// invariant, gradient, smoothgrad, intgrad, occlusion or random.
    #[arg(long, default_value = "invariant")]
    pub method: String,
    /// JSON output path; the CSV goes next to it with a .csv extension.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub opts: MethodArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset as JSON ({inputs, shape, labels}) or CSV (one input per row).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated methods to compare.
    #[arg(long, default_value = "invariant,random", value_delimiter = ',')]
    pub method: Vec<String>,
    /// Precomputed score maps as NAME=PATH (a JSON array, one map per input).
    #[arg(long = "scores", value_name = "NAME=PATH")]
    pub scores: Vec<String>,
    /// Thresholds as START:STOP:STEP or a comma list.
    #[arg(long, default_value = "0:100:10")]
    pub tau_grid: String,
    /// CSV output path.
    #[arg(long)]
    pub output: PathBuf,
    /// Worker threads over inputs; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub opts: MethodArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveLpArgs {
    /// LinearProgram JSON.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MakeToyArgs {
    /// Directory to write model.json, train.json and test.json into.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1500)]
    pub train: usize,
    #[arg(long, default_value_t = 200)]
    pub test: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
}
