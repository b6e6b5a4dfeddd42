use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rfphate", version, about = "Supervised manifold embeddings from random-forest proximities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest, embed its proximities and write the coordinates.
    Embed(EmbedArgs),
    /// Score an existing embedding by k-NN cross-validated variable prediction.
    Evaluate(EvaluateArgs),
    /// Score the embedding over a grid of mtry and t values.
    Sweep(SweepArgs),
    /// Append Gaussian noise columns and score the original variables.
    Noise(NoiseArgs),
    /// Rank variables by permutation importance.
    Importance(ImportanceArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub label: String,
    /// How to read the response column.
    #[arg(long, value_enum, default_value_t = TaskArg::Auto)]
    pub task: TaskArg,
    /// What to do with missing feature values.
    #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
    pub missing: MissingArg,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    /// Number of trees. The Titanic example used 5000.
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Candidate features per split: auto (√p, or p/3 for regression),
    /// sqrt-n (√ of the observation count) or an integer.
    #[arg(long, default_value = "auto")]
    pub mtry: MtryArg,
    /// Minimum node size [default: 1 for classification, 5 for regression].
    #[arg(long)]
    pub min_node_size: Option<usize>,
    /// Master seed.
    #[arg(long, env = "RFPHATE_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DiffusionArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Diffusion time: auto (entropy knee) or an integer.
    #[arg(long, default_value = "auto")]
    pub t: TArg,
    /// Largest t scanned by the entropy knee.
    #[arg(long, default_value_t = 100)]
    pub t_max: usize,
    /// Potential transform of the diffused operator.
    #[arg(long, value_enum, default_value_t = TransformArg::Log)]
    pub transform: TransformArg,
    /// Floor applied before the log transform.
    #[arg(long, default_value_t = 1e-12)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Scale of continuous targets.
    #[arg(long, value_enum, default_value_t = ScaleArg::Standardized)]
    pub target_scale: ScaleArg,
    /// Stratify folds by class for categorical targets.
    #[arg(long)]
    pub stratified: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub diffusion: DiffusionArgs,
    /// Embedding CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// SVG scatter plot of the first two dimensions.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Variable used to colour the plot and appended to the CSV [default: the label].
    #[arg(long)]
    pub color_by: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Embedding CSV aligned row for row with the processed data.
    #[arg(long)]
    pub embedding: PathBuf,
    /// Comma-separated variables to score [default: all].
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    #[command(flatten)]
    pub score: ScoreArgs,
    /// Master seed; folds use a seed derived from it.
    #[arg(long, env = "RFPHATE_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Report CSV to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub diffusion: DiffusionArgs,
    /// Comma-separated mtry values [default: the resolved mtry ± 2].
    #[arg(long, value_delimiter = ',')]
    pub mtry_values: Vec<usize>,
    /// Comma-separated t values [default: the selected t ± 2].
    #[arg(long, value_delimiter = ',')]
    pub t_values: Vec<usize>,
    /// Variable to score [default: the most important one].
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Standardized)]
    pub target_scale: ScaleArg,
    /// Grid CSV to write (mtry, t, score).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub diffusion: DiffusionArgs,
    /// Number of noise columns.
    #[arg(long, default_value_t = 1000)]
    pub q: usize,
    /// Independent repeats.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = ScaleArg::Standardized)]
    pub target_scale: ScaleArg,
    /// Summary CSV to write (mean and sd across repeats).
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Ranked importance CSV to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Auto,
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissingArg {
    /// Drop rows with any missing feature.
    Drop,
    /// Missing categories become `none`, missing numbers 0.
    Impute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Standardized,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtryArg {
    Auto,
    SqrtN,
    Fixed(usize),
}

impl FromStr for MtryArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(MtryArg::Auto),
            "sqrt-n" => Ok(MtryArg::SqrtN),
            _ => s
                .parse()
                .map(MtryArg::Fixed)
                .map_err(|_| format!("expected auto, sqrt-n or an integer, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TArg {
    Auto,
    Fixed(usize),
}

impl FromStr for TArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(TArg::Auto);
        }
        s.parse()
            .map(TArg::Fixed)
            .map_err(|_| format!("expected auto or an integer, got `{s}`"))
    }
}
