use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmgesture_core::heatmap::HeatmapKind;

#[derive(Debug, Parser)]
#[command(name = "mmgesture", version, about = "Multimodal micro-gesture recognition pipeline")]
pub struct Cli {
    /// Directory that relative paths are resolved against.
    #[arg(long, global = true)]
    pub root: Option<PathBuf>,

    /// Run configuration JSON; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render joint or limb heatmap volumes from skeleton files.
    PreprocessHeatmaps(HeatmapArgs),
    /// Convert videos into Taylor videos.
    PreprocessTaylor(TaylorArgs),
    /// Fit a classifier on pooled features of one modality.
    Train(TrainArgs),
    /// Write class probabilities for one split.
    Predict(PredictArgs),
    /// Combine probability files by averaging or fixed weights.
    Fuse(FuseArgs),
    /// Choose fusion weights by validation top-1.
    SearchWeights(SearchArgs),
    /// Report top-1 accuracy of a probability file.
    Evaluate(EvaluateArgs),
    /// Run every stage from preprocessing to test evaluation.
    Pipeline(PipelineArgs),
    /// Write a small synthetic dataset with videos, skeletons and a manifest.
    SynthDataset(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Joint,
    Limb,
}

impl From<Kind> for HeatmapKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Joint => HeatmapKind::Joint,
            Kind::Limb => HeatmapKind::Limb,
        }
    }
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest modality holding the skeleton files.
    #[arg(long, default_value = "skeleton")]
    pub source: String,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest modality holding the input videos.
    #[arg(long, default_value = "rgb")]
    pub source: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub modality: String,
    /// Directory of `<id>.<modality>.rvid` files; otherwise the manifest's paths are used.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Initialize from this model instead of the seeded random start.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Training report path (default: next to the model).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Train a second branch jointly on the summed loss.
    #[arg(long, requires = "pair_model", conflicts_with = "warm_start")]
    pub pair_modality: Option<String>,
    #[arg(long)]
    pub pair_features: Option<PathBuf>,
    #[arg(long, requires = "pair_modality")]
    pub pair_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub modality: String,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// `name=path` pair naming a probability file.
#[derive(Debug, Clone)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

fn parse_named_path(s: &str) -> Result<NamedPath, String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(NamedPath {
            name: name.to_string(),
            path: PathBuf::from(path),
        }),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Probability files as NAME=PATH.
    #[arg(long = "probs", required = true, value_parser = parse_named_path)]
    pub probs: Vec<NamedPath>,
    /// `uniform` or a weights JSON file.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long = "probs", required = true, value_parser = parse_named_path)]
    pub probs: Vec<NamedPath>,
    /// Manifest providing the labels.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Weights JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Validation report path (default: next to the weights).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict the labels to one split.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub per_class: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long, default_value_t = 24)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
