use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rangeseg", version, about = "Range-image LiDAR segmentation pipeline tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled scan from a scene file.
    Synth(SynthArgs),
    /// Project a scan into range-image channel dumps and a sidecar.
    Project(ProjectArgs),
    /// Estimate normals from projected dumps; optionally build the input tensor.
    Normals(NormalsArgs),
    /// Turn pixel predictions into per-point labels.
    Postprocess(PostprocessArgs),
    /// Confusion matrix, per-class IoU and mIoU of per-point labels.
    Eval(EvalArgs),
    /// Pixel multiplicity and occlusion counts of a sidecar.
    OcclusionStats(OcclusionArgs),
    /// Time projection, post-processing and evaluation.
    Bench(BenchArgs),
    /// Render a channel dump or pixel label image to PPM.
    Render(RenderArgs),
    /// Run the seeded differential checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProjectionArgs {
    /// Image rows.
    #[arg(long = "h", default_value_t = 64)]
    pub height: usize,
    /// Image columns.
    #[arg(long = "w", default_value_t = 2048)]
    pub width: usize,
    /// Degrees above the horizon.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub fov_up: f64,
    /// Degrees below the horizon.
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    pub fov_down: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Copy,
    Nla,
    Knn,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "nla")]
    pub method: MethodArg,
    /// Odd patch or window size.
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    /// Neighbours voting in knn.
    #[arg(long = "knn-k", default_value_t = 5)]
    pub knn_k: usize,
    /// Range cutoff in meters for knn.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f32,
    /// Gaussian width in pixels for knn.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f32,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene file (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes PREFIX.bin and PREFIX.label.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub scan: PathBuf,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    /// Per-point labels; writes PREFIX.pixel.label with each pixel owner's label.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Writes PREFIX.{x,y,z,range,remission}.raw and PREFIX.proj.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    #[value(name = "5")]
    Five,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Args)]
pub struct NormalsArgs {
    /// Prefix written by `project`.
    #[arg(long)]
    pub image: PathBuf,
    /// Writes PREFIX.{n1,n2,n3}.raw.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the standardized input tensor to this file.
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "8")]
    pub channels: Layout,
    /// `channel mean std` lines; defaults to the bundled synthetic stats.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Prefix written by `project`.
    #[arg(long)]
    pub image: PathBuf,
    /// Pixel label image (H*W words, .label layout).
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Per-point labels, .label layout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// `raw train` table applied to both label files.
    #[arg(long)]
    pub remap: Option<PathBuf>,
    #[arg(long, default_value_t = rangeseg_core::NUM_CLASSES)]
    pub num_classes: usize,
    #[arg(long, default_value_t = rangeseg_core::IGNORE_ID)]
    pub ignore: u16,
    /// Also write per-class IoU as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Sidecar of the scan; adds accuracy on occluded points.
    #[arg(long)]
    pub proj: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OcclusionArgs {
    #[arg(long)]
    pub proj: PathBuf,
    /// Per-point labels for the cross-class count.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scan to time; needs --pred. Without it a synthetic scene is used.
    #[arg(long, requires = "pred")]
    pub scan: Option<PathBuf>,
    /// Pixel predictions for --scan.
    #[arg(long, requires = "scan")]
    pub pred: Option<PathBuf>,
    /// Per-point ground truth for the mIoU column.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Scene file for the synthetic input; defaults to the pole-and-wall scene.
    #[arg(long, conflicts_with = "scan")]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Run copy, nla and a grid of knn settings instead of one method.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = rangeseg_core::NUM_CLASSES)]
    pub num_classes: usize,
    #[arg(long, default_value_t = rangeseg_core::IGNORE_ID)]
    pub ignore: u16,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Channel dump (.raw).
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    pub channel: Option<PathBuf>,
    /// Pixel label image; needs --h and --w.
    #[arg(long, requires_all = ["height", "width"])]
    pub labels: Option<PathBuf>,
    #[arg(long = "h")]
    pub height: Option<usize>,
    #[arg(long = "w")]
    pub width: Option<usize>,
    /// `class r g b` lines; defaults to the bundled SemanticKITTI palette.
    #[arg(long)]
    pub colors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random scans per differential check.
    #[arg(long, default_value_t = 100)]
    pub scans: usize,
}
