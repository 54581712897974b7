//! Command-line definitions. Every subcommand's arguments are also its
//! replayable record, so they derive `Serialize`/`Deserialize`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "radisynth", version, about = "Synthetic X-ray inspection pipeline")]
pub struct Cli {
    /// Workspace root directory.
    #[arg(long, env = "RADISYNTH_WORKSPACE", default_value = "radisynth-workspace", global = true)]
    pub workspace: PathBuf,

    /// Run seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,

    /// Worker threads for rendering and inference (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON or TOML file with flag values; flags given on the command line
    /// take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command", content = "args")]
pub enum Command {
    /// Generate a pore plate specimen.
    GenPlate(GenPlateArgs),
    /// Generate a layered laminate specimen.
    GenFml(GenFmlArgs),
    /// Render radiographs of a specimen.
    Simulate(SimulateArgs),
    /// Filtered back projection of a rotation series.
    Recon(ReconArgs),
    /// Draw labeled training segments from a radiograph.
    ExtractSegments(ExtractSegmentsArgs),
    /// Train the pixel classifier.
    TrainCnn(TrainCnnArgs),
    /// Apply a pixel classifier to a radiograph.
    Classify(ClassifyArgs),
    /// Threshold a feature map and cluster the marked pixels.
    Cluster(ClusterArgs),
    /// Fit ellipses to clusters and write the pore table.
    Fit(FitArgs),
    /// Pixel TP/FN/FP rates of a feature map against ground truth.
    Eval(EvalArgs),
    /// Threshold, cluster, fit and evaluate a feature map in one step.
    Report(ReportArgs),
    /// Extract averaged depth profiles from a volume.
    Zslice(ZsliceArgs),
    /// Train the profile autoencoder on baseline profiles.
    TrainAe(TrainAeArgs),
    /// Score a volume's depth profiles with an autoencoder.
    Anomaly(AnomalyArgs),
    /// Generate a layered volume with a stretched damage region.
    SynthVolume(SynthVolumeArgs),
    /// Train the supervised profile classifier.
    TrainZcnn(TrainZcnnArgs),
    /// Two-plate pore detection experiment, end to end.
    #[command(name = "experiment-71")]
    #[serde(rename = "experiment-71")]
    Experiment71(ExperimentArgs),
    /// Check files, hashes and provenance links of the workspace.
    Verify(VerifyArgs),
    /// Re-execute a recorded run and compare its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenPlate(_) => "gen-plate",
            Command::GenFml(_) => "gen-fml",
            Command::Simulate(_) => "simulate",
            Command::Recon(_) => "recon",
            Command::ExtractSegments(_) => "extract-segments",
            Command::TrainCnn(_) => "train-cnn",
            Command::Classify(_) => "classify",
            Command::Cluster(_) => "cluster",
            Command::Fit(_) => "fit",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
            Command::Zslice(_) => "zslice",
            Command::TrainAe(_) => "train-ae",
            Command::Anomaly(_) => "anomaly",
            Command::SynthVolume(_) => "synth-volume",
            Command::TrainZcnn(_) => "train-zcnn",
            Command::Experiment71(_) => "experiment-71",
            Command::Verify(_) => "verify",
            Command::Replay(_) => "replay",
        }
    }

    /// Whether the command writes to the workspace (and is recorded as a
    /// run).
    pub fn produces_artifacts(&self) -> bool {
        !matches!(self, Command::Verify(_) | Command::Replay(_))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenPlateArgs {
    /// Exact pore count; without it the count is Poisson distributed.
    #[arg(long)]
    pub pores: Option<usize>,
    /// Mean of the Poisson pore count.
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    /// Plate size x,y,z in mm (z is the thickness).
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 40.0, 4.0])]
    pub size: Vec<f64>,
    /// Pore base radius (mm).
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Per-axis pore scale range min,max.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.1])]
    pub scale: Vec<f64>,
    /// Clearance between pores and the plate faces (mm).
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    /// Sphere tessellation segments.
    #[arg(long, default_value_t = 20)]
    pub segments: u32,
    /// Also write ASCII STL files.
    #[arg(long)]
    pub ascii_stl: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenFmlArgs {
    /// Layers bottom to top as material:thickness (materials: aluminum,
    /// prepreg, steel, air, or name=mu); default is a five-layer
    /// aluminum/prepreg stack.
    #[arg(long)]
    pub layers: Option<String>,
    /// Footprint x,y in mm.
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 20.0])]
    pub footprint: Vec<f64>,
    #[arg(long)]
    pub ascii_stl: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Specimen spec id.
    #[arg(long)]
    pub spec: String,
    /// Device preset (highq, midq, lowq); explicit geometry flags override
    /// its values.
    #[arg(long)]
    pub preset: Option<String>,
    /// Source-object distance (mm). Default 300 without a preset.
    #[arg(long)]
    pub sod: Option<f64>,
    /// Source-detector distance (mm). Default 2 x SOD.
    #[arg(long)]
    pub sdd: Option<f64>,
    /// Detector pixel pitch (mm). Default 0.15 without a preset.
    #[arg(long)]
    pub pitch: Option<f64>,
    /// Detector width in pixels. Default 1000 without a preset.
    #[arg(long)]
    pub width: Option<usize>,
    /// Detector height in pixels. Default: the width.
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub projections: usize,
    #[arg(long, default_value_t = 0.0)]
    pub start_deg: f64,
    /// Angular range of a rotation series (endpoint excluded).
    #[arg(long, default_value_t = 180.0)]
    pub range_deg: f64,
    /// Gaussian noise sigma.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Noise sigma relative to each pixel's intensity (default) or to full
    /// scale.
    #[arg(long, value_parser = ["relative", "absolute"], default_value = "relative")]
    pub noise_kind: String,
    /// Quantize to this bit depth (12 or 16).
    #[arg(long)]
    pub bits: Option<u32>,
    /// Focal spot diameter (mm) for geometric blur; the preset's value is
    /// used when a preset is given.
    #[arg(long)]
    pub focal_spot: Option<f64>,
    /// Skip ground-truth masks.
    #[arg(long)]
    pub no_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReconArgs {
    /// Image-set id of a rotation series.
    #[arg(long)]
    pub images: String,
    #[arg(long, value_parser = ["ramp", "ramp-hann"], default_value = "ramp")]
    pub filter: String,
    /// Filter cutoff as a fraction of Nyquist.
    #[arg(long, default_value_t = 1.0)]
    pub cutoff: f64,
    /// Slice grid size (default: detector width).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Voxel size in mm (default: pitch / magnification).
    #[arg(long)]
    pub voxel: Option<f64>,
    /// Export every z slice as 16-bit PNG.
    #[arg(long)]
    pub slices: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SegmentArgs {
    /// Number of training segments.
    #[arg(long, default_value_t = 1000)]
    pub segments: usize,
    /// Pore,background fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7])]
    pub mix: Vec<f64>,
    /// Input normalization: "auto" (1st to 99th intensity percentile of
    /// the training image) or lo,hi.
    #[arg(long, default_value = "auto")]
    pub norm: String,
    /// Projection index within the image set.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExtractSegmentsArgs {
    #[arg(long)]
    pub images: String,
    /// Segment edge length in pixels.
    #[arg(long, default_value_t = 20)]
    pub size: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SegmentArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainCnnArgs {
    /// Image set with ground truth to draw segments from.
    #[arg(long, conflicts_with = "segment_set", required_unless_present = "segment_set")]
    pub images: Option<String>,
    /// Previously extracted segments.
    #[arg(long)]
    pub segment_set: Option<String>,
    /// Architecture size-filterA-filterB.
    #[arg(long, default_value = "20-8-8")]
    pub arch: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SegmentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub images: String,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    /// Feature-map id.
    #[arg(long)]
    pub map: String,
    /// Pore score threshold.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Neighborhood radius in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 5)]
    pub min_pts: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Cluster report id.
    #[arg(long)]
    pub clusters: String,
    /// Refine moment fits by least squares on the cluster boundary.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub map: String,
    /// Image set holding the ground truth (default: the map's source).
    #[arg(long)]
    pub images: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub map: String,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 2.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 5)]
    pub min_pts: usize,
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ZsliceArgs {
    #[arg(long)]
    pub volume: String,
    /// Averaging window edge in voxels.
    #[arg(long, default_value_t = 4)]
    pub window: usize,
    /// Grid stride in voxels (default: the window).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Also export every z slice as 16-bit PNG.
    #[arg(long)]
    pub slices: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainAeArgs {
    /// Baseline profile set (from zslice).
    #[arg(long)]
    pub profiles: String,
    #[arg(long, default_value_t = 8)]
    pub filters: usize,
    /// Percentile of baseline scores used as threshold.
    #[arg(long, default_value_t = 99.0)]
    pub percentile: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AnomalyArgs {
    /// Autoencoder model id.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub volume: String,
    #[arg(long, default_value_t = 4)]
    pub window: usize,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Threshold override (default: the model's calibrated value).
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthVolumeArgs {
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    /// Voxel edge (mm).
    #[arg(long, default_value_t = 0.025)]
    pub voxel: f64,
    /// Layers as for gen-fml.
    #[arg(long)]
    pub layers: Option<String>,
    /// Gaussian voxel noise sigma (1/mm).
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Stretch factor of the damage band (1 = undamaged).
    #[arg(long, default_value_t = 1.2)]
    pub stretch: f64,
    /// Damage footprint x0,y0,width,height in voxels.
    #[arg(long, value_delimiter = ',', default_values_t = [20, 20, 24, 24])]
    pub region: Vec<usize>,
    /// Damaged depth band lo,hi in mm from the bottom face.
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 1.05])]
    pub band: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainZcnnArgs {
    /// Volume with a damage truth map (from synth-volume).
    #[arg(long)]
    pub volume: String,
    #[arg(long, default_value_t = 4)]
    pub window: usize,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub filter_a: usize,
    #[arg(long, default_value_t = 8)]
    pub filter_b: usize,
    /// Fraction of profiles withheld for accuracy reporting.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// Detector size in pixels (square). The reference setup is 1000 at
    /// 0.15 mm; smaller sizes scale the pitch to keep the field of view.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    /// Pixel pitch (mm); default 0.15 x 1000 / size.
    #[arg(long)]
    pub pitch: Option<f64>,
    #[arg(long, default_value_t = 300.0)]
    pub sod: f64,
    #[arg(long, default_value_t = 600.0)]
    pub sdd: f64,
    /// Relative Gaussian noise sigma.
    #[arg(long, default_value_t = 0.10)]
    pub noise: f64,
    /// Exact pores per plate (default: Poisson with mean 100).
    #[arg(long)]
    pub pores: Option<usize>,
    #[arg(long, default_value = "20-8-8")]
    pub arch: String,
    #[arg(long, default_value_t = 1000)]
    pub segments: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7])]
    pub mix: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Skip the noise-free retraining.
    #[arg(long)]
    pub no_ablation: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Run id to re-execute.
    #[arg(long)]
    pub run: String,
}
