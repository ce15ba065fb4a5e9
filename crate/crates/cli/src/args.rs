use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mifs_core::importance::Criterion;
use serde::{Deserialize, Serialize};

pub const DEFAULT_KEEP_FRACTIONS: [f64; 5] = [1.0, 0.9375, 0.875, 0.75, 0.5];
pub const DEFAULT_QPS: [u8; 4] = [10, 20, 30, 40];
pub const GAUSSIAN_SEED: u64 = 2023;
pub const MI_SEED: u64 = 0;
pub const SYNTH_SEED: u64 = 7;

#[derive(Parser, Clone, Debug)]
#[command(
    name = "mifs",
    version,
    about = "Task-aware feature importance, selection and compression",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Global {
    /// Output directory.
    #[arg(long, global = true, env = "MIFS_OUT", default_value = "mifs-out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "MIFS_THREADS")]
    pub threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for every stochastic step; each subcommand has a fixed default.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Estimator check against closed-form Gaussian MI.
    ValidateGaussian(ValidateArgs),
    /// MI of every channel against every task.
    EstimateMi(EstimateArgs),
    /// Importance table under one criterion.
    Rank(RankArgs),
    /// Keep the top channels and zero the rest.
    SelectHard(SelectHardArgs),
    /// 8-bit base channels plus a compressed enhancement layer.
    SelectSoft(SelectSoftArgs),
    /// Decode soft-selection payloads back to features.
    Reconstruct(ReconstructArgs),
    /// Per-task and weighted distortion from an accuracy table.
    Distortion(DistortionArgs),
    /// Winning criterion over a grid of task weights.
    SweepSimplex(SweepArgs),
    /// Synthetic dataset with planted channel relevance.
    Synth(SynthArgs),
    /// Gaussian validation plus the full synthetic benchmark.
    Repro(ReproArgs),
    /// Re-run a recorded `run.json`.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ValidateGaussian(_) => "validate-gaussian",
            Command::EstimateMi(_) => "estimate-mi",
            Command::Rank(_) => "rank",
            Command::SelectHard(_) => "select-hard",
            Command::SelectSoft(_) => "select-soft",
            Command::Reconstruct(_) => "reconstruct",
            Command::Distortion(_) => "distortion",
            Command::SweepSimplex(_) => "sweep-simplex",
            Command::Synth(_) => "synth",
            Command::Repro(_) => "repro",
            Command::Replay(_) => "replay",
        }
    }

    pub fn default_seed(&self) -> u64 {
        match self {
            Command::ValidateGaussian(_) | Command::Repro(_) => GAUSSIAN_SEED,
            Command::Synth(_) => SYNTH_SEED,
            _ => MI_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianMode {
    #[value(name = "1d")]
    #[serde(rename = "1d")]
    OneD,
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
    Both,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = GaussianMode::Both)]
    pub mode: GaussianMode,
    /// Samples per draw [default: 400000 in 1-D, 1000000 in 2-D].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Clustering repeats per (ρ, K) [default: 5 in 1-D, 1 in 2-D].
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_values_t = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9])]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16, 32])]
    pub ks: Vec<usize>,
    /// Equal-width bins for the X side.
    #[arg(long, default_value_t = 30)]
    pub x_bins: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MiArgs {
    /// Clusters for the output patches.
    #[arg(short = 'K', long = "clusters", default_value_t = 8)]
    pub k: usize,
    /// Bins per feature-patch dimension.
    #[arg(short = 'B', long = "bins", default_value_t = 8)]
    pub bins: usize,
    /// Override the manifest's feature patch side.
    #[arg(short = 'N', long = "patch-n")]
    pub n: Option<usize>,
    /// Override the manifest's output patch side.
    #[arg(short = 'M', long = "patch-m")]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Tasks to score [default: all in the manifest].
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<u32>,
    #[command(flatten)]
    pub mi: MiArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct RankArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = Criterion::Mi)]
    pub criterion: Criterion,
    /// Task for the MI criterion [default: every task].
    #[arg(long)]
    pub task: Option<u32>,
    #[command(flatten)]
    pub mi: MiArgs,
    #[arg(long, default_value_t = 1e-9)]
    pub gm_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub gm_max_iters: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct KeepArgs {
    /// Fractions of channels to keep.
    #[arg(long, value_delimiter = ',')]
    pub keep: Vec<f64>,
    /// Absolute channel counts; overrides --keep.
    #[arg(long, value_delimiter = ',')]
    pub keep_count: Vec<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SelectHardArgs {
    /// A feature tensor (.ften) or a dataset manifest (.json).
    #[arg(long)]
    pub input: PathBuf,
    /// Importance table whose ordering decides what is kept.
    #[arg(long)]
    pub ranking: PathBuf,
    #[command(flatten)]
    pub keep: KeepArgs,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct CodecArgs {
    /// External encoder template using {input} {output} {qp} {width} {height}.
    #[arg(long)]
    pub codec_cmd: Option<String>,
    /// External decoder template.
    #[arg(long)]
    pub codec_decode_cmd: Option<String>,
    /// JSON file with `encode` and `decode` templates.
    #[arg(long)]
    pub codec_config: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SelectSoftArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub ranking: PathBuf,
    #[command(flatten)]
    pub keep: KeepArgs,
    /// Enhancement-layer qp values.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QPS)]
    pub qp: Vec<u8>,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructArgs {
    /// A payload (.fsel) or a payload index (.json) written by select-soft.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct AccuracyArgs {
    /// Accuracy table, CSV or JSON.
    #[arg(long)]
    pub accuracy: PathBuf,
    /// Criteria to compare [default: every criterion in the table].
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<String>,
    #[arg(long)]
    pub keep_count: usize,
    /// qp of a soft-selection entry; omit for hard selection.
    #[arg(long)]
    pub qp: Option<u8>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub table: AccuracyArgs,
    /// Task weights in task-id order [default: equal].
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub table: AccuracyArgs,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Spec JSON [default: the built-in desk-scale spec].
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Noise power as a fraction of the mean task signal power.
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReproArgs {
    /// Smaller Gaussian sample counts, for smoke tests.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub skip_gaussian: bool,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A `run.json` written by an earlier invocation.
    #[arg(long)]
    pub run: PathBuf,
}
