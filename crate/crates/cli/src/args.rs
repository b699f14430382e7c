use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgnet::evaluation::{Ablation, GridSpec, PipelineConfig, DEFAULT_FOLDS, DEFAULT_K};
use mgnet::projection::DEFAULT_ENERGY_THRESHOLD;
use mgnet::training::{
    LossKind, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_D_OUT, DEFAULT_EPOCHS, DEFAULT_LAYERS,
    DEFAULT_LR, DEFAULT_SMOOTH_L1_WEIGHT,
};

#[derive(Debug, Parser)]
#[command(
    name = "mgnet",
    version,
    about = "Multimodal graph network for brain connectivity classification",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic planted-community cohort.
    Generate(GenerateArgs),
    /// Write U1, U2, singular values and the population graph of a cohort.
    Project(ProjectArgs),
    /// Train on one split (fold 0) and write a checkpoint and log.
    Train(PipelineArgs),
    /// Stratified K-fold cross-validation.
    Cv(PipelineArgs),
    /// Grid search over K, batch size and D_out.
    Grid(GridArgs),
    /// Cross-validation with one component ablated.
    Ablate(AblateArgs),
    /// Write each subject's pooled embedding F using a checkpoint.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory for the manifest and matrices.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[arg(long, default_value_t = 32)]
    pub nodes: usize,
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    /// Modality names, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "m0,m1")]
    pub modalities: Vec<String>,
    /// Signal strength per modality, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0,5")]
    pub signal: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.7)]
    pub within_density: f64,
    /// Cross-block density for class 0 and class 1.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0.2,0.4")]
    pub inter_density: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    CrossEntropy,
    CrossEntropySmoothL1,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Neighbours per node in the KNN graph.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_D_OUT)]
    pub dout: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = DEFAULT_LAYERS)]
    pub layers: usize,
    #[arg(long, value_enum, default_value_t = LossArg::CrossEntropy)]
    pub loss: LossArg,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_L1_WEIGHT)]
    pub smooth_l1_weight: f64,
    /// Fraction of spectral energy kept in the truncated U1.
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub tau: f64,
    /// Gaussian kernel width (default: median pairwise distance).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for folds and grid points.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Fit projection and graph on all subjects, test folds included.
    #[arg(long)]
    pub transductive: bool,
}

impl PipelineArgs {
    pub fn config(&self, ablation: Option<Ablation>) -> PipelineConfig {
        let loss = match self.loss {
            LossArg::CrossEntropy => LossKind::CrossEntropy,
            LossArg::CrossEntropySmoothL1 => LossKind::CrossEntropyPlusSmoothL1 {
                weight: self.smooth_l1_weight,
            },
        };
        PipelineConfig {
            train: TrainConfig {
                lr: self.lr,
                epochs: self.epochs,
                batch_size: self.batch,
                dropout_rate: self.dropout,
                layer_count: self.layers,
                d_out: self.dout,
                loss,
                seed: self.seed,
                train_alpha: true,
            },
            k_neighbors: self.k,
            energy_threshold: self.tau,
            kernel_width: self.sigma,
            folds: self.folds,
            transductive: self.transductive,
            ablation,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
    pub k_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10,12")]
    pub batch_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100,120")]
    pub dout_grid: Vec<usize>,
}

impl GridArgs {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            k: self.k_grid.clone(),
            batch: self.batch_grid.clone(),
            d_out: self.dout_grid.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// `avg-pooling`, `no-u1` or `single-modality:<index>`.
    #[arg(long, value_parser = parse_ablation)]
    pub ablate: Ablation,
}

pub fn parse_ablation(s: &str) -> Result<Ablation, String> {
    match s {
        "avg-pooling" => Ok(Ablation::AvgPooling),
        "no-u1" => Ok(Ablation::NoU1),
        _ => {
            let index = s
                .strip_prefix("single-modality:")
                .ok_or_else(|| format!("unknown ablation {s:?}; expected avg-pooling, no-u1 or single-modality:<index>"))?;
            let modality = index
                .parse()
                .map_err(|_| format!("invalid modality index {index:?}"))?;
            Ok(Ablation::SingleModality { modality })
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
