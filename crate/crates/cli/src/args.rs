use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use svdnet::config::RunConfig;
use svdnet::decorrelate::DecorrMethod;
use svdnet::eval::SyntheticConfig;
use svdnet::network::FeatureKind;

#[derive(Debug, Parser)]
#[command(name = "svdnet", version, about = "Eigenlayer decorrelation experiments on retrieval data")]
pub struct Cli {
    /// Run configuration file (flat TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the `seed` config key (and the generator seed for `gen`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic retrieval dataset (`dataset.csv`).
    Gen(GenArgs),
    /// Step 0 followed by RRI; writes checkpoints, `trace.csv` and `manifest.json`.
    Train(RunArgs),
    /// Score a checkpoint against a dataset; writes `report.csv`.
    Eval(EvalArgs),
    /// Print S(W) of checkpoints; writes `diagnose.csv`.
    Diagnose(DiagnoseArgs),
    /// Compare decorrelation methods; writes `compare.csv`.
    Compare(CompareArgs),
    /// Sweep the Eigenlayer width with and without RRI; writes `sweep_dim.csv`.
    SweepDim(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub identities: Option<usize>,
    #[arg(long)]
    pub cameras: Option<usize>,
    #[arg(long)]
    pub samples_per_id_camera: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub camera_scale: Option<f64>,
}

impl GenArgs {
    pub fn apply(&self, seed: Option<u64>) -> SyntheticConfig {
        let d = SyntheticConfig::default();
        SyntheticConfig {
            identities: self.identities.unwrap_or(d.identities),
            cameras: self.cameras.unwrap_or(d.cameras),
            samples_per_id_camera: self.samples_per_id_camera.unwrap_or(d.samples_per_id_camera),
            feature_dim: self.feature_dim.unwrap_or(d.feature_dim),
            latent_dim: self.latent_dim.unwrap_or(d.latent_dim),
            noise: self.noise.unwrap_or(d.noise),
            camera_scale: self.camera_scale.unwrap_or(d.camera_scale),
            seed: seed.unwrap_or(d.seed),
        }
    }
}

/// One flag per config key; a flag given on the command line wins over the
/// config file.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub step0_epochs: Option<usize>,
    #[arg(long)]
    pub restraint_epochs: Option<usize>,
    #[arg(long)]
    pub relaxation_epochs: Option<usize>,
    #[arg(long)]
    pub max_rri: Option<usize>,
    #[arg(long)]
    pub lr_step0: Option<f64>,
    #[arg(long)]
    pub lr_restraint: Option<f64>,
    #[arg(long)]
    pub lr_relaxation: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epsilon_s: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub eigen_dim: Option<usize>,
    /// Dataset CSV; the default synthetic benchmark is generated when absent.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = parse_feature)]
    pub eval_feature: Option<FeatureKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: svdnet::SvdnetError| e.to_string())
}

fn parse_method(s: &str) -> Result<DecorrMethod, String> {
    s.parse().map_err(|e: svdnet::SvdnetError| e.to_string())
}

impl RunArgs {
    pub fn apply(&self, cfg: &mut RunConfig, seed: Option<u64>) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        set!(
            step0_epochs,
            restraint_epochs,
            relaxation_epochs,
            max_rri,
            lr_step0,
            lr_restraint,
            lr_relaxation,
            batch_size,
            epsilon_s,
            hidden_dims,
            eigen_dim,
            eval_feature,
            normalize
        );
        if let Some(path) = &self.data {
            cfg.data = Some(path.clone());
        }
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint file (`.svdn`).
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Checkpoint files or directories containing `.svdn` files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Decorrelation methods to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "orig,us,u,uvt,qd")]
    pub methods: Vec<DecorrMethod>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Eigenlayer widths to train.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128")]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}
