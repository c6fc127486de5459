use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use viewprop_core::factors::{
    DEFAULT_ALPHA, DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_LAMBDA, DEFAULT_SEED, DEFAULT_T_MAX,
};
use viewprop_core::{EpsilonMode, Hyperparams, ViewSpec};

#[derive(Debug, Parser)]
#[command(
    name = "viewprop",
    version,
    about = "Multi-view attributed graph clustering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write assignments, trace, factors and a report.
    Fit(FitArgs),
    /// Fit every (alpha, lambda) pair of a grid and write sweep.csv.
    Sweep(SweepArgs),
    /// Write a planted-partition dataset.
    Synth(SynthArgs),
    /// Score an assignment file against labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Edge list, two 0-based vertex indices per line.
    #[arg(long)]
    pub edges: PathBuf,
    /// Feature view file; repeat for several views, in order.
    #[arg(long = "view", required = true)]
    pub views: Vec<PathBuf>,
    /// Ground-truth labels, one per line (negative means unlabeled).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Reject feature values other than 0 and 1.
    #[arg(long)]
    pub strict_binary: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EpsilonModeArg {
    Absolute,
    Relative,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// Propagation latent dimension (defaults to k).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = EpsilonModeArg::Relative)]
    pub epsilon_mode: EpsilonModeArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn hyperparams(&self, alpha: f64, lambda: f64) -> Hyperparams {
        Hyperparams {
            alpha,
            lambda,
            delta: self.delta,
            k_clusters: self.k,
            s_dim: self.s.unwrap_or(self.k),
            t_max: self.t_max,
            epsilon: self.epsilon,
            epsilon_mode: match self.epsilon_mode {
                EpsilonModeArg::Absolute => EpsilonMode::Absolute,
                EpsilonModeArg::Relative => EpsilonMode::Relative,
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Start from a saved factor file instead of a seeded draw.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Save factors every this many sweeps (0 disables).
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated alpha grid.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.5,1,5,10,20,50,100"
    )]
    pub alpha: Vec<f64>,
    /// Comma-separated lambda grid.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.001,0.01,0.1,1,5,10,50,100"
    )]
    pub lambda: Vec<f64>,
    /// Parallel fits (0 uses every core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p_out: f64,
    /// `features_per_cluster:flip_noise`; repeat for several views.
    #[arg(long = "view-spec", value_parser = parse_view_spec, default_value = "10:0.05")]
    pub views: Vec<ViewSpec>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted cluster per vertex, one per line.
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write report.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_view_spec(s: &str) -> Result<ViewSpec, String> {
    let (fpc, noise) = s
        .split_once(':')
        .ok_or_else(|| format!("expected FEATURES:NOISE, got {s:?}"))?;
    Ok(ViewSpec {
        features_per_cluster: fpc.trim().parse().map_err(|e| format!("{fpc:?}: {e}"))?,
        flip_noise: noise
            .trim()
            .parse()
            .map_err(|e| format!("{noise:?}: {e}"))?,
    })
}
