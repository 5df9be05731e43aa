//! `fhn`: generate datasets, train and evaluate regressors, and export diagnostics.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fhn", version, about = "FitzHugh-Nagumo parameter inference pipeline")]
pub struct Cli {
    /// Worker threads for per-sample parallelism; 0 uses every core.
    #[arg(long, global = true, env = "FHN_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Root seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled dataset.
    Generate(GenerateArgs),
    /// Train a regressor on a dataset.
    Train(TrainArgs),
    /// Score a trained model on one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Per-sample Hessians, Laplace covariances, and screening verdicts.
    Hessian(HessianArgs),
    /// Compare a Metropolis-Hastings covariance with the Laplace covariance.
    McmcCheck(McmcArgs),
    /// Write plot-ready tables.
    ExportPlots {
        #[command(subcommand)]
        kind: PlotKind,
    },
}

/// Time grid and likelihood weight.
#[derive(Debug, Args)]
pub struct SimArgs {
    /// Final time.
    #[arg(long, default_value_t = 200.0)]
    pub tau: f64,
    /// Number of time steps.
    #[arg(long = "n-t", default_value_t = 2000)]
    pub n_t: usize,
    /// Likelihood weight; defaults to 1/(0.1)^2.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Total number of samples before screening.
    #[arg(long)]
    pub n: usize,
    /// additive, intrinsic, or combined.
    #[arg(long, default_value = "additive")]
    pub noise: String,
    /// ts, fc, or tsfc.
    #[arg(long, default_value = "tsfc")]
    pub features: String,
    /// Comma list of dyn, noise, cov.
    #[arg(long, default_value = "dyn,noise")]
    pub labels: String,
    /// Test split size; defaults to 4/15 of n.
    #[arg(long = "n-test")]
    pub n_test: Option<usize>,
    /// Validation split size; defaults to 2/15 of n.
    #[arg(long = "n-val")]
    pub n_val: Option<usize>,
    /// clean or noisy: the data at which covariance labels are linearized.
    #[arg(long = "hessian-data", default_value = "clean")]
    pub hessian_data: String,
    /// Size of the shared (rho, sigma) pool; 0 draws a fresh pair per sample.
    #[arg(long = "noise-pairs", default_value_t = 100)]
    pub noise_pairs: usize,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// cnn or dnn.
    #[arg(long, default_value = "cnn")]
    pub arch: String,
    /// Convolution blocks (cnn) or hidden layers (dnn); defaults to 5 and 12.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Filters of the first convolution.
    #[arg(long, default_value_t = 8)]
    pub nf: usize,
    /// Units per hidden dense layer.
    #[arg(long, default_value_t = 128)]
    pub nu: usize,
    #[arg(long, default_value_t = 64)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.002)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Use only the first n training rows.
    #[arg(long = "n-train")]
    pub n_train: Option<usize>,
    /// Report the architecture and parameter count without training.
    #[arg(long = "dry-run")]
    pub dry_run: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// train, val, or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HessianArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "additive")]
    pub noise: String,
    #[arg(long = "hessian-data", default_value = "clean")]
    pub hessian_data: String,
    #[arg(long = "noise-pairs", default_value_t = 100)]
    pub noise_pairs: usize,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Source of a synthetic observation for single-point commands.
#[derive(Debug, Args)]
pub struct ObservationArgs {
    /// True parameters as theta0,theta1,theta2.
    #[arg(long, default_value = "0.4,0.4,3.4", allow_hyphen_values = true)]
    pub theta: String,
    /// none, additive, intrinsic, or combined.
    #[arg(long, default_value = "none")]
    pub noise: String,
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.07)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.15)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct McmcArgs {
    #[command(flatten)]
    pub obs: ObservationArgs,
    /// Retained chain length after burn-in.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Proposal standard deviations as a multiple of the prior ones.
    #[arg(long = "proposal-factor", default_value_t = 0.02)]
    pub proposal_factor: f64,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// State and observation time series.
    Trajectory {
        #[command(flatten)]
        obs: ObservationArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// The negative log posterior over a two-parameter grid.
    Landscape {
        #[command(flatten)]
        obs: ObservationArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Horizontal parameter and grid as name=lo:hi:n.
        #[arg(long, default_value = "theta0=-0.2:1:41", allow_hyphen_values = true)]
        x: String,
        /// Vertical parameter and grid as name=lo:hi:n.
        #[arg(long, default_value = "theta2=2:5:41", allow_hyphen_values = true)]
        y: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truth and prediction per label for one split.
    Scatter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, category) = output::classify(&e);
            eprintln!("fhn: {category} error: {e}");
            ExitCode::from(code)
        }
    }
}
