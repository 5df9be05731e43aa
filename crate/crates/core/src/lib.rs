//! Bayesian parameter estimation for the FitzHugh–Nagumo model: forward
//! simulation, noise models, adjoint gradients and Hessians, Laplace
//! covariances on the log-Euclidean SPD manifold, synthetic datasets, and
//! neural regressors trained to map observations to parameters.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Version of this crate, recorded in provenance files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod adjoint;
pub mod binio;
pub mod covariance;
pub mod dataset;
pub mod error;
pub mod mcmc;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod objective;
pub mod ode;
pub mod spd;

pub use nalgebra::Matrix3;

pub use adjoint::{assemble_hessian, gradient, hessian_matvec, CurvatureContext, Hessian3};
pub use covariance::{posterior_covariance, screen_hessians, HessianQuality, PosteriorCov, Verdict};
pub use dataset::{
    generate_dataset, survey_hessians, Dataset, FeatureKind, GenerateConfig, LabelLayout, Split, SplitData,
};
pub use error::{Error, Result};
pub use metrics::{EvalReport, MetricSet};
pub use nn::{ModelFile, ModelSpec, Network, TrainConfig};
pub use noise::{NoiseKind, NoiseSpec, RngStream};
pub use objective::{neg_log_posterior, phi_grid, GridAxis, LikelihoodConfig, PriorConfig};
pub use ode::{parameter_to_observation, simulate_fhn, DynParams, SimConfig, Trajectory};
pub use spd::{covariance_to_tangent, tangent_to_covariance, TangentVec};
