//! Random-walk Metropolis–Hastings on `exp(−φ)`; an empirical check of the Laplace covariance.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::{neg_log_posterior, LikelihoodConfig, PriorConfig};
use crate::ode::{DynParams, SimConfig};

/// Fraction of the total chain discarded as burn-in.
pub const BURN_IN_FRACTION: f64 = 0.2;

/// Default proposal scale as a multiple of the prior standard deviations.
pub const DEFAULT_PROPOSAL_FACTOR: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// Post-burn-in states, exactly `n_samples` of them.
    pub samples: Vec<[f64; 3]>,
    /// Accepted proposals over all steps including burn-in.
    pub acceptance_rate: f64,
}

impl Chain {
    pub fn mean(&self) -> [f64; 3] {
        let n = self.samples.len() as f64;
        let mut m = [0.0; 3];
        for s in &self.samples {
            for k in 0..3 {
                m[k] += s[k] / n;
            }
        }
        m
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> Matrix3<f64> {
        let m = self.mean();
        let mut c = Matrix3::zeros();
        for s in &self.samples {
            for i in 0..3 {
                for j in 0..3 {
                    c[(i, j)] += (s[i] - m[i]) * (s[j] - m[j]);
                }
            }
        }
        c / (self.samples.len().max(2) - 1) as f64
    }
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn relative_frobenius(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn default_proposal(prior: &PriorConfig) -> [f64; 3] {
    prior.sigma.map(|s| DEFAULT_PROPOSAL_FACTOR * s)
}

/// Chain of `n_samples` retained states after a burn-in of
/// `BURN_IN_FRACTION` of the total length. Proposals whose forward solve fails
/// are rejected.
#[allow(clippy::too_many_arguments)]
pub fn mh_sample<R: Rng + ?Sized>(
    params0: &DynParams,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
    n_samples: usize,
    proposal_scale: [f64; 3],
    rng: &mut R,
) -> Result<Chain> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    if proposal_scale.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Config(format!("invalid proposal scale {proposal_scale:?}")));
    }
    let burn_in = (n_samples as f64 * BURN_IN_FRACTION / (1.0 - BURN_IN_FRACTION)).round() as usize;
    let total = burn_in + n_samples;
    let mut x = params0.to_array();
    let mut phi = neg_log_posterior(params0, y_obs, like, prior, cfg)?;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(n_samples);
    for step in 0..total {
        let mut y = x;
        for k in 0..3 {
            let z: f64 = StandardNormal.sample(rng);
            y[k] += proposal_scale[k] * z;
        }
        let u: f64 = rng.random();
        if let Ok(phi_y) = neg_log_posterior(&DynParams::from_array(y), y_obs, like, prior, cfg) {
            if u.ln() <= phi - phi_y {
                x = y;
                phi = phi_y;
                accepted += 1;
            }
        }
        if step >= burn_in {
            samples.push(x);
        }
    }
    Ok(Chain { samples, acceptance_rate: accepted as f64 / total as f64 })
}
