//! Negative log posterior `φ(θ) = ½ γ h Σ_j (y_j − u_j)² + ½ ‖θ − θ̄‖²_{Γ_prior⁻¹}`.
//!
//! The misfit sum is weighted by the step size so that `φ` approximates the
//! time integral of the continuous variational objective.

use crate::error::{Error, Result};
use crate::ode::{parameter_to_observation, DynParams, SimConfig};

/// Gaussian prior over `θ` with independent components, plus the admissible box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub mean: [f64; 3],
    pub sigma: [f64; 3],
    pub bounds: [(f64, f64); 3],
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { mean: [0.4, 0.4, 3.4], sigma: [0.3, 0.4, 0.4], bounds: [(-0.2, 1.0), (-0.4, 1.2), (2.0, 5.0)] }
    }
}

impl PriorConfig {
    /// Diagonal of the prior precision `L = Γ_prior⁻¹`.
    pub fn precision(&self) -> [f64; 3] {
        self.sigma.map(|s| 1.0 / (s * s))
    }

    pub fn contains(&self, p: &DynParams) -> bool {
        p.to_array().iter().zip(&self.bounds).all(|(x, (lo, hi))| (lo..=hi).contains(&x))
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            let (lo, hi) = self.bounds[i];
            if !(self.sigma[i] > 0.0) || !(lo < hi) || !self.mean[i].is_finite() {
                return Err(Error::Config(format!("invalid prior component {i}")));
            }
        }
        Ok(())
    }

    pub fn energy(&self, p: &DynParams) -> f64 {
        let l = self.precision();
        p.to_array().iter().zip(&self.mean).zip(&l).map(|((x, m), l)| 0.5 * l * (x - m) * (x - m)).sum()
    }
}

/// Likelihood weight `γ = 1 / (σ_noise τ)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodConfig {
    pub gamma: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self::from_noise_scale(0.1)
    }
}

impl LikelihoodConfig {
    /// From the product `σ_noise · τ`.
    pub fn from_noise_scale(scale: f64) -> Self {
        Self { gamma: 1.0 / (scale * scale) }
    }
}

/// `½ γ h Σ (y_j − u_j)²` for an already simulated observation.
pub fn misfit(predicted: &[f64], y_obs: &[f64], like: &LikelihoodConfig, h: f64) -> f64 {
    let ss: f64 = predicted.iter().zip(y_obs).map(|(u, y)| (u - y) * (u - y)).sum();
    0.5 * like.gamma * h * ss
}

pub fn neg_log_posterior(
    params: &DynParams,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
) -> Result<f64> {
    if y_obs.len() != cfg.n_t {
        return Err(Error::Config(format!("observation length {} != n_t {}", y_obs.len(), cfg.n_t)));
    }
    let f = parameter_to_observation(params, cfg)?;
    Ok(misfit(&f, y_obs, like, cfg.step()) + prior.energy(params))
}

/// One axis of a landscape grid: parameter index and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub param: usize,
    pub values: Vec<f64>,
}

/// `φ` over `x × y` with the remaining component taken from `base`, row-major
/// with `y` varying fastest. Points whose forward solve fails are NaN.
#[allow(clippy::too_many_arguments)]
pub fn phi_grid(
    base: &DynParams,
    x: &GridAxis,
    y: &GridAxis,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    if x.param > 2 || y.param > 2 || x.param == y.param {
        return Err(Error::Config(format!(
            "grid axes must be two distinct parameters, got {} and {}",
            x.param, y.param
        )));
    }
    let mut out = Vec::with_capacity(x.values.len() * y.values.len());
    for &a in &x.values {
        for &b in &y.values {
            let mut theta = base.to_array();
            theta[x.param] = a;
            theta[y.param] = b;
            out.push(match neg_log_posterior(&DynParams::from_array(theta), y_obs, like, prior, cfg) {
                Ok(v) => v,
                Err(e) if e.is_numeric() => f64::NAN,
                Err(e) => return Err(e),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::simulate_fhn;

    #[test]
    fn zero_at_prior_mean_with_exact_data() {
        let prior = PriorConfig::default();
        let cfg = SimConfig::default();
        let p = DynParams::from_array(prior.mean);
        let y = parameter_to_observation(&p, &cfg).unwrap();
        let phi = neg_log_posterior(&p, &y, &LikelihoodConfig::default(), &prior, &cfg).unwrap();
        assert_eq!(phi, 0.0);
    }

    #[test]
    fn constant_offset_closed_form() {
        let prior = PriorConfig::default();
        let cfg = SimConfig::default();
        let like = LikelihoodConfig::default();
        let p = DynParams::from_array(prior.mean);
        let c = 0.05;
        let y: Vec<f64> = parameter_to_observation(&p, &cfg).unwrap().iter().map(|u| u + c).collect();
        let phi = neg_log_posterior(&p, &y, &like, &prior, &cfg).unwrap();
        let expected = 0.5 * like.gamma * cfg.step() * cfg.n_t as f64 * c * c;
        assert!((phi - expected).abs() <= 1e-10 * expected, "{phi} vs {expected}");
    }

    #[test]
    fn matches_term_by_term_sum() {
        let prior = PriorConfig::default();
        let cfg = SimConfig { n_t: 400, tau: 40.0, ..SimConfig::default() };
        let like = LikelihoodConfig { gamma: 37.0 };
        let truth = DynParams::new(0.6, 0.2, 2.9);
        let y = parameter_to_observation(&truth, &cfg).unwrap();
        for p in [DynParams::new(0.1, -0.3, 4.1), DynParams::new(0.9, 1.1, 2.1)] {
            let traj = simulate_fhn(&p, &cfg).unwrap();
            let mut data = 0.0;
            for j in 1..=cfg.n_t {
                data += (y[j - 1] - traj.u[j]).powi(2);
            }
            data *= 0.5 * like.gamma * cfg.tau / cfg.n_t as f64;
            let reg = 0.5 * ((p.theta0 - 0.4) / 0.3).powi(2)
                + 0.5 * ((p.theta1 - 0.4) / 0.4).powi(2)
                + 0.5 * ((p.theta2 - 3.4) / 0.4).powi(2);
            let phi = neg_log_posterior(&p, &y, &like, &prior, &cfg).unwrap();
            assert!((phi - (data + reg)).abs() <= 1e-12 * phi.abs().max(1.0));
            assert!(phi > 0.0);
        }
    }

    #[test]
    fn grid_matches_pointwise_and_vanishes_at_truth() {
        let prior = PriorConfig::default();
        let cfg = SimConfig { n_t: 200, tau: 20.0, ..SimConfig::default() };
        let like = LikelihoodConfig::default();
        let truth = DynParams::from_array(prior.mean);
        let y = parameter_to_observation(&truth, &cfg).unwrap();
        let gx = GridAxis { param: 0, values: vec![0.2, 0.4, 0.6] };
        let gy = GridAxis { param: 2, values: vec![3.0, 3.4] };
        let g = phi_grid(&truth, &gx, &gy, &y, &like, &prior, &cfg).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[3], 0.0);
        let p = DynParams::new(0.6, 0.4, 3.0);
        assert_eq!(g[4], neg_log_posterior(&p, &y, &like, &prior, &cfg).unwrap());
        assert!(phi_grid(&truth, &gx, &gx, &y, &like, &prior, &cfg).is_err());
    }
}
