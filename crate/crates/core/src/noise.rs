//! Observation noise: AR(1) additive noise, intrinsic (SDE) noise, and their combination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ode::{check_finite, parameter_to_observation, rhs, DynParams, SimConfig};

/// Upper bound on rejection-sampling attempts for truncated normals.
pub const MAX_REJECTIONS: usize = 10_000;

/// Truncation windows and sampling laws for the noise parameters.
pub const RHO_LAW: TruncatedNormal = TruncatedNormal { mean: 0.8, sd: 0.05, lo: 0.65, hi: 0.95 };
pub const SIGMA_LAW: TruncatedNormal = TruncatedNormal { mean: 0.07, sd: 0.01, lo: 0.04, hi: 0.10 };
pub const BETA_LAW: TruncatedNormal = TruncatedNormal { mean: 0.15, sd: 0.05, lo: 0.01, hi: 0.27 };

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's 64-bit stream
/// counter, so distinct ids never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha8-seed_from_u64-set_stream";

    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    /// Rejection sampling; redraws until the value lands inside `[lo, hi]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mean + self.sd * z;
            if (self.lo..=self.hi).contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::Bug(format!("{MAX_REJECTIONS} consecutive rejections for {self:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Additive,
    Intrinsic,
    Combined,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Additive => "additive",
            NoiseKind::Intrinsic => "intrinsic",
            NoiseKind::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(NoiseKind::Additive),
            "intrinsic" => Ok(NoiseKind::Intrinsic),
            "combined" => Ok(NoiseKind::Combined),
            _ => Err(Error::Config(format!("unknown noise kind '{s}'"))),
        }
    }

    pub fn has_additive(self) -> bool {
        matches!(self, NoiseKind::Additive | NoiseKind::Combined)
    }

    pub fn has_intrinsic(self) -> bool {
        matches!(self, NoiseKind::Intrinsic | NoiseKind::Combined)
    }
}

/// Noise model and its parameters. Fields not used by `kind` are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rho: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl NoiseSpec {
    pub fn additive(rho: f64, sigma: f64) -> Self {
        Self { kind: NoiseKind::Additive, rho, sigma, beta: 0.0 }
    }

    pub fn intrinsic(beta: f64) -> Self {
        Self { kind: NoiseKind::Intrinsic, rho: 0.0, sigma: 0.0, beta }
    }

    pub fn combined(rho: f64, sigma: f64, beta: f64) -> Self {
        Self { kind: NoiseKind::Combined, rho, sigma, beta }
    }
}

/// Draw `(ρ, σ)` only; the pair pool shared across samples uses this.
pub fn sample_additive_pair<R: Rng + ?Sized>(rng: &mut R) -> Result<(f64, f64)> {
    Ok((RHO_LAW.sample(rng)?, SIGMA_LAW.sample(rng)?))
}

/// Draw noise parameters for `kind`. Combined noise halves both scales.
pub fn sample_noise_params<R: Rng + ?Sized>(kind: NoiseKind, rng: &mut R) -> Result<NoiseSpec> {
    Ok(match kind {
        NoiseKind::Additive => {
            let (rho, sigma) = sample_additive_pair(rng)?;
            NoiseSpec::additive(rho, sigma)
        }
        NoiseKind::Intrinsic => NoiseSpec::intrinsic(BETA_LAW.sample(rng)?),
        NoiseKind::Combined => {
            let (rho, sigma) = sample_additive_pair(rng)?;
            let beta = BETA_LAW.sample(rng)?;
            NoiseSpec::combined(rho, 0.5 * sigma, 0.5 * beta)
        }
    })
}

/// Add stationary AR(1) noise with marginal variance `σ²/h²`.
pub fn apply_additive_noise<R: Rng + ?Sized>(clean: &[f64], spec: &NoiseSpec, h: f64, rng: &mut R) -> Vec<f64> {
    let sd = spec.sigma / h;
    let innovation_sd = (1.0 - spec.rho * spec.rho).sqrt() * sd;
    let mut eta = 0.0;
    clean
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let xi: f64 = StandardNormal.sample(rng);
            eta = if j == 0 { sd * xi } else { spec.rho * eta + innovation_sd * xi };
            u + eta
        })
        .collect()
}

/// Euler–Maruyama path of the stochastic membrane equation driven by the
/// given Brownian increments; `v` is advanced by explicit Euler.
pub(crate) fn em_path(params: &DynParams, cfg: &SimConfig, beta: f64, dw: &[f64]) -> Result<Vec<f64>> {
    let h = cfg.step();
    let (mut y, mut v) = (cfg.u0, cfg.v0);
    let mut out = Vec::with_capacity(dw.len());
    for (j, w) in dw.iter().enumerate() {
        let (mu, dv) = rhs(y, v, params, cfg.z);
        y = y + h * mu + beta * w;
        v += h * dv;
        check_finite(j + 1, y, v)?;
        out.push(y);
    }
    Ok(out)
}

/// Intrinsic-noise observation `Y(t_1), …, Y(t_{n_t})`.
pub fn simulate_intrinsic<R: Rng + ?Sized>(
    params: &DynParams,
    spec: &NoiseSpec,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    cfg.validate()?;
    let sqrt_h = cfg.step().sqrt();
    let dw: Vec<f64> = (0..cfg.n_t)
        .map(|_| {
            let xi: f64 = StandardNormal.sample(rng);
            sqrt_h * xi
        })
        .collect();
    em_path(params, cfg, spec.beta, &dw)
}

/// Noisy observation under `spec.kind`.
pub fn make_observation<R: Rng + ?Sized>(
    params: &DynParams,
    spec: &NoiseSpec,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match spec.kind {
        NoiseKind::Additive => {
            let clean = parameter_to_observation(params, cfg)?;
            Ok(apply_additive_noise(&clean, spec, cfg.step(), rng))
        }
        NoiseKind::Intrinsic => simulate_intrinsic(params, spec, cfg, rng),
        NoiseKind::Combined => {
            let y = simulate_intrinsic(params, spec, cfg, rng)?;
            Ok(apply_additive_noise(&y, spec, cfg.step(), rng))
        }
    }
}
