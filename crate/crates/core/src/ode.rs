//! FitzHugh–Nagumo forward model.
//!
//! The state `(u, v)` obeys
//!
//! ```text
//! du/dt =  θ2 (u − u³/3 + v + z)
//! dv/dt = −(u − θ0 + θ1 v) / θ2
//! ```
//!
//! and is integrated with Heun's method (explicit trapezoidal RK2) on a
//! uniform grid `t_j = j·h`, `h = τ / n_t`.

use crate::error::{Error, Result};

/// Magnitude beyond which a trajectory is considered to have blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

/// The three ODE parameters `θ = (θ0, θ1, θ2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynParams {
    pub theta0: f64,
    pub theta1: f64,
    /// Time-scale separation; must be positive.
    pub theta2: f64,
}

impl DynParams {
    pub const fn new(theta0: f64, theta1: f64, theta2: f64) -> Self {
        Self { theta0, theta1, theta2 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.theta0, self.theta1, self.theta2]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.to_array().iter().all(|x| x.is_finite());
        if !finite || self.theta2 <= 0.0 {
            return Err(Error::Config(format!("invalid dynamical parameters {self:?}")));
        }
        Ok(())
    }
}

/// Time grid, stimulus, and initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Final time in ms.
    pub tau: f64,
    pub n_t: usize,
    /// Constant stimulus.
    pub z: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { tau: 200.0, n_t: 2000, z: -0.4, u0: -1.0, v0: 1.0 }
    }
}

impl SimConfig {
    pub fn step(&self) -> f64 {
        self.tau / self.n_t as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("invalid time grid tau={} n_t={}", self.tau, self.n_t)));
        }
        if !(self.z.is_finite() && self.u0.is_finite() && self.v0.is_finite()) {
            return Err(Error::Config("non-finite stimulus or initial condition".into()));
        }
        Ok(())
    }
}

/// State time series on the uniform grid, `n_t + 1` entries per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

/// Right-hand side of the FitzHugh–Nagumo system.
#[inline]
pub(crate) fn rhs(u: f64, v: f64, p: &DynParams, z: f64) -> (f64, f64) {
    let du = p.theta2 * (u - u * u * u / 3.0 + v + z);
    let dv = -(u - p.theta0 + p.theta1 * v) / p.theta2;
    (du, dv)
}

#[inline]
pub(crate) fn check_finite(step: usize, u: f64, v: f64) -> Result<()> {
    if u.is_finite() && v.is_finite() && u.abs() <= BLOW_UP_THRESHOLD && v.abs() <= BLOW_UP_THRESHOLD {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// One Heun step from `(u, v)`.
#[inline]
pub(crate) fn heun_step(u: f64, v: f64, p: &DynParams, z: f64, h: f64) -> (f64, f64) {
    let (k1u, k1v) = rhs(u, v, p, z);
    let (k2u, k2v) = rhs(u + h * k1u, v + h * k1v, p, z);
    (u + 0.5 * h * (k1u + k2u), v + 0.5 * h * (k1v + k2v))
}

/// Integrate the FitzHugh–Nagumo system with Heun's method.
pub fn simulate_fhn(params: &DynParams, cfg: &SimConfig) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    let h = cfg.step();
    let mut u = Vec::with_capacity(cfg.n_t + 1);
    let mut v = Vec::with_capacity(cfg.n_t + 1);
    let (mut uc, mut vc) = (cfg.u0, cfg.v0);
    u.push(uc);
    v.push(vc);
    for j in 1..=cfg.n_t {
        (uc, vc) = heun_step(uc, vc, params, cfg.z, h);
        check_finite(j, uc, vc)?;
        u.push(uc);
        v.push(vc);
    }
    Ok(Trajectory { u, v, h })
}

/// Integrate with explicit Euler; the zero-diffusion limit of the intrinsic-noise integrator.
pub fn simulate_fhn_euler(params: &DynParams, cfg: &SimConfig) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    let h = cfg.step();
    let mut u = Vec::with_capacity(cfg.n_t + 1);
    let mut v = Vec::with_capacity(cfg.n_t + 1);
    let (mut uc, mut vc) = (cfg.u0, cfg.v0);
    u.push(uc);
    v.push(vc);
    for j in 1..=cfg.n_t {
        let (du, dv) = rhs(uc, vc, params, cfg.z);
        uc += h * du;
        vc += h * dv;
        check_finite(j, uc, vc)?;
        u.push(uc);
        v.push(vc);
    }
    Ok(Trajectory { u, v, h })
}

/// The observed membrane potential `u(t_1), …, u(t_{n_t})`.
pub fn parameter_to_observation(params: &DynParams, cfg: &SimConfig) -> Result<Vec<f64>> {
    let mut traj = simulate_fhn(params, cfg)?;
    traj.u.remove(0);
    Ok(traj.u)
}
