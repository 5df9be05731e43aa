//! Adjoint gradients and Hessian-vector products of the negative log posterior.
//!
//! Derivatives are taken of the *discrete* objective: the adjoint, incremental
//! state, and incremental adjoint recursions are the exact transposes and
//! linearizations of the Heun steps used by [`simulate_fhn`]. They are
//! RK2-structured backward sweeps that reuse the forward stage values, so
//! gradients and Hessians agree with finite differences of [`neg_log_posterior`]
//! to round-off rather than to `O(h²)`.
//!
//! Internally the parameters are treated as extra state components with zero
//! time derivative, `X = (u, v, θ0, θ1, θ2)`. The θ-block of the augmented
//! adjoint accumulates the time integral of `Qᵀ(λ, ν)`.
//!
//! [`neg_log_posterior`]: crate::objective::neg_log_posterior

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::objective::{LikelihoodConfig, PriorConfig};
use crate::ode::{rhs, simulate_fhn, DynParams, SimConfig, Trajectory};

/// Relative asymmetry tolerated before a Hessian is flagged.
pub const SYMMETRY_TOLERANCE: f64 = 1e-3;

type Aug = [f64; 5];

/// Frozen evaluation point of the vector field.
#[derive(Clone, Copy)]
struct Point<'a> {
    u: f64,
    v: f64,
    p: &'a DynParams,
    z: f64,
}

impl Point<'_> {
    /// `J_G · d` restricted to the `(u, v)` rows.
    #[inline]
    fn jvp(&self, d: &Aug) -> [f64; 2] {
        let (u, v, p) = (self.u, self.v, self.p);
        let (t1, t2) = (p.theta1, p.theta2);
        let c = u - u * u * u / 3.0 + v + self.z;
        let r = u - p.theta0 + t1 * v;
        [
            t2 * (1.0 - u * u) * d[0] + t2 * d[1] + c * d[4],
            (-d[0] - t1 * d[1] + d[2] - v * d[3]) / t2 + r / (t2 * t2) * d[4],
        ]
    }

    /// `J_Gᵀ · a` for a cotangent on `(u, v)`.
    #[inline]
    fn vjp(&self, a: [f64; 2]) -> Aug {
        let (u, v, p) = (self.u, self.v, self.p);
        let (t1, t2) = (p.theta1, p.theta2);
        let c = u - u * u * u / 3.0 + v + self.z;
        let r = u - p.theta0 + t1 * v;
        [
            t2 * (1.0 - u * u) * a[0] - a[1] / t2,
            t2 * a[0] - t1 / t2 * a[1],
            a[1] / t2,
            -v / t2 * a[1],
            c * a[0] + r / (t2 * t2) * a[1],
        ]
    }

    /// `Σ_k a_k ∇²G_k · d`.
    #[inline]
    fn hvp(&self, a: [f64; 2], d: &Aug) -> Aug {
        let (u, v, p) = (self.u, self.v, self.p);
        let (t1, t2) = (p.theta1, p.theta2);
        let r = u - p.theta0 + t1 * v;
        let i2 = 1.0 / (t2 * t2);
        let [a0, a1] = a;
        [
            a0 * (-2.0 * t2 * u * d[0] + (1.0 - u * u) * d[4]) + a1 * d[4] * i2,
            a0 * d[4] + a1 * (-d[3] / t2 + t1 * d[4] * i2),
            -a1 * d[4] * i2,
            a1 * (-d[1] / t2 + v * d[4] * i2),
            a0 * ((1.0 - u * u) * d[0] + d[1]) + a1 * i2 * (d[0] + t1 * d[1] - d[2] + v * d[3] - 2.0 * r * d[4] / t2),
        ]
    }
}

/// Linearized and dual variables may legitimately grow large; only NaN/inf is a failure.
#[inline]
fn check_finite(step: usize, a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

#[inline]
fn axpy(y: &mut Aug, a: f64, x: &Aug) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Forward trajectory with Heun predictor stages and the misfit forcing.
struct Linearization<'a> {
    params: DynParams,
    cfg: &'a SimConfig,
    traj: Trajectory,
    /// Predictor stage `x_n + h G(x_n)`, one per step.
    stage_u: Vec<f64>,
    stage_v: Vec<f64>,
    /// `γ h (u_j − y_j)` at `j = 1..=n_t`, stored at index `j`.
    forcing: Vec<f64>,
    weight: f64,
}

impl<'a> Linearization<'a> {
    fn new(
        params: &DynParams,
        traj: Trajectory,
        y_obs: &[f64],
        like: &LikelihoodConfig,
        cfg: &'a SimConfig,
    ) -> Result<Self> {
        if traj.len() != cfg.n_t + 1 || y_obs.len() != cfg.n_t {
            return Err(Error::Config(format!(
                "trajectory length {} / observation length {} inconsistent with n_t = {}",
                traj.len(),
                y_obs.len(),
                cfg.n_t
            )));
        }
        let h = cfg.step();
        let mut stage_u = Vec::with_capacity(cfg.n_t);
        let mut stage_v = Vec::with_capacity(cfg.n_t);
        for n in 0..cfg.n_t {
            let (du, dv) = rhs(traj.u[n], traj.v[n], params, cfg.z);
            stage_u.push(traj.u[n] + h * du);
            stage_v.push(traj.v[n] + h * dv);
        }
        let weight = like.gamma * h;
        let mut forcing = vec![0.0; cfg.n_t + 1];
        for j in 1..=cfg.n_t {
            forcing[j] = weight * (traj.u[j] - y_obs[j - 1]);
        }
        Ok(Self { params: *params, cfg, traj, stage_u, stage_v, forcing, weight })
    }

    fn point(&self, n: usize) -> Point<'_> {
        Point { u: self.traj.u[n], v: self.traj.v[n], p: &self.params, z: self.cfg.z }
    }

    fn stage(&self, n: usize) -> Point<'_> {
        Point { u: self.stage_u[n], v: self.stage_v[n], p: &self.params, z: self.cfg.z }
    }

    /// `J_Ψ(X_n)ᵀ a` for the Heun map `Ψ`; the θ-block of the result is the increment only.
    fn step_transpose(&self, n: usize, a: [f64; 2]) -> Aug {
        let h = self.cfg.step();
        let x = self.point(n);
        let mut b = self.stage(n).vjp(a);
        b.iter_mut().for_each(|bi| *bi *= 0.5 * h);
        let mut out = [a[0], a[1], 0.0, 0.0, 0.0];
        axpy(&mut out, 0.5 * h, &x.vjp(a));
        axpy(&mut out, 1.0, &b);
        axpy(&mut out, h, &x.vjp([b[0], b[1]]));
        out
    }

    /// Directional derivative of `J_Ψ(X)ᵀ a` at `X_n` along `d`.
    fn step_transpose_derivative(&self, n: usize, a: [f64; 2], d: &Aug) -> Aug {
        let h = self.cfg.step();
        let x = self.point(n);
        let xs = self.stage(n);
        let mut b = xs.vjp(a);
        b.iter_mut().for_each(|bi| *bi *= 0.5 * h);
        let j = x.jvp(d);
        let d_stage = [d[0] + h * j[0], d[1] + h * j[1], d[2], d[3], d[4]];
        let mut db = xs.hvp(a, &d_stage);
        db.iter_mut().for_each(|x| *x *= 0.5 * h);
        let mut out = x.hvp(a, d);
        out.iter_mut().for_each(|x| *x *= 0.5 * h);
        axpy(&mut out, 1.0, &db);
        axpy(&mut out, h, &x.hvp([b[0], b[1]], d));
        axpy(&mut out, h, &x.vjp([db[0], db[1]]));
        out
    }

    fn adjoint(&self) -> Result<AdjointState> {
        let n_t = self.cfg.n_t;
        let mut lambda = vec![0.0; n_t + 1];
        let mut nu = vec![0.0; n_t + 1];
        let mut sens = [0.0; 3];
        for n in (0..n_t).rev() {
            let w = [lambda[n + 1] + self.forcing[n + 1], nu[n + 1]];
            let out = self.step_transpose(n, w);
            check_finite(n, out[0], out[1])?;
            lambda[n] = out[0];
            nu[n] = out[1];
            for k in 0..3 {
                sens[k] += out[2 + k];
            }
        }
        Ok(AdjointState { lambda, nu, misfit_gradient: sens })
    }

    fn incremental_state(&self, dir: [f64; 3]) -> Result<IncrementalState> {
        let h = self.cfg.step();
        let n_t = self.cfg.n_t;
        let mut u = vec![0.0; n_t + 1];
        let mut v = vec![0.0; n_t + 1];
        for n in 0..n_t {
            let d = [u[n], v[n], dir[0], dir[1], dir[2]];
            let j1 = self.point(n).jvp(&d);
            let d_stage = [d[0] + h * j1[0], d[1] + h * j1[1], dir[0], dir[1], dir[2]];
            let j2 = self.stage(n).jvp(&d_stage);
            u[n + 1] = u[n] + 0.5 * h * (j1[0] + j2[0]);
            v[n + 1] = v[n] + 0.5 * h * (j1[1] + j2[1]);
            check_finite(n + 1, u[n + 1], v[n + 1])?;
        }
        Ok(IncrementalState { u, v })
    }

    fn incremental_adjoint(
        &self,
        adj: &AdjointState,
        inc: &IncrementalState,
        dir: [f64; 3],
    ) -> Result<IncrementalAdjoint> {
        let n_t = self.cfg.n_t;
        let mut lambda = vec![0.0; n_t + 1];
        let mut nu = vec![0.0; n_t + 1];
        let mut sens = [0.0; 3];
        for n in (0..n_t).rev() {
            let w = [adj.lambda[n + 1] + self.forcing[n + 1], adj.nu[n + 1]];
            let w_inc = [lambda[n + 1] + self.weight * inc.u[n + 1], nu[n + 1]];
            let d = [inc.u[n], inc.v[n], dir[0], dir[1], dir[2]];
            let mut out = self.step_transpose(n, w_inc);
            axpy(&mut out, 1.0, &self.step_transpose_derivative(n, w, &d));
            check_finite(n, out[0], out[1])?;
            lambda[n] = out[0];
            nu[n] = out[1];
            for k in 0..3 {
                sens[k] += out[2 + k];
            }
        }
        Ok(IncrementalAdjoint { lambda, nu, misfit_hessian_action: sens })
    }
}

/// Dual variables `(λ, ν)` of the `u`- and `v`-equations; zero at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    misfit_gradient: [f64; 3],
}

impl AdjointState {
    /// Gradient of the misfit term with respect to θ, accumulated during the sweep.
    pub fn misfit_gradient(&self) -> [f64; 3] {
        self.misfit_gradient
    }
}

/// Incremental state `(ũ, ṽ)`: the directional derivative of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Incremental adjoint `(λ̃, ν̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalAdjoint {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    misfit_hessian_action: [f64; 3],
}

impl IncrementalAdjoint {
    /// Misfit part of the Hessian applied to the direction.
    pub fn misfit_hessian_action(&self) -> [f64; 3] {
        self.misfit_hessian_action
    }
}

pub fn solve_adjoint(
    params: &DynParams,
    traj: &Trajectory,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    cfg: &SimConfig,
) -> Result<AdjointState> {
    Linearization::new(params, traj.clone(), y_obs, like, cfg)?.adjoint()
}

pub fn solve_incremental_state(
    params: &DynParams,
    traj: &Trajectory,
    dir: [f64; 3],
    cfg: &SimConfig,
) -> Result<IncrementalState> {
    let like = LikelihoodConfig { gamma: 0.0 };
    let zeros = vec![0.0; cfg.n_t];
    Linearization::new(params, traj.clone(), &zeros, &like, cfg)?.incremental_state(dir)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_incremental_adjoint(
    params: &DynParams,
    traj: &Trajectory,
    adj: &AdjointState,
    inc: &IncrementalState,
    dir: [f64; 3],
    y_obs: &[f64],
    like: &LikelihoodConfig,
    cfg: &SimConfig,
) -> Result<IncrementalAdjoint> {
    Linearization::new(params, traj.clone(), y_obs, like, cfg)?.incremental_adjoint(adj, inc, dir)
}

/// Reusable first-order information at one parameter point; cheap repeated Hessian actions.
pub struct CurvatureContext<'a> {
    lin: Linearization<'a>,
    prior: PriorConfig,
    adjoint: AdjointState,
}

impl<'a> CurvatureContext<'a> {
    pub fn new(
        params: &DynParams,
        y_obs: &[f64],
        like: &LikelihoodConfig,
        prior: &PriorConfig,
        cfg: &'a SimConfig,
    ) -> Result<Self> {
        let traj = simulate_fhn(params, cfg)?;
        let lin = Linearization::new(params, traj, y_obs, like, cfg)?;
        let adjoint = lin.adjoint()?;
        Ok(Self { lin, prior: *prior, adjoint })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.lin.traj
    }

    pub fn adjoint(&self) -> &AdjointState {
        &self.adjoint
    }

    pub fn gradient(&self) -> [f64; 3] {
        let l = self.prior.precision();
        let theta = self.lin.params.to_array();
        let g = self.adjoint.misfit_gradient;
        [0, 1, 2].map(|k| g[k] + l[k] * (theta[k] - self.prior.mean[k]))
    }

    pub fn matvec(&self, dir: [f64; 3]) -> Result<[f64; 3]> {
        let inc = self.lin.incremental_state(dir)?;
        let inc_adj = self.lin.incremental_adjoint(&self.adjoint, &inc, dir)?;
        let l = self.prior.precision();
        let hd = inc_adj.misfit_hessian_action;
        Ok([0, 1, 2].map(|k| hd[k] + l[k] * dir[k]))
    }

    pub fn hessian(&self) -> Result<Hessian3> {
        let mut raw = Matrix3::zeros();
        for k in 0..3 {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            raw.set_column(k, &Vector3::from(self.matvec(e)?));
        }
        Ok(Hessian3::from_raw(raw))
    }
}

/// Gradient of the negative log posterior.
pub fn gradient(
    params: &DynParams,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
) -> Result<[f64; 3]> {
    Ok(CurvatureContext::new(params, y_obs, like, prior, cfg)?.gradient())
}

/// Hessian of the negative log posterior applied to `dir`.
pub fn hessian_matvec(
    params: &DynParams,
    y_obs: &[f64],
    dir: [f64; 3],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
) -> Result<[f64; 3]> {
    CurvatureContext::new(params, y_obs, like, prior, cfg)?.matvec(dir)
}

/// Assemble the 3×3 Hessian column by column from matvecs against the unit vectors.
pub fn assemble_hessian(
    params: &DynParams,
    y_obs: &[f64],
    like: &LikelihoodConfig,
    prior: &PriorConfig,
    cfg: &SimConfig,
) -> Result<Hessian3> {
    CurvatureContext::new(params, y_obs, like, prior, cfg)?.hessian()
}

/// Symmetrized Hessian with the relative asymmetry measured before symmetrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian3 {
    pub entries: Matrix3<f64>,
    /// `‖H − Hᵀ‖_F / ‖H‖_F` of the raw matrix.
    pub asymmetry: f64,
}

impl Hessian3 {
    pub fn from_raw(raw: Matrix3<f64>) -> Self {
        let norm = raw.norm();
        let asymmetry = if norm > 0.0 { (raw - raw.transpose()).norm() / norm } else { 0.0 };
        Self { entries: (raw + raw.transpose()) * 0.5, asymmetry }
    }

    pub fn is_asymmetric(&self) -> bool {
        self.asymmetry > SYMMETRY_TOLERANCE
    }

    /// Fails with [`Error::AsymmetryExceeded`] when the raw matrix was too asymmetric.
    pub fn checked(self) -> Result<Self> {
        if self.is_asymmetric() {
            Err(Error::AsymmetryExceeded { asymmetry: self.asymmetry, tolerance: SYMMETRY_TOLERANCE })
        } else {
            Ok(self)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{apply_additive_noise, NoiseSpec, RngStream};
    use crate::objective::neg_log_posterior;
    use crate::ode::parameter_to_observation;

    fn short_cfg() -> SimConfig {
        SimConfig { tau: 40.0, n_t: 400, ..SimConfig::default() }
    }

    fn noisy_obs(truth: &DynParams, cfg: &SimConfig, seed: u64) -> Vec<f64> {
        let clean = parameter_to_observation(truth, cfg).unwrap();
        apply_additive_noise(&clean, &NoiseSpec::additive(0.8, 0.07), cfg.step(), &mut RngStream::new(seed, 0).rng())
    }

    #[test]
    fn exact_data_gives_zero_adjoint() {
        let cfg = short_cfg();
        let p = DynParams::new(0.3, 0.5, 3.1);
        let traj = simulate_fhn(&p, &cfg).unwrap();
        let y = traj.u[1..].to_vec();
        let adj = solve_adjoint(&p, &traj, &y, &LikelihoodConfig::default(), &cfg).unwrap();
        assert!(adj.lambda.iter().chain(&adj.nu).all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn final_conditions_are_zero() {
        let cfg = short_cfg();
        let p = DynParams::new(0.3, 0.5, 3.1);
        let traj = simulate_fhn(&p, &cfg).unwrap();
        let y = noisy_obs(&DynParams::new(0.5, 0.2, 3.6), &cfg, 1);
        let adj = solve_adjoint(&p, &traj, &y, &LikelihoodConfig::default(), &cfg).unwrap();
        assert_eq!((adj.lambda[cfg.n_t], adj.nu[cfg.n_t]), (0.0, 0.0));
        assert!(adj.lambda.iter().any(|x| *x != 0.0));
    }

    #[test]
    fn gradient_vanishes_at_prior_mean_with_exact_data() {
        let cfg = short_cfg();
        let prior = PriorConfig::default();
        let p = DynParams::from_array(prior.mean);
        let y = parameter_to_observation(&p, &cfg).unwrap();
        let g = gradient(&p, &y, &LikelihoodConfig::default(), &prior, &cfg).unwrap();
        assert!(g.iter().all(|x| x.abs() <= 1e-10), "{g:?}");
    }

    #[test]
    fn prior_only_gradient_is_exact() {
        let cfg = short_cfg();
        let prior = PriorConfig::default();
        let p = DynParams::new(0.1, 0.9, 2.7);
        let y = noisy_obs(&p, &cfg, 2);
        let g = gradient(&p, &y, &LikelihoodConfig { gamma: 0.0 }, &prior, &cfg).unwrap();
        let l = prior.precision();
        let expected = [l[0] * (0.1 - 0.4), l[1] * (0.9 - 0.4), l[2] * (2.7 - 3.4)];
        assert_eq!(g, expected);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = short_cfg();
        let prior = PriorConfig::default();
        let like = LikelihoodConfig::default();
        let y = noisy_obs(&DynParams::new(0.4, 0.4, 3.4), &cfg, 3);
        let p = DynParams::new(0.45, 0.35, 3.3);
        let g = gradient(&p, &y, &like, &prior, &cfg).unwrap();
        for k in 0..3 {
            let mut a = p.to_array();
            let mut b = p.to_array();
            a[k] += 1e-5;
            b[k] -= 1e-5;
            let fd = (neg_log_posterior(&DynParams::from_array(a), &y, &like, &prior, &cfg).unwrap()
                - neg_log_posterior(&DynParams::from_array(b), &y, &like, &prior, &cfg).unwrap())
                / 2e-5;
            assert!((fd - g[k]).abs() <= 1e-4 * fd.abs(), "k={k} fd={fd} adj={}", g[k]);
        }
    }

    #[test]
    fn incremental_state_zero_direction() {
        let cfg = short_cfg();
        let p = DynParams::new(0.3, 0.5, 3.1);
        let traj = simulate_fhn(&p, &cfg).unwrap();
        let inc = solve_incremental_state(&p, &traj, [0.0; 3], &cfg).unwrap();
        assert!(inc.u.iter().chain(&inc.v).all(|x| *x == 0.0));
        let inc = solve_incremental_state(&p, &traj, [1.0, -2.0, 0.5], &cfg).unwrap();
        assert_eq!((inc.u[0], inc.v[0]), (0.0, 0.0));
    }

    #[test]
    fn incremental_state_is_directional_derivative() {
        let cfg = short_cfg();
        let p = DynParams::new(0.3, 0.5, 3.1);
        let dir = [0.3, -0.7, 0.4];
        let traj = simulate_fhn(&p, &cfg).unwrap();
        let inc = solve_incremental_state(&p, &traj, dir, &cfg).unwrap();
        let eps = 1e-5;
        let shift = |s: f64| DynParams::from_array([0, 1, 2].map(|k| p.to_array()[k] + s * dir[k]));
        let fp = parameter_to_observation(&shift(eps), &cfg).unwrap();
        let fm = parameter_to_observation(&shift(-eps), &cfg).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = fd.iter().zip(&inc.u[1..]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-3 * scale, "{err} vs {scale}");
    }

    #[test]
    fn incremental_adjoint_zero_direction() {
        let cfg = short_cfg();
        let p = DynParams::new(0.3, 0.5, 3.1);
        let traj = simulate_fhn(&p, &cfg).unwrap();
        let y = noisy_obs(&p, &cfg, 4);
        let like = LikelihoodConfig::default();
        let adj = solve_adjoint(&p, &traj, &y, &like, &cfg).unwrap();
        let inc = solve_incremental_state(&p, &traj, [0.0; 3], &cfg).unwrap();
        let ia = solve_incremental_adjoint(&p, &traj, &adj, &inc, [0.0; 3], &y, &like, &cfg).unwrap();
        assert!(ia.lambda.iter().chain(&ia.nu).all(|x| *x == 0.0));
        let inc = solve_incremental_state(&p, &traj, [0.0, 1.0, 0.0], &cfg).unwrap();
        let ia = solve_incremental_adjoint(&p, &traj, &adj, &inc, [0.0, 1.0, 0.0], &y, &like, &cfg).unwrap();
        assert_eq!((ia.lambda[cfg.n_t], ia.nu[cfg.n_t]), (0.0, 0.0));
    }

    #[test]
    fn prior_only_hessian() {
        let cfg = short_cfg();
        let prior = PriorConfig::default();
        let p = DynParams::new(0.2, 0.1, 4.0);
        let y = noisy_obs(&p, &cfg, 5);
        let like = LikelihoodConfig { gamma: 0.0 };
        let h = assemble_hessian(&p, &y, &like, &prior, &cfg).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(1.0 / 0.09, 1.0 / 0.16, 1.0 / 0.16));
        assert!((h.entries - expected).norm() <= 1e-12);
        let hv = hessian_matvec(&p, &y, [1.0, 2.0, 3.0], &like, &prior, &cfg).unwrap();
        for (a, b) in hv.iter().zip([1.0 / 0.09, 2.0 / 0.16, 3.0 / 0.16]) {
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn matvec_is_linear_and_symmetric() {
        let cfg = short_cfg();
        let prior = PriorConfig::default();
        let like = LikelihoodConfig::default();
        let y = noisy_obs(&DynParams::new(0.6, 0.3, 2.8), &cfg, 6);
        let ctx = CurvatureContext::new(&DynParams::new(0.55, 0.32, 2.9), &y, &like, &prior, &cfg).unwrap();
        let d1 = [0.2, -0.5, 0.9];
        let d2 = [-1.1, 0.3, 0.25];
        let (a, b) = (1.7, -0.6);
        let combo = [0, 1, 2].map(|k| a * d1[k] + b * d2[k]);
        let h1 = ctx.matvec(d1).unwrap();
        let h2 = ctx.matvec(d2).unwrap();
        let hc = ctx.matvec(combo).unwrap();
        let scale = h1.iter().chain(&h2).fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..3 {
            assert!((hc[k] - (a * h1[k] + b * h2[k])).abs() <= 1e-10 * scale);
        }
        let dot = |x: &[f64; 3], y: &[f64; 3]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        assert!((dot(&h1, &d2) - dot(&d1, &h2)).abs() <= 1e-8 * scale);
    }

    #[test]
    fn hessian_spd_at_truth_with_exact_data() {
        let cfg = short_cfg();
        let p = DynParams::new(0.4, 0.4, 3.4);
        let y = parameter_to_observation(&p, &cfg).unwrap();
        let h = assemble_hessian(&p, &y, &LikelihoodConfig::default(), &PriorConfig::default(), &cfg).unwrap();
        assert!(h.entries.symmetric_eigenvalues().min() > 0.0);
        assert!(h.asymmetry <= 1e-10);
        assert_eq!(h.entries, h.entries.transpose());
    }

    #[test]
    fn asymmetry_flag() {
        let raw = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let h = Hessian3::from_raw(raw);
        assert!(h.is_asymmetric());
        assert!(matches!(h.checked(), Err(Error::AsymmetryExceeded { .. })));
        assert_eq!(h.entries[(0, 1)], 0.25);
    }
}
