//! Laplace posterior covariance and batch screening of degenerate Hessians.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::adjoint::Hessian3;
use crate::error::{Error, Result};

/// `Γ_post ≈ H⁻¹`; symmetric positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorCov {
    pub gamma: Matrix3<f64>,
}

/// Direct inverse of the Hessian, symmetrized and checked for positive definiteness.
pub fn posterior_covariance(h: &Hessian3) -> Result<PosteriorCov> {
    let eig = SymmetricEigen::new(h.entries).eigenvalues;
    if !(eig.min() > 0.0) {
        return Err(Error::NotSpd { min_eigenvalue: eig.min() });
    }
    let inv = h.entries.try_inverse().ok_or(Error::NotSpd { min_eigenvalue: eig.min() })?;
    let gamma = (inv + inv.transpose()) * 0.5;
    let min = SymmetricEigen::new(gamma).eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotSpd { min_eigenvalue: min });
    }
    Ok(PosteriorCov { gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    /// At least one eigenvalue `≤ 0`.
    NegativeDefinite,
    /// `s1` above the upper whisker or `s3` below the lower whisker.
    IllConditioned,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::NegativeDefinite => "negative_definite",
            Verdict::IllConditioned => "ill_conditioned",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Verdict::Accepted => 0,
            Verdict::NegativeDefinite => 1,
            Verdict::IllConditioned => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Verdict::Accepted),
            1 => Ok(Verdict::NegativeDefinite),
            2 => Ok(Verdict::IllConditioned),
            _ => Err(Error::Format(format!("unknown verdict code {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianQuality {
    pub verdict: Verdict,
    /// Descending, `s1 ≥ s2 ≥ s3`.
    pub singular_values: [f64; 3],
}

/// Whisker bounds `(Q1 − 1.5 IQR, Q3 + 1.5 IQR)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Whiskers {
    pub lower: f64,
    pub upper: f64,
}

impl Whiskers {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = percentile(&sorted, 25.0);
        let q3 = percentile(&sorted, 75.0);
        let iqr = q3 - q1;
        Self { lower: q1 - 1.5 * iqr, upper: q3 + 1.5 * iqr }
    }
}

/// Linear-interpolation percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn singular_values(m: &Matrix3<f64>) -> [f64; 3] {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    [s[0], s[1], s[2]]
}

/// Screen a batch. Whiskers of `s1` and `s3` are computed over the whole batch,
/// so the verdicts do not depend on sample order.
pub fn screen_hessians(hs: &[Hessian3]) -> Result<Vec<HessianQuality>> {
    if hs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let svs: Vec<[f64; 3]> = hs.iter().map(|h| singular_values(&h.entries)).collect();
    let top = Whiskers::from_values(&svs.iter().map(|s| s[0]).collect::<Vec<_>>());
    let bottom = Whiskers::from_values(&svs.iter().map(|s| s[2]).collect::<Vec<_>>());
    Ok(hs
        .iter()
        .zip(svs)
        .map(|(h, s)| {
            let verdict = if !(SymmetricEigen::new(h.entries).eigenvalues.min() > 0.0) {
                Verdict::NegativeDefinite
            } else if s[0] > top.upper || s[2] < bottom.lower {
                Verdict::IllConditioned
            } else {
                Verdict::Accepted
            };
            HessianQuality { verdict, singular_values: s }
        })
        .collect())
}
