//! Log-Euclidean maps between 3×3 SPD matrices and trainable 6-vectors.
//!
//! Covariances are sent to the tangent space at the identity with the matrix
//! logarithm, packed into six numbers with `√2` on the off-diagonal entries so
//! that the Euclidean norm of the packing equals the Frobenius norm of the
//! matrix, and recovered with the matrix exponential.

use std::f64::consts::SQRT_2;

use nalgebra::{Cholesky, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a matrix is not treated as SPD.
pub const SPD_TOLERANCE: f64 = 1e-12;

/// Packed symmetric matrix `(w00, √2 w01, √2 w02, w11, √2 w12, w22)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVec(pub [f64; 6]);

impl TangentVec {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

fn spectral_map(m: &Matrix3<f64>, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(eig.eigenvectors * d * eig.eigenvectors.transpose()))
}

/// Matrix logarithm of an SPD matrix.
pub fn log_at_identity(sigma: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(symmetrize(sigma));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > SPD_TOLERANCE * max.abs()) || !min.is_finite() || !max.is_finite() {
        return Err(Error::NotSpd { min_eigenvalue: min });
    }
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(f64::ln));
    Ok(symmetrize(&(eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Matrix exponential of a symmetric matrix; SPD by construction.
pub fn exp_at_identity(v: &Matrix3<f64>) -> Matrix3<f64> {
    spectral_map(v, f64::exp)
}

pub fn vec(w: &Matrix3<f64>) -> TangentVec {
    TangentVec([w[(0, 0)], SQRT_2 * w[(0, 1)], SQRT_2 * w[(0, 2)], w[(1, 1)], SQRT_2 * w[(1, 2)], w[(2, 2)]])
}

pub fn devec(t: &TangentVec) -> Matrix3<f64> {
    let [a, b, c, d, e, f] = t.0;
    let (b, c, e) = (b / SQRT_2, c / SQRT_2, e / SQRT_2);
    Matrix3::new(a, b, c, b, d, e, c, e, f)
}

/// `vec(log Σ)`: the training label for a covariance.
pub fn covariance_to_tangent(sigma: &Matrix3<f64>) -> Result<TangentVec> {
    Ok(vec(&log_at_identity(sigma)?))
}

/// `exp(devec t)`: reconstruct an SPD covariance from a (predicted) label.
pub fn tangent_to_covariance(t: &TangentVec) -> Matrix3<f64> {
    exp_at_identity(&devec(t))
}

pub fn is_spd(m: &Matrix3<f64>) -> bool {
    Cholesky::new(*m).is_some()
}

/// Nearest SPD matrix after Higham: symmetrize, average with the symmetric
/// polar factor, then shift by multiples of the identity until Cholesky succeeds.
pub fn nearest_spd(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("non-finite matrix entries".into()));
    }
    let b = symmetrize(m);
    let svd = b.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Bug("SVD did not return V".into()))?;
    let polar = v_t.transpose() * Matrix3::from_diagonal(&svd.singular_values) * v_t;
    let mut a = symmetrize(&((b + polar) * 0.5));
    if is_spd(&a) {
        return Ok(a);
    }
    let spacing = f64::EPSILON * m.norm().max(f64::MIN_POSITIVE);
    for k in 1..=100 {
        let min_eig = SymmetricEigen::new(a).eigenvalues.min();
        let k = k as f64;
        a += Matrix3::identity() * (-min_eig * k * k + spacing);
        if is_spd(&a) {
            return Ok(a);
        }
    }
    Err(Error::Bug("nearest_spd did not converge in 100 iterations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn rel(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn random_spd(angles: [f64; 3], log_eigs: [f64; 3]) -> Matrix3<f64> {
        let r = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]).into_inner();
        r * Matrix3::from_diagonal(&Vector3::from(log_eigs).map(f64::exp)) * r.transpose()
    }

    #[test]
    fn log_closed_forms() {
        assert_eq!(log_at_identity(&Matrix3::identity()).unwrap(), Matrix3::zeros());
        let d = Matrix3::from_diagonal(&Vector3::new(E, E * E, E * E * E));
        let l = log_at_identity(&d).unwrap();
        assert!((l - Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0))).norm() <= 1e-14);
    }

    #[test]
    fn log_rejects_indefinite() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(log_at_identity(&m), Err(Error::NotSpd { .. })));
        assert!(log_at_identity(&Matrix3::zeros()).is_err());
    }

    #[test]
    fn exp_closed_forms() {
        assert!((exp_at_identity(&Matrix3::zeros()) - Matrix3::identity()).norm() <= 1e-15);
        let e = exp_at_identity(&Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)));
        assert!(rel(&e, &Matrix3::from_diagonal(&Vector3::new(E, E * E, E * E * E))) <= 1e-14);
    }

    #[test]
    fn vec_closed_forms() {
        assert_eq!(vec(&Matrix3::identity()).0, [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(vec(&Matrix3::repeat(1.0)).0, [1.0, SQRT_2, SQRT_2, 1.0, SQRT_2, 1.0]);
    }

    #[test]
    fn nearest_spd_fixed_point_and_repair() {
        let s = random_spd([0.3, -1.0, 2.0], [0.5, -1.0, 2.0]);
        assert!(rel(&nearest_spd(&s).unwrap(), &s) <= 1e-12);
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let r = nearest_spd(&d).unwrap();
        assert!(SymmetricEigen::new(r).eigenvalues.min() > 0.0);
    }

    proptest! {
        #[test]
        fn exp_is_positive(entries in prop::array::uniform6(-5.0f64..5.0)) {
            let m = devec(&TangentVec(entries));
            prop_assert!(SymmetricEigen::new(exp_at_identity(&m)).eigenvalues.min() > 0.0);
        }

        #[test]
        fn vec_preserves_frobenius_norm(entries in prop::array::uniform6(-10.0f64..10.0)) {
            let w = devec(&TangentVec(entries));
            let t = vec(&w);
            prop_assert!((t.norm() - w.norm()).abs() <= 1e-14 * w.norm().max(1e-300));
            // devec ∘ vec is exact up to one rounding of the √2 products
            let back = devec(&t);
            prop_assert!((back - w).norm() <= 4.0 * f64::EPSILON * w.norm());
        }

        #[test]
        fn log_exp_round_trip(
            angles in prop::array::uniform3(-3.0f64..3.0),
            log_eigs in prop::array::uniform3(-6.9f64..6.9),
        ) {
            // eigenvalue spread ≤ e^13.8 ≈ 1e6
            let s = random_spd(angles, log_eigs);
            let back = tangent_to_covariance(&covariance_to_tangent(&s).unwrap());
            prop_assert!(rel(&back, &s) <= 1e-10);
            let w = devec(&TangentVec([log_eigs[0], 0.3, -0.2, log_eigs[1], 0.1, log_eigs[2]]));
            let w2 = log_at_identity(&exp_at_identity(&w)).unwrap();
            prop_assert!(rel(&w2, &w) <= 1e-10);
        }

        #[test]
        fn nearest_spd_close_to_clipping_oracle(entries in prop::array::uniform9(-2.0f64..2.0)) {
            let m = Matrix3::from_row_slice(&entries);
            let b = symmetrize(&m);
            let eig = SymmetricEigen::new(b);
            prop_assume!(eig.eigenvalues.min() < 0.0);
            let clipped = eig.eigenvectors
                * Matrix3::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0)))
                * eig.eigenvectors.transpose();
            let r = nearest_spd(&m).unwrap();
            prop_assert!(is_spd(&r));
            let d_oracle = (b - clipped).norm();
            let d = (b - r).norm();
            prop_assert!(d <= 2.0 * d_oracle + 1e-12, "{} vs {}", d, d_oracle);
        }
    }
}
