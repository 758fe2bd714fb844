//! Binary inelastic collisions: kernels, post-collisional velocities,
//! dissipation rates and angular spreading.

mod kernel;
mod rates;

pub use kernel::{Angular, Intensity, KernelSpec, Restitution, StochasticLaw};
pub(crate) use kernel::uniform_sphere as kernel_uniform_sphere;
pub use rates::{
    angular_spreading, angular_spreading_at, dissipation_functional, dissipation_rate, integrate_over_sphere,
    Assumptions, DissipationEstimate, PairSumOptions, QuadratureConfig,
};

use thiserror::Error;

use crate::scalar::{dot, norm, norm2, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CollisionError {
    #[error("|z| = {norm} exceeds 1; the collision would create energy")]
    ZTooLarge { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sigma is not a unit vector (|sigma| = {norm})")]
    NotUnit { norm: f64 },
    #[error("quadrature did not converge: value {value}, residual {residual}")]
    Quadrature { value: f64, residual: f64 },
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
}

/// Post-collisional pair together with the inelasticity parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionOutcome<T> {
    pub v_prime: Vec<T>,
    pub v_star_prime: Vec<T>,
    pub z: Vec<T>,
    /// `½ (1 - |z|²) |u|²`, the drop of `|v|² + |v*|²`.
    pub energy_loss: T,
}

/// Slack allowed on `|z| ≤ 1` to absorb round-off in constructed `z`.
pub(crate) fn z_slack<T: Real>() -> T {
    T::c(64.0) * T::epsilon()
}

pub fn post_collisional<T: Real>(v: &[T], v_star: &[T], z: &[T]) -> Result<CollisionOutcome<T>, CollisionError> {
    let dim = v.len();
    for len in [v_star.len(), z.len()] {
        if len != dim {
            return Err(CollisionError::DimensionMismatch { expected: dim, got: len });
        }
    }
    let zn = norm(z);
    if zn > T::one() + z_slack() {
        return Err(CollisionError::ZTooLarge { norm: zn.to_f64_lossy() });
    }
    let mut vp = v.to_vec();
    let mut vsp = v_star.to_vec();
    let energy_loss = apply_collision(&mut vp, &mut vsp, z);
    Ok(CollisionOutcome { v_prime: vp, v_star_prime: vsp, z: z.to_vec(), energy_loss })
}

/// In-place form of [`post_collisional`] without validation. Returns the
/// energy loss. A zero relative velocity leaves both velocities untouched.
#[inline]
pub fn apply_collision<T: Real>(v: &mut [T], v_star: &mut [T], z: &[T]) -> T {
    let half = T::c(0.5);
    let mut u2 = T::zero();
    for (a, b) in v.iter().zip(v_star.iter()) {
        let d = *a - *b;
        u2 += d * d;
    }
    if u2 == T::zero() {
        return T::zero();
    }
    let un = u2.sqrt();
    for i in 0..v.len() {
        let mid = half * (v[i] + v_star[i]);
        let dz = half * un * z[i];
        v[i] = mid + dz;
        // Written as 2·mid − v' so v' + v'* reproduces v + v* as closely as possible.
        v_star[i] = mid - dz;
    }
    (half * (T::one() - norm2(z)) * u2).max(T::zero())
}

/// `z = (1-e) û/2 + (1+e) σ/2`; zero when `u = 0`.
pub fn z_from_sigma<T: Real>(u: &[T], sigma: &[T], e: T, z: &mut [T]) {
    let un = norm(u);
    let half = T::c(0.5);
    if un == T::zero() {
        z.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let a = half * (T::one() - e) / un;
    let b = half * (T::one() + e);
    for i in 0..z.len() {
        z[i] = a * u[i] + b * sigma[i];
    }
}

/// Collision written with the restitution coefficient and the direction σ:
/// `v' = v - (1+e)/4 (u - |u| σ)`.
pub fn visco_elastic_outcome<T: Real>(
    v: &[T],
    v_star: &[T],
    sigma: &[T],
    e: T,
) -> Result<CollisionOutcome<T>, CollisionError> {
    let dim = v.len();
    for len in [v_star.len(), sigma.len()] {
        if len != dim {
            return Err(CollisionError::DimensionMismatch { expected: dim, got: len });
        }
    }
    let sn = norm(sigma);
    if (sn - T::one()).abs() > T::c(1e-10) {
        return Err(CollisionError::NotUnit { norm: sn.to_f64_lossy() });
    }
    if !(T::zero()..=T::one()).contains(&e) {
        return Err(CollisionError::InvalidParameter(format!("restitution e = {e} outside [0, 1]")));
    }
    let u: Vec<T> = v.iter().zip(v_star).map(|(a, b)| *a - *b).collect();
    let un = norm(&u);
    let mut z = vec![T::zero(); dim];
    z_from_sigma(&u, sigma, e, &mut z);
    if un == T::zero() {
        return Ok(CollisionOutcome { v_prime: v.to_vec(), v_star_prime: v_star.to_vec(), z, energy_loss: T::zero() });
    }
    let k = (T::one() + e) * T::c(0.25);
    let mut vp = v.to_vec();
    let mut vsp = v_star.to_vec();
    for i in 0..dim {
        let w = k * (u[i] - un * sigma[i]);
        vp[i] -= w;
        vsp[i] += w;
    }
    let energy_loss = T::c(0.25) * (T::one() - e * e) * (un * un - un * dot(&u, sigma));
    Ok(CollisionOutcome { v_prime: vp, v_star_prime: vsp, z, energy_loss: energy_loss.max(T::zero()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_on_sticky() {
        let out = post_collisional(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0; 3]).unwrap();
        assert_eq!(out.v_prime, vec![0.0; 3]);
        assert_eq!(out.v_star_prime, vec![0.0; 3]);
        assert_eq!(out.energy_loss, 2.0);
    }

    #[test]
    fn equal_velocities_are_a_no_op() {
        let v = [0.3, -1.2, 2.0];
        let out = post_collisional(&v, &v, &[0.1, 0.2, -0.3]).unwrap();
        assert_eq!(out.v_prime, v.to_vec());
        assert_eq!(out.energy_loss, 0.0);
    }

    #[test]
    fn unit_z_is_elastic() {
        let out = post_collisional(&[1.0f64, 2.0], &[-0.5, 0.0], &[0.6, 0.8]).unwrap();
        assert!(out.energy_loss.abs() < 1e-15);
    }

    #[test]
    fn rejects_long_z() {
        let err = post_collisional(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.1]).unwrap_err();
        assert!(matches!(err, CollisionError::ZTooLarge { .. }));
    }

    #[test]
    fn visco_elastic_examples() {
        let v = [0.4, 1.0, -0.2];
        let vs = [-0.6, 0.3, 0.1];
        let u: Vec<f64> = v.iter().zip(&vs).map(|(a, b)| a - b).collect();
        let un = norm(&u);
        let uhat: Vec<f64> = u.iter().map(|x| x / un).collect();
        let out = visco_elastic_outcome(&v, &vs, &uhat, 1.0).unwrap();
        for i in 0..3 {
            assert!((out.v_prime[i] - v[i]).abs() < 1e-15);
        }
        let out = visco_elastic_outcome(&[1.0f64, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], 0.0).unwrap();
        assert!(out.v_prime.iter().chain(&out.v_star_prime).all(|x| x.abs() < 1e-15));
    }
}
