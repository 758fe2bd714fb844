//! Change-of-variable maps between relative and post-collisional velocities:
//! the shift map `Φ_z(u) = u + |u| z` and the pre/post maps built on it.

use thiserror::Error;

use crate::numerics::{brent_root, golden_min, RootError};
use crate::scalar::{dot, norm, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("Jacobian undefined at u = 0")]
    ZeroVector,
    #[error("point is not invertible: it lies on the ray -R₊ z with |z| = 1")]
    NotInvertible,
    #[error("point outside the cone (cosine {cosine} ≤ {bound})")]
    OutOfCone { cosine: f64, bound: f64 },
    #[error("|z| = {0} exceeds 1")]
    ZTooLarge(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Slack on strict cone membership.
pub const CONE_SLACK: f64 = 1e-14;
const ROOT_TOL: f64 = 1e-12;
const ROOT_ITERS: usize = 200;

pub fn shift_map<T: Real>(z: &[T], u: &[T]) -> Vec<T> {
    let un = norm(u);
    u.iter().zip(z).map(|(&a, &b)| a + un * b).collect()
}

/// `det DΦ_z(u) = 1 + û·z`.
pub fn shift_jacobian<T: Real>(z: &[T], u: &[T]) -> Result<T, GeometryError> {
    let un = norm(u);
    if un == T::zero() {
        return Err(GeometryError::ZeroVector);
    }
    Ok(T::one() + dot(u, z) / un)
}

/// Jacobian `2^{-N} (1 - û·z)` of `Ψ: v ↦ v'` at fixed `(v*, z)`.
pub fn psi_jacobian<T: Real>(z: &[T], u: &[T]) -> Result<T, GeometryError> {
    let un = norm(u);
    if un == T::zero() {
        return Err(GeometryError::ZeroVector);
    }
    Ok(T::c(2.0).powi(-(u.len() as i32)) * (T::one() - dot(u, z) / un))
}

/// `δ = (γ + |z|) / (1 + 2γ|z| + |z|²)^{1/2}`, the aperture of `Φ_z(Ω_γ)`.
pub fn cone_image<T: Real>(gamma: T, z_norm: T) -> T {
    let den = (T::one() + T::c(2.0) * gamma * z_norm + z_norm * z_norm).sqrt();
    if den == T::zero() {
        return T::one();
    }
    (gamma + z_norm) / den
}

/// `u ∈ Ω_γ = {û·ẑ > γ}` (with a small slack); `axis` need not be normalized.
pub fn in_cone<T: Real>(u: &[T], axis: &[T], gamma: T) -> bool {
    cone_cosine(u, axis).is_some_and(|c| c > gamma - T::c(CONE_SLACK))
}

fn cone_cosine<T: Real>(u: &[T], axis: &[T]) -> Option<T> {
    let (un, an) = (norm(u), norm(axis));
    if un == T::zero() || an == T::zero() {
        return None;
    }
    Some(dot(u, axis) / (un * an))
}

/// `Φ_z^{-1}(w)` by bracketed root finding on the coordinate along `ẑ`:
/// `w₁ = u₁ + (u₁² + |w₂|²)^{1/2} |z|`, `u₂ = w₂`. When `gamma` is given,
/// `w` must lie in the image cone `Ω_δ`.
pub fn shift_map_inverse<T: Real>(z: &[T], w: &[T], gamma: Option<T>) -> Result<Vec<T>, GeometryError> {
    let r = norm(z);
    if r > T::one() + T::c(64.0) * T::epsilon() {
        return Err(GeometryError::ZTooLarge(r.to_f64_lossy()));
    }
    let wn = norm(w);
    if r == T::zero() || wn == T::zero() {
        return Ok(w.to_vec());
    }
    let r = r.min(T::one());
    if let Some(g) = gamma {
        let delta = cone_image(g, r);
        let c = cone_cosine(w, z).unwrap_or(-T::one());
        if !(c > delta - T::c(CONE_SLACK)) {
            return Err(GeometryError::OutOfCone { cosine: c.to_f64_lossy(), bound: delta.to_f64_lossy() });
        }
    }
    let zhat: Vec<T> = z.iter().map(|&c| c / norm(z)).collect();
    let w1 = dot(w, &zhat);
    let w2: Vec<T> = w.iter().zip(&zhat).map(|(&a, &b)| a - w1 * b).collect();
    let a2 = dot(&w2, &w2);
    let unit = r >= T::one() - T::c(64.0) * T::epsilon();
    if unit && (w1 < T::zero() || (w1 == T::zero() && a2 == T::zero())) {
        return Err(GeometryError::NotInvertible);
    }
    let f = |u1: T| u1 + (u1 * u1 + a2).sqrt() * r - w1;
    // |Φ_z(u)| ≥ (1 - |z|)|u| bounds the root for |z| < 1; otherwise expand.
    let mut span = wn * T::c(2.0) + T::one();
    if !unit {
        span = span.max(wn / (T::one() - r) * T::c(1.01));
    }
    let mut lo = -span;
    let mut hi = span;
    let mut expansions = 0;
    while f(lo) > T::zero() || f(hi) < T::zero() {
        lo = lo * T::c(4.0);
        hi = hi * T::c(4.0);
        expansions += 1;
        if expansions > 200 || !lo.is_finite() {
            return Err(GeometryError::NotInvertible);
        }
    }
    let tol = T::c(ROOT_TOL) * wn.max(T::min_positive_value());
    let u1 = brent_root(f, lo, hi, tol, ROOT_ITERS)?;
    Ok(w2.iter().zip(&zhat).map(|(&b, &h)| b + u1 * h).collect())
}

/// `r_e = (1+e)/(3-e)`.
pub fn r_e<T: Real>(e: T) -> T {
    (T::one() + e) / (T::c(3.0) - e)
}

/// `ω_e(γ) = (γ + r_e)/(1 + 2γ r_e + r_e²)^{1/2}`.
pub fn omega_e<T: Real>(e: T, gamma: T) -> T {
    cone_image(gamma, r_e(e))
}

/// `v ↦ v' = v* + (3-e)/4 · Φ_{r_e σ}(v - v*)` at fixed `(v*, σ, e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrePostMap<T> {
    pub e: T,
    pub sigma: Vec<T>,
    pub anchor: Vec<T>,
}

impl<T: Real> PrePostMap<T> {
    pub fn new(e: T, sigma: Vec<T>, anchor: Vec<T>) -> Result<Self, GeometryError> {
        if !(T::zero()..=T::one()).contains(&e) {
            return Err(GeometryError::InvalidParameter(format!("e = {e} outside [0, 1]")));
        }
        if sigma.len() != anchor.len() || (norm(&sigma) - T::one()).abs() > T::c(1e-10) {
            return Err(GeometryError::InvalidParameter("sigma must be a unit vector of the anchor's dimension".into()));
        }
        Ok(Self { e, sigma, anchor })
    }

    pub fn r_e(&self) -> T {
        r_e(self.e)
    }

    fn z(&self) -> Vec<T> {
        let r = self.r_e();
        self.sigma.iter().map(|&s| r * s).collect()
    }

    fn scale(&self) -> T {
        (T::c(3.0) - self.e) * T::c(0.25)
    }

    pub fn forward(&self, v: &[T]) -> Vec<T> {
        let u: Vec<T> = v.iter().zip(&self.anchor).map(|(&a, &b)| a - b).collect();
        let w = shift_map(&self.z(), &u);
        let k = self.scale();
        self.anchor.iter().zip(&w).map(|(&a, &b)| a + k * b).collect()
    }

    /// Inverse on `v* + Ω_{ω_e(γ)}` (cone check skipped when `gamma` is `None`).
    pub fn inverse(&self, v_prime: &[T], gamma: Option<T>) -> Result<Vec<T>, GeometryError> {
        let k = T::one() / self.scale();
        let w: Vec<T> = v_prime.iter().zip(&self.anchor).map(|(&a, &b)| k * (a - b)).collect();
        let u = shift_map_inverse(&self.z(), &w, gamma)?;
        Ok(self.anchor.iter().zip(&u).map(|(&a, &b)| a + b).collect())
    }

    /// `J_e(v) = ((3-e)/4)^N (1 + r_e û·σ)`.
    pub fn jacobian(&self, v: &[T]) -> Result<T, GeometryError> {
        let u: Vec<T> = v.iter().zip(&self.anchor).map(|(&a, &b)| a - b).collect();
        let j = shift_jacobian(&self.z(), &u)?;
        Ok(self.scale().powi(v.len() as i32) * j)
    }

    /// Component of `φ_e^{-1}(v') - v*` along σ.
    fn parallel_coordinate(&self, v_prime: &[T]) -> Result<T, GeometryError> {
        let x = self.inverse(v_prime, None)?;
        let d: Vec<T> = x.iter().zip(&self.anchor).map(|(&a, &b)| a - b).collect();
        Ok(dot(&d, &self.sigma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolation<T> {
    pub e_doubleprime: T,
    /// `|t φ_e⁻¹(v') + (1-t) φ_{e'}⁻¹(v') - φ_{e''}⁻¹(v')|`
    pub residual: T,
}

fn check_interp<T: Real>(e: T, e_prime: T, t: T) -> Result<(), GeometryError> {
    for (name, x) in [("e", e), ("e'", e_prime), ("t", t)] {
        if !(T::zero()..=T::one()).contains(&x) {
            return Err(GeometryError::InvalidParameter(format!("{name} = {x} outside [0, 1]")));
        }
    }
    Ok(())
}

fn vector_residual<T: Real>(
    e: T,
    e_prime: T,
    e2: T,
    t: T,
    v_prime: &[T],
    v_star: &[T],
    sigma: &[T],
) -> Result<T, GeometryError> {
    let inv = |ee: T| PrePostMap::new(ee, sigma.to_vec(), v_star.to_vec())?.inverse(v_prime, None);
    let (a, b, c) = (inv(e)?, inv(e_prime)?, inv(e2)?);
    let d: Vec<T> = (0..a.len()).map(|i| t * a[i] + (T::one() - t) * b[i] - c[i]).collect();
    Ok(norm(&d))
}

/// Find `e''` between `e` and `e'` best matching
/// `t φ_e⁻¹(v') + (1-t) φ_{e'}⁻¹(v') = φ_{e''}⁻¹(v')` and report the residual.
/// The identity is exact only when `v' - v*` is parallel to σ; see
/// [`coordinate_interpolation`] for the scalar identity that always holds.
pub fn restitution_interpolation_residual<T: Real>(
    e: T,
    e_prime: T,
    t: T,
    v_prime: &[T],
    v_star: &[T],
    sigma: &[T],
) -> Result<Interpolation<T>, GeometryError> {
    check_interp(e, e_prime, t)?;
    let (lo, hi) = (e.min(e_prime), e.max(e_prime));
    if hi == lo {
        return Ok(Interpolation { e_doubleprime: lo, residual: T::zero() });
    }
    // Start from the root of the parallel coordinate, then polish on the full
    // residual over the segment.
    let start = coordinate_interpolation(e, e_prime, t, v_prime, v_star, sigma)?.e_doubleprime;
    let mut failure = None;
    let mut objective = |ee: T| match vector_residual(e, e_prime, ee, t, v_prime, v_star, sigma) {
        Ok(r) => r,
        Err(err) => {
            failure.get_or_insert(err);
            T::infinity()
        }
    };
    let (best, fbest) = golden_min(&mut objective, lo, hi, T::c(1e-13), 200);
    let at_start = objective(start);
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(if at_start <= fbest {
        Interpolation { e_doubleprime: start, residual: at_start }
    } else {
        Interpolation { e_doubleprime: best, residual: fbest }
    })
}

/// Scalar form of the interpolation: matches the σ-coordinate of the
/// inverse images by root finding. `residual` is the full vector residual at
/// the returned `e''`.
pub fn coordinate_interpolation<T: Real>(
    e: T,
    e_prime: T,
    t: T,
    v_prime: &[T],
    v_star: &[T],
    sigma: &[T],
) -> Result<Interpolation<T>, GeometryError> {
    check_interp(e, e_prime, t)?;
    let coord = |ee: T| PrePostMap::new(ee, sigma.to_vec(), v_star.to_vec())?.parallel_coordinate(v_prime);
    let (lo, hi) = (e.min(e_prime), e.max(e_prime));
    if hi == lo {
        return Ok(Interpolation { e_doubleprime: lo, residual: T::zero() });
    }
    let target = t * coord(e)? + (T::one() - t) * coord(e_prime)?;
    let (clo, chi) = (coord(lo)?, coord(hi)?);
    let e2 = if (clo - target).abs() <= T::epsilon() * target.abs().max(T::one()) {
        lo
    } else if (chi - target).abs() <= T::epsilon() * target.abs().max(T::one()) {
        hi
    } else {
        brent_root(|ee| coord(ee).map(|c| c - target).unwrap_or(T::nan()), lo, hi, T::c(ROOT_TOL), ROOT_ITERS)?
    };
    let residual = vector_residual(e, e_prime, e2, t, v_prime, v_star, sigma)?;
    Ok(Interpolation { e_doubleprime: e2, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_z_is_identity() {
        let u = [0.3, -0.7, 1.1];
        assert_eq!(shift_map(&[0.0; 3], &u), u.to_vec());
        assert_eq!(shift_jacobian(&[0.0; 3], &u).unwrap(), 1.0);
        assert_eq!(shift_map_inverse(&[0.0; 3], &u, Some(0.0)).unwrap(), u.to_vec());
    }

    #[test]
    fn antipodal_unit_z_degenerates() {
        let j = shift_jacobian(&[-1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(j, 0.0);
        assert!(matches!(shift_map_inverse(&[1.0, 0.0], &[-1.0, 0.0], None), Err(GeometryError::NotInvertible)));
    }

    #[test]
    fn zero_u_rejected_for_jacobian() {
        assert_eq!(shift_jacobian(&[0.1, 0.0], &[0.0, 0.0]), Err(GeometryError::ZeroVector));
    }

    #[test]
    fn cone_boundary_point_maps_back_to_sphere() {
        let gamma = 0.3f64;
        let r = 0.6;
        let u2 = (1.0 - gamma * gamma).sqrt();
        let w = [gamma + r, u2];
        let u = shift_map_inverse(&[r, 0.0], &w, None).unwrap();
        assert!((norm(&u) - 1.0).abs() < 1e-12);
        assert!((u[0] - gamma).abs() < 1e-12);
    }

    #[test]
    fn omega_of_elastic_map() {
        assert!((omega_e(1.0f64, 0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r_e(0.0f64) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn forward_of_anchor_is_anchor() {
        let m = PrePostMap::new(0.5, vec![0.0, 1.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn interpolation_trivial_cases() {
        let vp = [0.4, 0.2, -0.1];
        let vs = [0.0, 0.0, 0.0];
        let s = [0.0, 0.0, 1.0];
        let r = restitution_interpolation_residual(0.5, 0.5, 0.3, &vp, &vs, &s).unwrap();
        assert_eq!((r.e_doubleprime, r.residual), (0.5, 0.0));
        let r = coordinate_interpolation(0.2f64, 0.8, 0.0, &vp, &vs, &s).unwrap();
        assert!((r.e_doubleprime - 0.8).abs() < 1e-10);
    }

    #[test]
    fn interpolation_exact_on_sigma_axis() {
        let s = [0.0, 0.0, 1.0];
        let r = restitution_interpolation_residual(0.2, 0.9, 0.4, &[0.0, 0.0, 1.5], &[0.0; 3], &s).unwrap();
        assert!(r.residual < 1e-10, "{r:?}");
        assert!(r.e_doubleprime >= 0.2 && r.e_doubleprime <= 0.9);
    }
}
