use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{z_from_sigma, CollisionError};
use crate::scalar::{dot, norm, Real};

/// Collision intensity `α(E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity<T> {
    Constant(T),
    /// `α(E) = c · E^k`
    Power { c: T, k: T },
}

impl<T: Real> Intensity<T> {
    pub fn alpha(&self, energy: T) -> T {
        match *self {
            Intensity::Constant(c) => c,
            Intensity::Power { c, k } => {
                if k == T::zero() {
                    c
                } else {
                    c * energy.powf(k)
                }
            }
        }
    }

    pub fn bounded_near_zero(&self) -> bool {
        match *self {
            Intensity::Constant(_) => true,
            Intensity::Power { c, k } => c == T::zero() || k >= T::zero(),
        }
    }

    /// Nonincreasing majorant `α₀` with `α(E') ≤ α₀(E)` for all `E' ≥ E`.
    pub fn decreasing_bound(&self, energy: T) -> T {
        match *self {
            Intensity::Constant(c) => c,
            Intensity::Power { c, k } if k <= T::zero() => c * energy.powf(k),
            // An increasing power law has no finite nonincreasing majorant.
            Intensity::Power { .. } => T::infinity(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Intensity::Constant(c) => c == T::zero(),
            Intensity::Power { c, .. } => c == T::zero(),
        }
    }
}

/// Stochastic inelasticity supplied by the caller: a sampler for `z` and an
/// estimate of the angular spreading function.
pub trait StochasticLaw<T: Real>: Debug + Send + Sync {
    fn sample_z(&self, energy: T, u: &[T], rng: &mut dyn RngCore, z: &mut [T]);

    fn angular_spreading(&self, energy: T, eps: T) -> T;

    /// `¼ ∫ (1 - |z|²) β(E, u; dz)`. The default is a seeded Monte Carlo average.
    fn mean_dissipation(&self, energy: T, u: &[T]) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut z = vec![T::zero(); u.len()];
        let samples = 1 << 14;
        let mut acc = T::zero();
        for _ in 0..samples {
            self.sample_z(energy, u, &mut rng, &mut z);
            acc += T::one() - dot(&z, &z);
        }
        T::c(0.25) * acc / T::from_usize_lossy(samples)
    }
}

#[derive(Debug, Clone)]
pub enum Restitution<T> {
    Constant(T),
    /// `e = exp(-c g^p)` with `g = |u| |û - σ| / 2` the normal relative speed.
    ViscoElastic { c: T, p: T },
    /// `e = exp(-c E^p)`
    EnergyDependent { c: T, p: T },
    Sticky,
    Stochastic(Arc<dyn StochasticLaw<T>>),
}

impl<T: Real> Restitution<T> {
    /// Restitution coefficient for the σ-parametrized models; `None` for
    /// sticky and stochastic laws. `x = û·σ`.
    pub fn coefficient(&self, energy: T, speed: T, x: T) -> Option<T> {
        match *self {
            Restitution::Constant(e) => Some(e),
            Restitution::ViscoElastic { c, p } => {
                let g = speed * ((T::one() - x) * T::c(0.5)).max(T::zero()).sqrt();
                Some(if g == T::zero() { T::one() } else { (-c * g.powf(p)).exp() })
            }
            Restitution::EnergyDependent { c, p } => Some((-c * energy.powf(p)).exp()),
            Restitution::Sticky | Restitution::Stochastic(_) => None,
        }
    }

    pub fn depends_on_sigma(&self) -> bool {
        matches!(self, Restitution::ViscoElastic { .. })
    }

    pub fn depends_on_speed(&self) -> bool {
        matches!(self, Restitution::ViscoElastic { .. } | Restitution::Stochastic(_))
    }

    pub fn is_elastic(&self) -> bool {
        match *self {
            Restitution::Constant(e) => e == T::one(),
            Restitution::ViscoElastic { c, .. } | Restitution::EnergyDependent { c, .. } => c == T::zero(),
            _ => false,
        }
    }
}

/// Normalized angular density `b̃(x)`, `x = û·σ`, on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angular<T> {
    Isotropic,
    /// `b̃ ∝ 1 + s x` with `|s| < 1`.
    Linear { slope: T },
}

impl<T: Real> Angular<T> {
    /// Density with respect to the surface measure, integrating to one.
    pub fn density(&self, dim: usize, x: T) -> T {
        let area: T = crate::numerics::sphere_area(dim);
        match *self {
            Angular::Isotropic => T::one() / area,
            Angular::Linear { slope } => (T::one() + slope * x) / area,
        }
    }

    pub fn bounds(&self, dim: usize) -> (T, T) {
        let area: T = crate::numerics::sphere_area(dim);
        match *self {
            Angular::Isotropic => (T::one() / area, T::one() / area),
            Angular::Linear { slope } => ((T::one() - slope.abs()) / area, (T::one() + slope.abs()) / area),
        }
    }

    /// Nondecreasing and convex in `x`.
    pub fn nondecreasing_convex(&self) -> bool {
        match *self {
            Angular::Isotropic => true,
            Angular::Linear { slope } => slope >= T::zero(),
        }
    }
}

/// Collision rate `B = |u| α(E) β(E, u; dz)`.
#[derive(Debug, Clone)]
pub struct KernelSpec<T> {
    pub dim: usize,
    pub intensity: Intensity<T>,
    pub restitution: Restitution<T>,
    pub angular: Angular<T>,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(
        dim: usize,
        intensity: Intensity<T>,
        restitution: Restitution<T>,
        angular: Angular<T>,
    ) -> Result<Self, CollisionError> {
        let spec = Self { dim, intensity, restitution, angular };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let bad = |m: String| Err(CollisionError::InvalidParameter(m));
        if self.dim < 2 {
            return bad(format!("dimension {} < 2", self.dim));
        }
        match self.intensity {
            Intensity::Constant(c) | Intensity::Power { c, .. } if !(c >= T::zero() && c.is_finite()) => {
                return bad(format!("intensity prefactor {c} must be finite and nonnegative"));
            }
            Intensity::Power { k, .. } if !k.is_finite() => return bad("intensity exponent must be finite".into()),
            _ => {}
        }
        match self.restitution {
            Restitution::Constant(e) if !(T::zero()..=T::one()).contains(&e) => {
                return bad(format!("restitution e = {e} outside [0, 1]"));
            }
            Restitution::ViscoElastic { c, p } | Restitution::EnergyDependent { c, p }
                if !(c >= T::zero() && c.is_finite() && p > T::zero() && p.is_finite()) =>
            {
                return bad(format!("restitution law needs c ≥ 0 and p > 0 (got c = {c}, p = {p})"));
            }
            _ => {}
        }
        if let Angular::Linear { slope } = self.angular {
            if !(slope.abs() < T::one()) {
                return bad(format!("angular slope {slope} must satisfy |s| < 1"));
            }
        }
        Ok(())
    }

    pub fn elastic(dim: usize) -> Self {
        Self {
            dim,
            intensity: Intensity::Constant(T::one()),
            restitution: Restitution::Constant(T::one()),
            angular: Angular::Isotropic,
        }
    }

    pub fn constant(dim: usize, e: T) -> Self {
        Self { restitution: Restitution::Constant(e), ..Self::elastic(dim) }
    }

    pub fn alpha(&self, energy: T) -> T {
        self.intensity.alpha(energy)
    }

    /// Draw σ from `b̃(û·σ) dσ`.
    pub fn sample_sigma<R: Rng + ?Sized>(&self, uhat: &[T], rng: &mut R, sigma: &mut [T]) {
        loop {
            uniform_sphere(rng, sigma);
            match self.angular {
                Angular::Isotropic => return,
                Angular::Linear { slope } => {
                    let x = dot(uhat, sigma);
                    let accept = (T::one() + slope * x) / (T::one() + slope.abs());
                    let r: f64 = rng.random();
                    if T::c(r) < accept {
                        return;
                    }
                }
            }
        }
    }

    /// Draw `z` from `β(E, u; dz)`. Returns the restitution coefficient that
    /// was used, if the law has one.
    pub fn sample_z<R: RngCore>(&self, energy: T, u: &[T], rng: &mut R, z: &mut [T]) -> Option<T> {
        let un = norm(u);
        if un == T::zero() {
            z.iter_mut().for_each(|x| *x = T::zero());
            return None;
        }
        match &self.restitution {
            Restitution::Sticky => {
                z.iter_mut().for_each(|x| *x = T::zero());
                None
            }
            Restitution::Stochastic(law) => {
                law.sample_z(energy, u, rng, z);
                None
            }
            model => {
                let uhat: Vec<T> = u.iter().map(|&c| c / un).collect();
                let mut sigma = vec![T::zero(); self.dim];
                self.sample_sigma(&uhat, rng, &mut sigma);
                let x = dot(&uhat, &sigma);
                let e = model.coefficient(energy, un, x).unwrap_or(T::one());
                z_from_sigma(u, &sigma, e, z);
                Some(e)
            }
        }
    }
}

pub(crate) fn uniform_sphere<T: Real, R: Rng + ?Sized>(rng: &mut R, out: &mut [T]) {
    loop {
        let mut s = 0.0f64;
        for o in out.iter_mut() {
            let c: f64 = rng.sample(StandardNormal);
            s += c * c;
            *o = T::c(c);
        }
        if s > 1e-300 {
            let inv = T::c(1.0 / s.sqrt());
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}
