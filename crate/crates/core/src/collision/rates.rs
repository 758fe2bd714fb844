use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::{KernelSpec, Restitution};
use super::CollisionError;
use crate::numerics::{brent_root, sphere_area, GaussLegendre, QuadratureEstimate};
use crate::scalar::{kahan_sum, Real};

/// Gauss-Legendre rules for integrals of functions of `x = û·σ` over the
/// unit sphere of `R^dim`. Odd dimensions integrate in `x`, where the
/// surface weight `(1-x²)^{(N-3)/2}` is polynomial; even dimensions integrate
/// in the polar angle to avoid the endpoint singularity.
#[derive(Debug, Clone)]
pub struct QuadratureConfig<T> {
    pub dim: usize,
    full: GaussLegendre<T>,
    half: GaussLegendre<T>,
    /// Relative tolerance on the residual between the full and half-order rules.
    pub tol: T,
}

impl<T: Real> QuadratureConfig<T> {
    pub fn new(dim: usize, order: usize) -> Self {
        let order = order.max(2);
        Self { dim, full: GaussLegendre::new(order), half: GaussLegendre::new((order / 2).max(1)), tol: T::c(1e-6) }
    }

    pub fn order(&self) -> usize {
        self.full.order()
    }

    fn odd(&self) -> bool {
        self.dim % 2 == 1
    }

    /// Integration variable range.
    fn range(&self) -> (T, T) {
        if self.odd() {
            (-T::one(), T::one())
        } else {
            (T::zero(), T::PI())
        }
    }

    /// Map the integration variable to `x` and the surface weight.
    fn x_and_weight(&self, s: T) -> (T, T) {
        let n = self.dim as i32;
        if self.odd() {
            let w = if n == 3 { T::one() } else { (T::one() - s * s).max(T::zero()).powi((n - 3) / 2) };
            (s, w)
        } else {
            (s.cos(), s.sin().powi(n - 2))
        }
    }

    fn rule_integrate<F: FnMut(T) -> T>(&self, rule: &GaussLegendre<T>, a: T, b: T, g: &mut F) -> T {
        let outer: T = sphere_area(self.dim - 1);
        outer
            * rule.integrate(a, b, |s| {
                let (x, w) = self.x_and_weight(s);
                g(x) * w
            })
    }
}

/// `∫_{S^{N-1}} g(û·σ) dσ` with a residual estimate.
pub fn integrate_over_sphere<T: Real, F: FnMut(T) -> T>(quad: &QuadratureConfig<T>, mut g: F) -> QuadratureEstimate<T> {
    let (a, b) = quad.range();
    let value = quad.rule_integrate(&quad.full, a, b, &mut g);
    let coarse = quad.rule_integrate(&quad.half, a, b, &mut g);
    QuadratureEstimate { value, residual: (value - coarse).abs() }
}

/// `Δ(E, u) = ¼ ∫ (1 - |z|²) b(E, u; dz)`, including the intensity `α(E)`.
pub fn dissipation_rate<T: Real>(
    spec: &KernelSpec<T>,
    energy: T,
    u: &[T],
    quad: &QuadratureConfig<T>,
) -> Result<QuadratureEstimate<T>, CollisionError> {
    if !(energy > T::zero()) {
        return Err(CollisionError::InvalidParameter(format!("energy {energy} must be positive")));
    }
    let alpha = spec.alpha(energy);
    let quarter = T::c(0.25);
    match &spec.restitution {
        Restitution::Sticky => Ok(QuadratureEstimate { value: alpha * quarter, residual: T::zero() }),
        Restitution::Stochastic(law) => {
            Ok(QuadratureEstimate { value: alpha * law.mean_dissipation(energy, u), residual: T::zero() })
        }
        model => {
            let speed = crate::scalar::norm(u);
            let half = T::c(0.5);
            let est = integrate_over_sphere(quad, |x| {
                let e = model.coefficient(energy, speed, x).unwrap_or(T::one());
                // z = a û + b σ with û·σ = x
                let a = half * (T::one() - e);
                let b = half * (T::one() + e);
                let z2 = a * a + T::c(2.0) * a * b * x + b * b;
                quarter * (T::one() - z2) * spec.angular.density(spec.dim, x)
            });
            let value = alpha * est.value;
            let residual = alpha * est.residual;
            if residual > quad.tol * value.abs().max(T::epsilon()) {
                return Err(CollisionError::Quadrature { value: value.to_f64_lossy(), residual: residual.to_f64_lossy() });
            }
            Ok(QuadratureEstimate { value, residual })
        }
    }
}

/// `j_E(ε)` for relative speed `speed`: the β-mass of `|û·z| > 1 - ε`.
pub fn angular_spreading_at<T: Real>(
    spec: &KernelSpec<T>,
    energy: T,
    speed: T,
    eps: T,
    quad: &QuadratureConfig<T>,
) -> T {
    let level = T::one() - eps;
    let model = match &spec.restitution {
        Restitution::Sticky => return T::zero(),
        Restitution::Stochastic(law) => return law.angular_spreading(energy, eps),
        m => m,
    };
    let half = T::c(0.5);
    let indicator = |s: T| {
        let (x, _) = quad.x_and_weight(s);
        let e = model.coefficient(energy, speed, x).unwrap_or(T::one());
        let uz = half * (T::one() - e) + half * (T::one() + e) * x;
        uz.abs() - level
    };
    let (lo, hi) = quad.range();
    let cells = 512;
    let h = (hi - lo) / T::from_usize_lossy(cells);
    let mut cuts = vec![lo];
    let mut prev = indicator(lo);
    for i in 1..=cells {
        let s = if i == cells { hi } else { lo + h * T::from_usize_lossy(i) };
        let cur = indicator(s);
        if (prev > T::zero()) != (cur > T::zero()) {
            let a = s - h;
            let root = brent_root(indicator, a, s, T::epsilon() * T::c(16.0), 200).unwrap_or(s);
            cuts.push(root);
        }
        prev = cur;
    }
    cuts.push(hi);
    let rule = GaussLegendre::<T>::new(16);
    let mut mass = T::zero();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a || indicator(half * (a + b)) <= T::zero() {
            continue;
        }
        mass += quad.rule_integrate(&rule, a, b, &mut |x| spec.angular.density(spec.dim, x));
    }
    mass.clamp_to(T::zero(), T::one())
}

/// `j_E(ε)` as a supremum over relative speeds (a log grid for laws whose
/// restitution depends on the speed).
pub fn angular_spreading<T: Real>(spec: &KernelSpec<T>, energy: T, eps: T, quad: &QuadratureConfig<T>) -> T {
    if !spec.restitution.depends_on_speed() || matches!(spec.restitution, Restitution::Stochastic(_)) {
        return angular_spreading_at(spec, energy, T::one(), eps, quad);
    }
    (0..=64)
        .map(|i| T::c(10f64.powf(-4.0 + 8.0 * i as f64 / 64.0)))
        .map(|speed| angular_spreading_at(spec, energy, speed, eps, quad))
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone, Copy)]
pub struct PairSumOptions {
    /// Largest `n` for the exact pair sum when Δ does not depend on `u`.
    pub exact_limit: usize,
    /// Largest `n` for the exact pair sum when Δ must be evaluated per pair.
    pub exact_limit_per_pair: usize,
    pub subsample_pairs: usize,
    pub seed: u64,
    pub quadrature_order: usize,
}

impl Default for PairSumOptions {
    fn default() -> Self {
        Self { exact_limit: 20_000, exact_limit_per_pair: 512, subsample_pairs: 200_000, seed: 0, quadrature_order: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationEstimate<T> {
    pub value: T,
    /// Zero for the exact pair sum.
    pub std_error: T,
    pub pairs: usize,
    pub exact: bool,
}

const ROW_CHUNK: usize = 64;

/// `D(f) = ∫∫ f f* |u|³ Δ(E, u)` for the empirical measure with weights `1/n`
/// (`velocities` is row-major with `spec.dim` columns). The exact sum runs over
/// fixed row chunks that are reduced in order, so the result does not depend
/// on the thread count.
pub fn dissipation_functional<T: Real>(
    velocities: &[T],
    spec: &KernelSpec<T>,
    energy: T,
    opts: &PairSumOptions,
) -> Result<DissipationEstimate<T>, CollisionError> {
    let dim = spec.dim;
    let n = velocities.len() / dim;
    if n < 2 || spec.intensity.is_zero() || spec.restitution.is_elastic() || !(energy > T::zero()) {
        return Ok(DissipationEstimate { value: T::zero(), std_error: T::zero(), pairs: 0, exact: true });
    }
    let quad = QuadratureConfig::new(dim, opts.quadrature_order);
    let per_pair = spec.restitution.depends_on_speed();
    let nf = T::from_usize_lossy(n);
    let row = |i: usize| &velocities[i * dim..(i + 1) * dim];
    let speed = |i: usize, j: usize| {
        let (a, b) = (row(i), row(j));
        let mut s = T::zero();
        for k in 0..dim {
            let d = a[k] - b[k];
            s += d * d;
        }
        s.sqrt()
    };
    let rel = |i: usize, j: usize| -> Vec<T> { row(i).iter().zip(row(j)).map(|(a, b)| *a - *b).collect() };

    let limit = if per_pair { opts.exact_limit_per_pair } else { opts.exact_limit };
    if n <= limit {
        let chunks: Vec<(usize, usize)> =
            (0..n).step_by(ROW_CHUNK).map(|s| (s, (s + ROW_CHUNK).min(n))).collect();
        let delta_const = if per_pair {
            None
        } else {
            Some(dissipation_rate(spec, energy, &row(0).iter().map(|_| T::one()).collect::<Vec<_>>(), &quad)?.value)
        };
        let partial: Result<Vec<T>, CollisionError> = chunks
            .par_iter()
            .map(|&(s, e)| {
                let mut rows = Vec::with_capacity(e - s);
                for i in s..e {
                    // Plain sums per row, compensated across rows.
                    let mut acc = T::zero();
                    for j in (i + 1)..n {
                        let g = speed(i, j);
                        acc += match delta_const {
                            Some(_) => g * g * g,
                            None if g == T::zero() => T::zero(),
                            None => g * g * g * dissipation_rate(spec, energy, &rel(i, j), &quad)?.value,
                        };
                    }
                    rows.push(match delta_const {
                        Some(d) => acc * d,
                        None => acc,
                    });
                }
                Ok(kahan_sum(rows))
            })
            .collect();
        let total = kahan_sum(partial?);
        return Ok(DissipationEstimate {
            value: T::c(2.0) * total / (nf * nf),
            std_error: T::zero(),
            pairs: n * (n - 1) / 2,
            exact: true,
        });
    }

    let m = match spec.restitution {
        Restitution::Stochastic(_) => opts.subsample_pairs.min(2048),
        _ => opts.subsample_pairs,
    }
    .max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs: Vec<(usize, usize)> = (0..m)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect();
    let delta_const = if per_pair {
        None
    } else {
        Some(dissipation_rate(spec, energy, &row(0).iter().map(|_| T::one()).collect::<Vec<_>>(), &quad)?.value)
    };
    let terms: Result<Vec<T>, CollisionError> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let g = speed(i, j);
            Ok(match delta_const {
                Some(d) => g * g * g * d,
                None if g == T::zero() => T::zero(),
                None => g * g * g * dissipation_rate(spec, energy, &rel(i, j), &quad)?.value,
            })
        })
        .collect();
    let terms = terms?;
    let mf = T::from_usize_lossy(m);
    let mean = kahan_sum(terms.iter().copied()) / mf;
    let var = kahan_sum(terms.iter().map(|&t| (t - mean) * (t - mean))) / (mf - T::one());
    let factor = (nf - T::one()) / nf;
    Ok(DissipationEstimate { value: factor * mean, std_error: factor * (var / mf).sqrt(), pairs: m, exact: false })
}

/// Runtime-checkable model assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assumptions {
    /// `β(E,u;dz) = β(E,-u;-dz)`; holds by construction for the built-in laws.
    pub symmetric: bool,
    /// `Δ(E,u) > 0` on a sample grid of energies and relative speeds.
    pub positive_dissipation: bool,
    /// σ-parametrized law with `e = e(E,|u|)` and `b̃` bounded above and
    /// below, nondecreasing and convex.
    pub h4: bool,
    pub alpha_bounded_near_zero: bool,
    /// `j_E(ε) → 0` as `ε → 0` uniformly for small energies (checked numerically).
    pub spreading_uniform_near_zero: bool,
}

impl Assumptions {
    pub fn check<T: Real>(spec: &KernelSpec<T>) -> Self {
        let quad = QuadratureConfig::new(spec.dim, 64);
        let energies = [1e-8, 1e-4, 1e-2, 1.0, 1e2];
        let mut positive = true;
        'outer: for &en in &energies {
            for &s in &[1e-3, 1.0, 1e3] {
                let mut u = vec![T::zero(); spec.dim];
                u[0] = T::c(s);
                match dissipation_rate(spec, T::c(en), &u, &quad) {
                    Ok(d) if d.value > T::zero() => {}
                    _ => {
                        positive = false;
                        break 'outer;
                    }
                }
            }
        }
        let h4 = match spec.restitution {
            Restitution::Constant(_) | Restitution::EnergyDependent { .. } => {
                let (lo, _) = spec.angular.bounds(spec.dim);
                lo > T::zero() && spec.angular.nondecreasing_convex()
            }
            _ => false,
        };
        let eps = T::c(1e-6);
        let spreading = [1e-8, 1e-6, 1e-4, 1e-2]
            .iter()
            .all(|&en| angular_spreading(spec, T::c(en), eps, &quad) < T::c(1e-3));
        Self {
            symmetric: true,
            positive_dissipation: positive,
            h4,
            alpha_bounded_near_zero: spec.intensity.bounded_near_zero(),
            spreading_uniform_near_zero: spreading,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{Angular, Intensity};

    #[test]
    fn sphere_areas_from_quadrature() {
        for dim in 2..=6 {
            let q = QuadratureConfig::<f64>::new(dim, 32);
            let area: f64 = sphere_area(dim);
            let est = integrate_over_sphere(&q, |_| 1.0);
            assert!((est.value - area).abs() < 1e-12 * area, "dim {dim}");
        }
    }

    #[test]
    fn isotropic_constant_e_dissipation() {
        let q = QuadratureConfig::new(3, 64);
        for e in [0.0f64, 0.3, 0.9, 1.0] {
            let spec = KernelSpec::constant(3, e);
            let d = dissipation_rate(&spec, 1.0, &[0.3, 0.1, 2.0], &q).unwrap();
            assert!((d.value - (1.0 - e * e) / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sticky_dissipation_quarter() {
        let spec = KernelSpec { restitution: Restitution::Sticky, ..KernelSpec::<f64>::elastic(3) };
        let d = dissipation_rate(&spec, 1.0, &[1.0, 0.0, 0.0], &QuadratureConfig::new(3, 16)).unwrap();
        assert_eq!(d.value, 0.25);
    }

    #[test]
    fn elastic_spreading_is_linear() {
        let q = QuadratureConfig::new(3, 64);
        let spec = KernelSpec::<f64>::elastic(3);
        for eps in [0.01, 0.2, 0.5, 0.9] {
            assert!((angular_spreading(&spec, 1.0, eps, &q) - eps).abs() < 1e-10);
        }
        assert!((angular_spreading(&spec, 1.0, 1.0, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sticky_spreading_vanishes() {
        let q = QuadratureConfig::new(3, 64);
        let spec = KernelSpec { restitution: Restitution::Sticky, ..KernelSpec::<f64>::elastic(3) };
        assert_eq!(angular_spreading(&spec, 1.0, 0.99, &q), 0.0);
    }

    #[test]
    fn two_particle_pair_sum() {
        let spec = KernelSpec { restitution: Restitution::Sticky, ..KernelSpec::<f64>::elastic(3) };
        let v = [1.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        let d = dissipation_functional(&v, &spec, 1.0, &PairSumOptions::default()).unwrap();
        // (1/n²) Σ_{i≠j} |u|³ Δ = (1/4)(2 · 8 · 1/4)
        assert!((d.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn assumptions_for_standard_models() {
        let a = Assumptions::check(&KernelSpec::<f64>::constant(3, 0.9));
        assert!(a.positive_dissipation && a.h4 && a.alpha_bounded_near_zero && a.spreading_uniform_near_zero);
        let elastic = Assumptions::check(&KernelSpec::<f64>::elastic(3));
        assert!(!elastic.positive_dissipation);
        let visco = KernelSpec {
            restitution: Restitution::ViscoElastic { c: 0.3, p: 0.2 },
            angular: Angular::Linear { slope: 0.5 },
            intensity: Intensity::Power { c: 1.0, k: -1.0 },
            dim: 3,
        };
        let a = Assumptions::check(&visco);
        assert!(!a.h4 && !a.alpha_bounded_near_zero && a.positive_dissipation);
    }
}
