//! Velocity moments, the moment bound system, cooling classification and
//! decay fits.

use thiserror::Error;

use crate::collision::{
    Assumptions, Intensity, KernelSpec, QuadratureConfig, Restitution, dissipation_rate,
};
use crate::dsmc::Ensemble;
use crate::numerics::special::gamma;
use crate::numerics::{binomial, golden_min, integrate_adaptive, ln_gamma, OdeError, OdeOptions, OdeStats};
use crate::scalar::{kahan_sum, norm2, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MomentsError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("contradictory cooling bounds: {0}")]
    Contradiction(String),
    #[error("series is not nonincreasing at index {index}")]
    NotMonotone { index: usize },
    #[error("moment system integration failed: {0}")]
    Ode(#[from] OdeError),
}

/// Plug-in moments `m_p = (1/n) Σ |v_i|^{2p}` with jackknife standard errors
/// and the normalized `z_p = m_p / Γ(a p + 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector<T> {
    pub indices: Vec<T>,
    pub values: Vec<T>,
    pub std_errors: Vec<T>,
    pub scale: T,
    /// Indices whose estimate is statistically unreliable.
    pub warnings: Vec<String>,
}

impl<T: Real> MomentVector<T> {
    pub fn normalized(&self) -> Vec<T> {
        self.indices.iter().zip(&self.values).map(|(&p, &m)| m / gamma(self.scale * p + T::c(0.5))).collect()
    }

    pub fn get(&self, p: T) -> Option<T> {
        self.position(p).map(|i| self.values[i])
    }

    fn position(&self, p: T) -> Option<usize> {
        self.indices.iter().position(|&q| (q - p).abs() < T::c(1e-9))
    }

    /// Copy shifted up by `k` standard errors.
    pub fn upper(&self, k: T) -> Self {
        let mut out = self.clone();
        for (v, s) in out.values.iter_mut().zip(&self.std_errors) {
            *v += k * *s;
        }
        out
    }

    /// `p ↦ log m_p` is convex on the grid up to `k` standard errors.
    pub fn log_convex_within(&self, k: T) -> bool {
        let n = self.indices.len();
        (1..n.saturating_sub(1)).all(|i| {
            let (p0, p1, p2) = (self.indices[i - 1], self.indices[i], self.indices[i + 1]);
            let w = (p2 - p1) / (p2 - p0);
            let lo = |j: usize| (self.values[j] - k * self.std_errors[j]).max(T::min_positive_value()).ln();
            let hi = |j: usize| (self.values[j] + k * self.std_errors[j]).ln();
            // Convexity: log m_{p1} ≤ w log m_{p0} + (1-w) log m_{p2}.
            lo(i) <= w * hi(i - 1) + (T::one() - w) * hi(i + 1)
        })
    }
}

/// Half-integer grid `{1/2, 1, ..., p_max}`.
pub fn half_integer_grid<T: Real>(p_max: T) -> Vec<T> {
    let k = (p_max * T::c(2.0)).floor().to_f64_lossy().max(1.0) as usize;
    (1..=k).map(|i| T::c(i as f64 * 0.5)).collect()
}

pub fn moments<T: Real>(ensemble: &Ensemble<T>, p_grid: &[T], scale: T) -> MomentVector<T> {
    let n = ensemble.len();
    let nf = T::from_usize_lossy(n);
    let sq: Vec<T> = ensemble.velocities.chunks_exact(ensemble.dim).map(norm2).collect();
    let mut values = Vec::with_capacity(p_grid.len());
    let mut errs = Vec::with_capacity(p_grid.len());
    let mut warnings = Vec::new();
    for &p in p_grid {
        let terms: Vec<T> = sq
            .iter()
            .map(|&s| {
                if p == T::zero() {
                    T::one()
                } else if s == T::zero() {
                    T::zero()
                } else {
                    s.powf(p)
                }
            })
            .collect();
        let mean = kahan_sum(terms.iter().copied()) / nf;
        // Jackknife over leave-one-out means; for the mean this reduces to
        // the sample standard deviation over sqrt(n).
        let se = if n > 1 {
            let ss = kahan_sum(terms.iter().map(|&t| (t - mean) * (t - mean)));
            (ss / (nf * (nf - T::one()))).sqrt()
        } else {
            T::zero()
        };
        if mean > T::zero() && se > T::c(0.1) * mean {
            warnings.push(format!("m_{p}: relative standard error {:.3}", (se / mean).to_f64_lossy()));
        }
        values.push(mean);
        errs.push(se);
    }
    if let Some(&pm) = p_grid.last() {
        if pm > T::c(5.0) && n <= 100_000 {
            warnings.push(format!("p_max = {pm} > 5 with n = {n}: high moments are statistically unreliable"));
        }
    }
    MomentVector { indices: p_grid.to_vec(), values, std_errors: errs, scale, warnings }
}

/// Default Povzner constant: the supremum of the ratio of the two sides,
/// reached at `x = y`.
pub fn default_povzner_constant<T: Real>() -> T {
    T::SQRT_2() - T::one()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovznerCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

/// `(x^{1/2} + y^{1/2}) [(x+y)^{3/2} - x^{3/2} - y^{3/2}]`
pub fn povzner_lhs<T: Real>(x: T, y: T) -> T {
    let t = T::c(1.5);
    (x.sqrt() + y.sqrt()) * ((x + y).powf(t) - x.powf(t) - y.powf(t))
}

/// `C (2xy + x^{1/2} y^{3/2} + x^{3/2} y^{1/2})`
pub fn povzner_rhs<T: Real>(x: T, y: T, c: T) -> T {
    let t = T::c(1.5);
    c * (T::c(2.0) * x * y + x.sqrt() * y.powf(t) + x.powf(t) * y.sqrt())
}

/// Evaluate both sides with `x = |v|²`, `y = |v*|²`.
pub fn povzner_bound<T: Real>(v: &[T], v_star: &[T], c: T) -> PovznerCheck<T> {
    povzner_check(norm2(v), norm2(v_star), c)
}

pub fn povzner_check<T: Real>(x: T, y: T, c: T) -> PovznerCheck<T> {
    let lhs = povzner_lhs(x, y);
    let rhs = povzner_rhs(x, y, c);
    // Relative slack for the equality case x = y at the minimal constant.
    let holds = lhs <= rhs + T::c(1e-12) * rhs.abs();
    PovznerCheck { lhs, rhs, holds }
}

/// Largest ratio lhs/rhs(C=1) over a grid of `(x, y)`.
pub fn minimal_povzner_constant<T: Real>(grid: &[T]) -> T {
    let mut best = T::zero();
    for &x in grid {
        for &y in grid {
            let r = povzner_rhs(x, y, T::one());
            if r > T::zero() {
                best = best.max(povzner_lhs(x, y) / r);
            }
        }
    }
    best
}

/// Supersolution system for the normalized moments
/// `z_p' = α(E) (A' p^{a/2-1/2} Z_p - A'' p^{a/2} z_p^{1+1/(2p)})`
/// on `p ∈ {3/2, 2, ..., p_max}`.
#[derive(Debug, Clone)]
pub struct MomentOdeSystem<T> {
    pub a: T,
    /// `γ_p = gamma_scale · min{1, 4/(p+1)}`, `gamma_scale ∈ (0, 1)`.
    pub gamma_scale: T,
    pub p_max: T,
    pub intensity: Intensity<T>,
    pub big_a: T,
    pub a_prime: T,
    pub a_second: T,
    indices: Vec<T>,
}

impl<T: Real> MomentOdeSystem<T> {
    pub fn new(a: T, gamma_scale: T, p_max: T, intensity: Intensity<T>) -> Result<Self, MomentsError> {
        if !(a >= T::one()) {
            return Err(MomentsError::Invalid(format!("scale a = {a} must be ≥ 1")));
        }
        if !(gamma_scale > T::zero() && gamma_scale < T::one()) {
            return Err(MomentsError::Invalid(format!("gamma scale {gamma_scale} must lie in (0, 1)")));
        }
        if !(p_max >= T::c(1.5)) {
            return Err(MomentsError::Invalid(format!("p_max = {p_max} must be ≥ 3/2")));
        }
        let indices: Vec<T> = half_integer_grid(p_max).into_iter().filter(|&p| p >= T::c(1.5)).collect();
        let mut sys = Self {
            a,
            gamma_scale,
            p_max,
            intensity,
            big_a: T::zero(),
            a_prime: T::zero(),
            a_second: T::infinity(),
            indices,
        };
        sys.big_a = sys.indices.iter().map(|&p| sys.a_p(p)).fold(T::zero(), T::max);
        for &p in &sys.indices {
            let g = sys.gamma_p(p);
            let half = T::c(0.5);
            let ap = (ln_gamma(a * p + a * half + T::one()) - ln_gamma(a * p + half)).exp() * sys.big_a * g
                / p.powf(a * half - half);
            let app = (T::one() - g) * (ln_gamma(a * p + half) / (T::c(2.0) * p)).exp() / p.powf(a * half);
            sys.a_prime = sys.a_prime.max(ap);
            sys.a_second = sys.a_second.min(app);
        }
        Ok(sys)
    }

    pub fn indices(&self) -> &[T] {
        &self.indices
    }

    pub fn gamma_p(&self, p: T) -> T {
        self.gamma_scale * T::one().min(T::c(4.0) / (p + T::one()))
    }

    /// Smallest `A` with `S_p ≤ A Γ(ap + a/2 + 1) Z_p` at this `p`.
    pub fn a_p(&self, p: T) -> T {
        let a = self.a;
        let half = T::c(0.5);
        let kp = ((p + T::one()) * half).floor().to_f64_lossy() as usize;
        let denom = ln_gamma(a * p + a * half + T::one());
        let mut acc = T::zero();
        for k in 1..=kp {
            let kf = T::from_usize_lossy(k);
            let c = binomial(p, k).abs();
            let t1 = ln_gamma(a * (kf + half) + half) + ln_gamma(a * (p - kf) + half) - denom;
            let t2 = ln_gamma(a * kf + half) + ln_gamma(a * (p - kf + half) + half) - denom;
            acc += c * (t1.exp() + t2.exp());
        }
        acc
    }

    /// `p₀ = max{3/2, (2A'/A'')²}`
    pub fn p0(&self) -> T {
        let r = T::c(2.0) * self.a_prime / self.a_second;
        T::c(1.5).max(r * r)
    }

    fn normalize(&self, p: T, m: T) -> T {
        m / gamma(self.a * p + T::c(0.5))
    }

    /// `z_{1/2}` and `z_1` from the energy: `m_{1/2} ≤ E^{1/2}`, `m_1 = E`.
    fn lower(&self, energy: T) -> (T, T) {
        (self.normalize(T::c(0.5), energy.max(T::zero()).sqrt()), self.normalize(T::one(), energy))
    }

    fn z_at(&self, q: T, state: &[T], low: (T, T)) -> T {
        if (q - T::c(0.5)).abs() < T::c(1e-9) {
            low.0
        } else if (q - T::one()).abs() < T::c(1e-9) {
            low.1
        } else {
            let i = ((q - T::c(1.5)) * T::c(2.0)).round().to_f64_lossy() as usize;
            state[i]
        }
    }

    /// `Z_p = max_{k=1..k_p} {z_{k+1/2} z_{p-k}, z_k z_{p-k+1/2}}`
    fn big_z(&self, p: T, state: &[T], low: (T, T)) -> T {
        let half = T::c(0.5);
        let kp = ((p + T::one()) * half).floor().to_f64_lossy() as usize;
        let mut best = T::zero();
        for k in 1..=kp {
            let kf = T::from_usize_lossy(k);
            let a = self.z_at(kf + half, state, low) * self.z_at(p - kf, state, low);
            let b = self.z_at(kf, state, low) * self.z_at(p - kf + half, state, low);
            best = best.max(a).max(b);
        }
        best
    }

    fn rhs(&self, p: T, zp: T, big_z: T, alpha: T) -> T {
        let half = T::c(0.5);
        let zp = zp.max(T::zero());
        alpha
            * (self.a_prime * p.powf(self.a * half - half) * big_z
                - self.a_second * p.powf(self.a * half) * zp.powf(T::one() + T::one() / (T::c(2.0) * p)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBounds<T> {
    pub times: Vec<T>,
    pub indices: Vec<T>,
    /// `z̄_p(t)` per output time.
    pub z: Vec<Vec<T>>,
    pub scale: T,
    pub stats: OdeStats,
}

impl<T: Real> MomentBounds<T> {
    /// Bound on `m_p` at output `time_index`.
    pub fn m_bound(&self, time_index: usize, p: T) -> Option<T> {
        let i = self.indices.iter().position(|&q| (q - p).abs() < T::c(1e-9))?;
        Some(self.z[time_index][i] * gamma(self.scale * p + T::c(0.5)))
    }
}

/// Integrate the supersolution system from the moments in `initial`
/// (which must contain every `p ∈ {3/2, ..., p_max}`), with the energy
/// profile `energy(t)` driving `α` and the lower components.
pub fn integrate_moment_bounds<T: Real, E: Fn(T) -> T>(
    system: &MomentOdeSystem<T>,
    initial: &MomentVector<T>,
    energy: E,
    output_times: &[T],
) -> Result<MomentBounds<T>, MomentsError> {
    let mut z0 = Vec::with_capacity(system.indices.len());
    for &p in &system.indices {
        let m = initial.get(p).ok_or_else(|| MomentsError::Invalid(format!("initial moments lack p = {p}")))?;
        z0.push(system.normalize(p, m));
    }
    integrate_normalized(system, &z0, &energy, output_times, None)
}

fn integrate_normalized<T: Real, E: Fn(T) -> T>(
    system: &MomentOdeSystem<T>,
    z0: &[T],
    energy: &E,
    output_times: &[T],
    frozen: Option<&[bool]>,
) -> Result<MomentBounds<T>, MomentsError> {
    if z0.iter().any(|z| !(z.is_finite() && *z >= T::zero())) {
        return Err(MomentsError::Invalid("initial bounds must be finite and nonnegative".into()));
    }
    let opts = OdeOptions { rtol: T::c(1e-9), atol: T::c(1e-12), ..OdeOptions::default() };
    let rhs = |t: T, y: &[T], dy: &mut [T]| {
        let en = energy(t);
        let alpha = if en > T::zero() { system.intensity.alpha(en) } else { T::zero() };
        let low = system.lower(en);
        for (i, &p) in system.indices.iter().enumerate() {
            dy[i] = if frozen.is_some_and(|f| f[i]) {
                T::zero()
            } else {
                system.rhs(p, y[i], system.big_z(p, y, low), alpha)
            };
        }
    };
    let (z, stats) = integrate_adaptive(rhs, T::zero(), z0, output_times, &opts)?;
    Ok(MomentBounds { times: output_times.to_vec(), indices: system.indices.clone(), z, scale: system.a, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantRegionCheck<T> {
    pub p0: T,
    /// Grid indices with `p ≥ p₀` (the ones that evolve).
    pub checked: Vec<T>,
    /// `A' ≤ A'' √p` for every checked index (the flow points inward on the face).
    pub face_condition: bool,
    /// `max_t max_p z̄_p(t) / x^p - 1` over the checked indices.
    pub max_excess: T,
    pub holds: bool,
}

/// Start on the corner `z_p = x^p` and verify `z̄_p(t) ≤ x^p` for `p ≥ p₀`.
/// Components below `p₀` are held at `x^p`; the lower components come from
/// `energy`, which must satisfy `z_{1/2}, z_1 ≤ x^{1/2}, x`.
pub fn invariant_region_check<T: Real, E: Fn(T) -> T>(
    system: &MomentOdeSystem<T>,
    x: T,
    energy: E,
    output_times: &[T],
) -> Result<InvariantRegionCheck<T>, MomentsError> {
    let p0 = system.p0();
    let e0 = energy(T::zero());
    let low = system.lower(e0);
    if low.0 > x.sqrt() || low.1 > x {
        return Err(MomentsError::Invalid(format!("x = {x} is below the energy components")));
    }
    let z0: Vec<T> = system.indices.iter().map(|&p| x.powf(p)).collect();
    let frozen: Vec<bool> = system.indices.iter().map(|&p| p < p0).collect();
    let checked: Vec<T> = system.indices.iter().copied().filter(|&p| p >= p0).collect();
    let face_condition = checked.iter().all(|&p| system.a_prime <= system.a_second * p.sqrt());
    let traj = integrate_normalized(system, &z0, &energy, output_times, Some(&frozen))?;
    let mut max_excess = -T::one();
    for row in &traj.z {
        for (i, &p) in system.indices.iter().enumerate() {
            if !frozen[i] {
                max_excess = max_excess.max(row[i] / x.powf(p) - T::one());
            }
        }
    }
    if checked.is_empty() {
        max_excess = T::zero();
    }
    Ok(InvariantRegionCheck { p0, checked, face_condition, max_excess, holds: max_excess <= T::c(1e-8) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMomentEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub log_value: T,
}

/// `(1/n) Σ exp(a |v_i|^η)` evaluated in log-sum-exp form.
pub fn exp_moment<T: Real>(ensemble: &Ensemble<T>, a: T, eta: T) -> Result<ExpMomentEstimate<T>, MomentsError> {
    if !(a >= T::zero()) || !(eta > T::zero() && eta <= T::c(2.0)) {
        return Err(MomentsError::Invalid(format!("need a ≥ 0 and η ∈ (0, 2] (got a = {a}, η = {eta})")));
    }
    let exps: Vec<T> = ensemble.speeds().map(|s| a * s.powf(eta)).collect();
    let n = T::from_usize_lossy(exps.len());
    let top = exps.iter().copied().fold(T::neg_infinity(), T::max);
    let scaled: Vec<T> = exps.iter().map(|&x| (x - top).exp()).collect();
    let mean = kahan_sum(scaled.iter().copied()) / n;
    let var = if exps.len() > 1 {
        kahan_sum(scaled.iter().map(|&s| (s - mean) * (s - mean))) / (n - T::one())
    } else {
        T::zero()
    };
    let log_value = top + mean.ln();
    let k = top.exp();
    Ok(ExpMomentEstimate { value: k * mean, std_error: k * (var / n).sqrt(), log_value })
}

/// Tail of the initial datum: `f_in e^{a|v|^η} ∈ L¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass<T> {
    /// Compactly supported or Gaussian: every `η ≤ 2` works.
    Gaussian,
    StretchedExponential { eta: T },
    Unknown,
}

impl<T: Real> TailClass<T> {
    pub fn eta(&self) -> Option<T> {
        match *self {
            TailClass::Gaussian => Some(T::c(2.0)),
            TailClass::StretchedExponential { eta } => Some(eta),
            TailClass::Unknown => None,
        }
    }
}

/// Declared bounds feeding the cooling classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingBounds<T> {
    pub alpha_bounded_near_zero: bool,
    pub spreading_uniform_near_zero: bool,
    /// `Δ(E, u) ≥ Δ₀ E^δ` for all `u` and `E ≤ E₀`, as `(Δ₀, δ)`.
    pub lower: Option<(T, T)>,
    /// `Δ(E, u) ≤ Δ₀(E)` with `Δ₀` nondecreasing (Δ bounded near `E = 0`).
    pub upper_increasing: bool,
    pub h4: bool,
    pub tail_eta: Option<T>,
    pub initial_energy: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Finite,
    Infinite,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rationale {
    AlphaJ,
    DeltaLe0,
    DeltaGeMinusHalf,
    None,
}

impl Rationale {
    pub fn tag(&self) -> &'static str {
        match self {
            Rationale::AlphaJ => "alphaj",
            Rationale::DeltaLe0 => "deltale0",
            Rationale::DeltaGeMinusHalf => "deltage-1/2",
            Rationale::None => "none",
        }
    }
}

impl Verdict {
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Finite => "finite",
            Verdict::Infinite => "infinite",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingVerdict<T> {
    pub verdict: Verdict,
    pub rationale: Rationale,
    /// Upper bound on the cooling time when the verdict is finite.
    pub bound: Option<T>,
}

/// Time for `E' = -Δ₀ (2E)^{3/2} E^δ` to reach zero from `E₀` (δ < -1/2).
pub fn cooling_time_bound<T: Real>(delta0: T, delta: T, e0: T) -> T {
    let s = delta + T::c(1.5);
    e0.powf(T::one() - s) / ((T::one() - s) * delta0 * T::c(2.0).powf(T::c(1.5)))
}

pub fn classify_bounds<T: Real>(b: &CoolingBounds<T>) -> Result<CoolingVerdict<T>, MomentsError> {
    if let Some((d0, delta)) = b.lower {
        if !(d0 > T::zero()) {
            return Err(MomentsError::Invalid(format!("Δ₀ = {d0} must be positive")));
        }
        if delta < T::zero() && b.alpha_bounded_near_zero {
            return Err(MomentsError::Contradiction(format!(
                "Δ ≥ Δ₀ E^{delta} blows up as E → 0 but α is declared bounded"
            )));
        }
        if delta < T::zero() && b.upper_increasing {
            return Err(MomentsError::Contradiction(format!(
                "Δ ≥ Δ₀ E^{delta} blows up as E → 0 but Δ is declared bounded by an increasing Δ₀(E)"
            )));
        }
        if delta < T::c(-0.5) {
            if !(b.initial_energy > T::zero()) {
                return Err(MomentsError::Invalid("initial energy must be positive".into()));
            }
            return Ok(CoolingVerdict {
                verdict: Verdict::Finite,
                rationale: Rationale::DeltaGeMinusHalf,
                bound: Some(cooling_time_bound(d0, delta, b.initial_energy)),
            });
        }
    }
    if b.alpha_bounded_near_zero && b.spreading_uniform_near_zero {
        return Ok(CoolingVerdict { verdict: Verdict::Infinite, rationale: Rationale::AlphaJ, bound: None });
    }
    if b.h4 && b.upper_increasing && b.tail_eta.is_some_and(|eta| eta > T::one() && eta <= T::c(2.0)) {
        return Ok(CoolingVerdict { verdict: Verdict::Infinite, rationale: Rationale::DeltaLe0, bound: None });
    }
    Ok(CoolingVerdict { verdict: Verdict::Undetermined, rationale: Rationale::None, bound: None })
}

impl<T: Real> CoolingBounds<T> {
    /// Bounds implied by a kernel for energies in `(0, E₀]`.
    pub fn from_kernel(spec: &KernelSpec<T>, tail: TailClass<T>, initial_energy: T) -> Result<Self, MomentsError> {
        if !(initial_energy > T::zero()) {
            return Err(MomentsError::Invalid("initial energy must be positive".into()));
        }
        let assumptions = Assumptions::check(spec);
        let quad = QuadratureConfig::new(spec.dim, 64);
        let (c, k) = match spec.intensity {
            Intensity::Constant(c) => (c, T::zero()),
            Intensity::Power { c, k } => (c, k),
        };
        // Angular factor ∫ (1-x)/2 b̃ dσ, so that Δ = α (1-e²) C_N for σ-free e.
        let unit = |e: T| -> Result<T, MomentsError> {
            let s = KernelSpec { intensity: Intensity::Constant(T::one()), restitution: Restitution::Constant(e), ..spec.clone() };
            let mut u = vec![T::zero(); spec.dim];
            u[0] = T::one();
            dissipation_rate(&s, T::one(), &u, &quad).map(|d| d.value).map_err(|e| MomentsError::Invalid(e.to_string()))
        };
        let (lower, upper_exponent) = match spec.restitution {
            Restitution::Sticky => (Some((c * T::c(0.25), k)), Some(k)),
            Restitution::Constant(e) if e < T::one() => {
                let g = unit(e)?;
                (Some((c * g, k)), Some(k))
            }
            Restitution::Constant(_) => (None, Some(k)),
            Restitution::EnergyDependent { c: ce, p } => {
                // 1 - exp(-y) ≥ y (1 - exp(-y₀)) / y₀ on y ≤ y₀ = 2 c_e E₀^p.
                let cn = unit(T::zero())?;
                let y0 = T::c(2.0) * ce * initial_energy.powf(p);
                let kappa = if y0 > T::zero() { (T::one() - (-y0).exp()) / y0 } else { T::one() };
                let d0 = c * cn * T::c(2.0) * ce * kappa;
                (if d0 > T::zero() { Some((d0, k + p)) } else { None }, Some(k + p))
            }
            // e → 1 as the relative speed vanishes: no positive lower bound.
            Restitution::ViscoElastic { .. } => (None, Some(k)),
            Restitution::Stochastic(_) => (None, None),
        };
        Ok(Self {
            alpha_bounded_near_zero: assumptions.alpha_bounded_near_zero,
            spreading_uniform_near_zero: assumptions.spreading_uniform_near_zero,
            lower,
            upper_increasing: upper_exponent.is_some_and(|x| x >= T::zero()),
            h4: assumptions.h4,
            tail_eta: tail.eta(),
            initial_energy,
        })
    }
}

pub fn classify_cooling<T: Real>(
    spec: &KernelSpec<T>,
    tail: TailClass<T>,
    initial_energy: T,
) -> Result<CoolingVerdict<T>, MomentsError> {
    classify_bounds(&CoolingBounds::from_kernel(spec, tail, initial_energy)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaffFit<T> {
    pub e0: T,
    pub tau: T,
    pub kappa: T,
    /// Root-mean-square residual in `log E`.
    pub residual: T,
}

/// Least-squares fit of `E(t) = E₀ (1 + t/τ)^{-κ}` in log space.
pub fn haff_fit<T: Real>(times: &[T], energies: &[T]) -> Result<HaffFit<T>, MomentsError> {
    if times.len() != energies.len() || times.len() < 3 {
        return Err(MomentsError::Invalid("need at least three (t, E) pairs of equal length".into()));
    }
    if energies.iter().any(|&e| !(e > T::zero())) {
        return Err(MomentsError::Invalid("energies must be strictly positive".into()));
    }
    for i in 1..energies.len() {
        if energies[i] > energies[i - 1] {
            return Err(MomentsError::NotMonotone { index: i });
        }
        if !(times[i] > times[i - 1]) {
            return Err(MomentsError::Invalid(format!("times must increase (index {i})")));
        }
    }
    let y: Vec<T> = energies.iter().map(|e| e.ln()).collect();
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    // For fixed τ the model is linear in (log E₀, κ).
    let solve = |tau: T| -> (T, T, T) {
        let x: Vec<T> = times.iter().map(|&t| (T::one() + (t - t0) / tau).ln()).collect();
        let n = T::from_usize_lossy(x.len());
        let (mx, my) = (kahan_sum(x.iter().copied()) / n, kahan_sum(y.iter().copied()) / n);
        let sxx = kahan_sum(x.iter().map(|&a| (a - mx) * (a - mx)));
        let sxy = kahan_sum(x.iter().zip(&y).map(|(&a, &b)| (a - mx) * (b - my)));
        let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
        let intercept = my - slope * mx;
        let rss = kahan_sum(x.iter().zip(&y).map(|(&a, &b)| {
            let r = b - intercept - slope * a;
            r * r
        }));
        (intercept, -slope, rss)
    };
    let lo = (span * T::c(1e-6)).ln();
    let hi = (span * T::c(1e6)).ln();
    let grid = 200;
    let mut best = (lo, T::infinity());
    for i in 0..=grid {
        let s = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(grid);
        let rss = solve(s.exp()).2;
        if rss < best.1 {
            best = (s, rss);
        }
    }
    let step = (hi - lo) / T::from_usize_lossy(grid);
    let (s, _) = golden_min(|s: T| solve(s.exp()).2, best.0 - step, best.0 + step, T::c(1e-12), 400);
    let tau = s.exp();
    let (intercept, kappa, rss) = solve(tau);
    let n = T::from_usize_lossy(y.len());
    Ok(HaffFit { e0: intercept.exp(), tau, kappa, residual: (rss / n).sqrt() })
}

/// Largest `T*` with `C₁ α₀(E/2) T* ≤ Y₃` and `C₁ α₀(E/2) 2 Y₃ T* ≤ E/2`.
/// Returns `+∞` when `α₀(E/2) = 0`.
pub fn local_existence_horizon<T: Real>(e_in: T, y3_in: T, alpha0_half: T, c1: T) -> Result<T, MomentsError> {
    if !(e_in > T::zero() && y3_in > T::zero() && c1 > T::zero()) {
        return Err(MomentsError::Invalid("E_in, Y₃ and C₁ must be positive".into()));
    }
    if !(alpha0_half >= T::zero()) {
        return Err(MomentsError::Invalid("α₀ must be nonnegative".into()));
    }
    if alpha0_half == T::zero() {
        return Ok(T::infinity());
    }
    let k = c1 * alpha0_half;
    Ok((y3_in / k).min(e_in / (T::c(4.0) * k * y3_in)))
}

/// `Y₃ ≤ 2 Y₃(0)` and `E ≥ E(0)/2` along a recorded series.
pub fn corridor_holds<T: Real>(y3: &[T], energy: &[T]) -> bool {
    match (y3.first(), energy.first()) {
        (Some(&y0), Some(&e0)) => {
            y3.iter().all(|&y| y <= T::c(2.0) * y0) && energy.iter().all(|&e| e >= T::c(0.5) * e0)
        }
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration<T> {
    /// Fraction of particles with `|v| > r`.
    pub mass_outside: T,
    /// `(1/n) Σ_{|v_i| > r} |v_i|²`
    pub energy_outside: T,
}

pub fn concentration_diagnostics<T: Real>(ensemble: &Ensemble<T>, r: T) -> Result<Concentration<T>, MomentsError> {
    if !(r > T::zero()) {
        return Err(MomentsError::Invalid(format!("radius {r} must be positive")));
    }
    let n = T::from_usize_lossy(ensemble.len());
    let r2 = r * r;
    let mut count = 0usize;
    let mut en = Vec::new();
    for v in ensemble.velocities.chunks_exact(ensemble.dim) {
        let s = norm2(v);
        if s > r2 {
            count += 1;
            en.push(s);
        }
    }
    Ok(Concentration { mass_outside: T::from_usize_lossy(count) / n, energy_outside: kahan_sum(en) / n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_speed() -> Ensemble<f64> {
        Ensemble::from_rows(3, vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0]).unwrap()
    }

    #[test]
    fn unit_speed_moments() {
        let mv = moments(&unit_speed(), &[0.0, 0.5, 1.0, 2.5], 1.0);
        assert!(mv.values.iter().all(|&m| (m - 1.0).abs() < 1e-15));
        assert!(mv.std_errors.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn povzner_equality_at_diagonal() {
        let c = default_povzner_constant::<f64>();
        let chk = povzner_check(1.0, 1.0, c);
        assert!((chk.lhs - 2.0 * (2f64.powf(1.5) - 2.0)).abs() < 1e-14);
        assert!((chk.rhs - 4.0 * c).abs() < 1e-14);
        assert!(chk.holds);
        assert!(!povzner_check(1.0, 1.0, c - 1e-6).holds);
        assert_eq!(povzner_check(0.0, 3.0, c).lhs, 0.0);
    }

    #[test]
    fn moment_constants_default_scale() {
        let sys = MomentOdeSystem::new(1.0f64, 0.9, 5.0, Intensity::Constant(1.0)).unwrap();
        assert!((sys.big_a - 1.6).abs() < 0.05, "A = {}", sys.big_a);
        assert!(sys.p0() > 1e3);
    }

    #[test]
    fn zero_intensity_freezes_bounds() {
        let sys = MomentOdeSystem::new(1.0f64, 0.5, 3.0, Intensity::Constant(0.0)).unwrap();
        let mv = moments(&unit_speed(), &half_integer_grid(3.0), 1.0);
        let b = integrate_moment_bounds(&sys, &mv, |_| 1.0, &[0.5, 1.0]).unwrap();
        let z0: Vec<f64> = sys.indices().iter().map(|&p| mv.get(p).unwrap() / gamma(p + 0.5)).collect();
        for row in &b.z {
            for (a, b) in row.iter().zip(&z0) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn haff_fit_recovers_exact_law() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.4).collect();
        let e: Vec<f64> = t.iter().map(|&t| 3.0 * (1.0 + t).powi(-2)).collect();
        let fit = haff_fit(&t, &e).unwrap();
        assert!((fit.kappa - 2.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.tau - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.e0 - 3.0).abs() < 1e-6);
    }

    #[test]
    fn haff_fit_constant_and_rising() {
        let t = [0.0f64, 1.0, 2.0, 3.0];
        let fit = haff_fit(&t, &[2.0; 4]).unwrap();
        assert!(fit.kappa.abs() < 1e-12);
        assert_eq!(haff_fit(&t, &[2.0, 1.0, 1.5, 1.0]), Err(MomentsError::NotMonotone { index: 2 }));
    }

    #[test]
    fn local_horizon_examples() {
        assert_eq!(local_existence_horizon(1.0, 1.0, 1.0, 1.0).unwrap(), 0.25);
        assert_eq!(local_existence_horizon(1.0, 1.0, 0.0, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(local_existence_horizon(1.0, 1.0, 2.0, 1.0).unwrap(), 0.125);
    }

    #[test]
    fn concentration_of_two_beams() {
        let ens = Ensemble::from_rows(3, vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
        let c = concentration_diagnostics(&ens, 0.5).unwrap();
        assert_eq!((c.mass_outside, c.energy_outside), (1.0, 1.0));
        let rest = Ensemble::from_rows(2, vec![0.0; 4]).unwrap();
        let c = concentration_diagnostics(&rest, 0.5).unwrap();
        assert_eq!((c.mass_outside, c.energy_outside), (0.0, 0.0));
    }

    #[test]
    fn exp_moment_trivial() {
        let rest = Ensemble::from_rows(3, vec![0.0; 9]).unwrap();
        assert_eq!(exp_moment(&rest, 0.7, 1.0).unwrap().value, 1.0);
        assert_eq!(exp_moment(&unit_speed(), 0.0, 0.4).unwrap().value, 1.0);
    }

    #[test]
    fn cooling_time_examples() {
        assert!((cooling_time_bound(1.0f64, -1.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((cooling_time_bound(0.25f64, -1.0, 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }
}
