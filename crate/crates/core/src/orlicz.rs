//! Young functions, Orlicz norms on gridded densities, and the gain-term
//! constant with its Gronwall envelope.

use std::fmt::Write as _;

use thiserror::Error;

use crate::collision::{KernelSpec, QuadratureConfig, angular_spreading};
use crate::dsmc::Ensemble;
use crate::numerics::special::gamma;
use crate::numerics::{RootError, brent_root, expand_bracket_up, sphere_area};
use crate::scalar::{kahan_sum, norm, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrliczError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("derivative of the Young function is not invertible at {y}")]
    NotInvertible { y: f64 },
    #[error("root finding failed: {0}")]
    Root(#[from] RootError),
    #[error("dual norm of the derivative vanishes")]
    VanishingDual,
    #[error("no eps in (0, 1] has j(eps) <= {threshold}; smallest tried {eps} gave {j}")]
    SelectorFailed { threshold: f64, eps: f64, j: f64 },
    #[error("malformed table at line {line}: {msg}")]
    Table { line: usize, msg: String },
}

/// Knots of a tabulated Young function: `t`, `Λ(t)`, `Λ'(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungTable<T> {
    pub t: Vec<T>,
    pub value: Vec<T>,
    pub slope: Vec<T>,
    /// Λ'' used for the quadratic extension past the last knot.
    tail_curvature: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum YoungFamily<T> {
    /// `coeff · t^p`, `p > 1`.
    Power { p: T, coeff: T },
    /// `t ln(1 + t)`.
    TLogT,
    /// `t² / (1 + t)`; doubling and convex but only asymptotically linear.
    Mixed,
    Tabulated(YoungTable<T>),
    /// `Λ*(y) = y x - Λ(x)` with `x = (Λ')⁻¹(y)`.
    Complementary(Box<YoungFunction<T>>),
}

/// Outcome of the grid checks on the three structural hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungHypotheses<T> {
    /// `Λ(0) = Λ'(0) = 0`.
    pub vanishes_at_zero: bool,
    /// `Λ'` strictly increasing and positive on the grid.
    pub convex_increasing: bool,
    /// Largest `Λ(2t)/Λ(t)` on the grid.
    pub doubling_constant: T,
    /// The doubling ratio stays bounded (no growth at the top of the grid).
    pub doubling: bool,
    pub superlinear: bool,
}

impl<T> YoungHypotheses<T> {
    pub fn all(&self) -> bool {
        self.vanishes_at_zero && self.convex_increasing && self.doubling && self.superlinear
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoungFunction<T> {
    pub family: YoungFamily<T>,
}

impl<T: Real> YoungFunction<T> {
    /// `t^p / p`.
    pub fn power(p: T) -> Result<Self, OrliczError> {
        Self::monomial(p, T::one() / p)
    }

    /// `coeff · t^p`.
    pub fn monomial(p: T, coeff: T) -> Result<Self, OrliczError> {
        if !(p > T::one()) || !(coeff > T::zero()) || !p.is_finite() || !coeff.is_finite() {
            return Err(OrliczError::Invalid(format!("power family needs p > 1 and coeff > 0, got p={p}, coeff={coeff}")));
        }
        Ok(Self { family: YoungFamily::Power { p, coeff } })
    }

    pub fn t_log_t() -> Self {
        Self { family: YoungFamily::TLogT }
    }

    pub fn mixed() -> Self {
        Self { family: YoungFamily::Mixed }
    }

    /// Tabulated function interpolated by cubic Hermite splines on the given
    /// slopes. Knots must start at `t = 0` with zero value and slope, and each
    /// interval must admit a convex interpolant.
    pub fn tabulated(t: Vec<T>, value: Vec<T>, slope: Vec<T>) -> Result<Self, OrliczError> {
        let n = t.len();
        if n < 2 || value.len() != n || slope.len() != n {
            return Err(OrliczError::Invalid("table needs at least two knots of equal length columns".into()));
        }
        if t[0] != T::zero() || value[0].abs() > T::epsilon() || slope[0].abs() > T::epsilon() {
            return Err(OrliczError::Invalid("table must start at (0, 0, 0)".into()));
        }
        let tol = T::c(1e-9);
        for k in 0..n - 1 {
            let h = t[k + 1] - t[k];
            if !(h > T::zero()) {
                return Err(OrliczError::Invalid(format!("knots not increasing at {k}")));
            }
            if !(slope[k + 1] > slope[k]) {
                return Err(OrliczError::Invalid(format!("slopes not increasing at {k}")));
            }
            let secant = (value[k + 1] - value[k]) / h;
            let scale = slope[k + 1].abs().max(T::one());
            // Hermite cubic is convex iff 2d0 + d1 <= 3s <= d0 + 2d1.
            let three = T::c(3.0) * secant;
            if T::c(2.0) * slope[k] + slope[k + 1] > three + tol * scale
                || three > slope[k] + T::c(2.0) * slope[k + 1] + tol * scale
            {
                return Err(OrliczError::Invalid(format!("interval {k} admits no convex cubic")));
            }
        }
        let h = t[n - 1] - t[n - 2];
        let end_curv = (T::c(6.0) * (value[n - 2] - value[n - 1]) + h * (T::c(2.0) * slope[n - 2] + T::c(4.0) * slope[n - 1])) / (h * h);
        let tail_curvature = if end_curv > T::zero() { end_curv } else { slope[n - 1] / t[n - 1] };
        Ok(Self { family: YoungFamily::Tabulated(YoungTable { t, value, slope, tail_curvature }) })
    }

    pub fn value(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        match &self.family {
            YoungFamily::Power { p, coeff } => *coeff * t.powf(*p),
            YoungFamily::TLogT => t * t.ln_1p(),
            YoungFamily::Mixed => t * t / (T::one() + t),
            YoungFamily::Tabulated(tab) => tab.eval(t).0,
            YoungFamily::Complementary(inner) => match inner.derivative_inverse(t) {
                Ok(x) => t * x - inner.value(x),
                Err(_) => T::infinity(),
            },
        }
    }

    pub fn derivative(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        match &self.family {
            YoungFamily::Power { p, coeff } => *coeff * *p * t.powf(*p - T::one()),
            YoungFamily::TLogT => t.ln_1p() + t / (T::one() + t),
            YoungFamily::Mixed => {
                let d = T::one() + t;
                t * (T::c(2.0) + t) / (d * d)
            }
            YoungFamily::Tabulated(tab) => tab.eval(t).1,
            YoungFamily::Complementary(inner) => inner.derivative_inverse(t).unwrap_or(T::infinity()),
        }
    }

    /// Solves `Λ'(x) = y` for `x ≥ 0`.
    pub fn derivative_inverse(&self, y: T) -> Result<T, OrliczError> {
        if !(y >= T::zero()) || !y.is_finite() {
            return Err(OrliczError::NotInvertible { y: y.to_f64_lossy() });
        }
        if y == T::zero() {
            return Ok(T::zero());
        }
        match &self.family {
            YoungFamily::Power { p, coeff } => return Ok((y / (*coeff * *p)).powf(T::one() / (*p - T::one()))),
            YoungFamily::Mixed if y >= T::one() => return Err(OrliczError::NotInvertible { y: y.to_f64_lossy() }),
            YoungFamily::Mixed => {
                // t(2 + t) = y (1 + t)² has the positive root 1/sqrt(1-y) - 1.
                return Ok(T::one() / (T::one() - y).sqrt() - T::one());
            }
            YoungFamily::Complementary(inner) => {
                let d = inner.derivative(y);
                return if d.is_finite() { Ok(d) } else { Err(OrliczError::NotInvertible { y: y.to_f64_lossy() }) };
            }
            _ => {}
        }
        let g = |x: T| self.derivative(x) - y;
        let hi = expand_bracket_up(g, T::zero(), T::one(), 2000).map_err(|_| OrliczError::NotInvertible { y: y.to_f64_lossy() })?;
        let lo = if hi > T::c(3.0) { (hi - T::one()) / T::c(2.0) } else { T::zero() };
        let x = brent_root(g, lo, hi, T::epsilon() * hi, 300)?;
        Ok(x)
    }

    /// Complementary function `Λ*`. Rejected when `Λ'` is bounded.
    pub fn complementary(&self) -> Result<Self, OrliczError> {
        if let YoungFamily::Complementary(inner) = &self.family {
            return Ok((**inner).clone());
        }
        let probe = T::c(1e8);
        let d = self.derivative(probe);
        if !(d > self.derivative(T::c(1e4)) * T::c(1.05)) {
            return Err(OrliczError::NotInvertible { y: d.to_f64_lossy() });
        }
        Ok(Self { family: YoungFamily::Complementary(Box::new(self.clone())) })
    }

    /// Checks the structural hypotheses on a log grid `[1e-6, 1e6]`.
    pub fn hypotheses(&self) -> YoungHypotheses<T> {
        let grid: Vec<T> = (0..=240).map(|i| T::c(10f64.powf(-6.0 + 12.0 * i as f64 / 240.0))).collect();
        let vanishes_at_zero = self.value(T::zero()) == T::zero() && self.derivative(T::zero()) == T::zero();

        let derivs: Vec<T> = grid.iter().map(|&t| self.derivative(t)).collect();
        let convex_increasing = derivs[0] > T::zero() && derivs.windows(2).all(|w| w[1] > w[0] || !w[1].is_finite());

        let ratios: Vec<T> = grid
            .iter()
            .map(|&t| {
                let (a, b) = (self.value(t), self.value(T::c(2.0) * t));
                if a > T::zero() { b / a } else { T::infinity() }
            })
            .collect();
        let finite = ratios.iter().all(|r| r.is_finite());
        let doubling_constant = ratios.iter().copied().fold(T::zero(), T::max);
        let split = ratios.len() - 20;
        let top = ratios[split..].iter().copied().fold(T::zero(), T::max);
        let rest = ratios[..split].iter().copied().fold(T::zero(), T::max);
        let doubling = finite && top <= rest * T::c(1.1);

        // Λ(t)/t must keep growing: compare the top of the grid with three
        // decades below.
        let r = |t: T| self.value(t) / t;
        let (hi, mid) = (r(T::c(1e6)), r(T::c(1e3)));
        let superlinear = hi.is_finite() && hi >= mid * T::c(1.25);

        YoungHypotheses { vanishes_at_zero, convex_increasing, doubling_constant, doubling, superlinear }
    }

    /// CSV with header `t,Lambda,dLambda` evaluated at the given points.
    pub fn to_csv(&self, points: &[T]) -> String {
        let mut out = String::from("t,Lambda,dLambda\n");
        for &t in points {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                t.to_f64_lossy(),
                self.value(t).to_f64_lossy(),
                self.derivative(t).to_f64_lossy()
            );
        }
        out
    }

    /// Knots of a tabulated function, for [`to_csv`](Self::to_csv).
    pub fn knots(&self) -> Option<&[T]> {
        match &self.family {
            YoungFamily::Tabulated(tab) => Some(&tab.t),
            _ => None,
        }
    }

    /// Reloads a table written by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self, OrliczError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "t,Lambda,dLambda" => {}
            _ => return Err(OrliczError::Table { line: 1, msg: "expected header t,Lambda,dLambda".into() }),
        }
        let (mut t, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(OrliczError::Table { line: i + 1, msg: format!("expected 3 columns, got {}", cols.len()) });
            }
            let mut parsed = [0.0f64; 3];
            for (slot, c) in parsed.iter_mut().zip(&cols) {
                *slot = c.trim().parse().map_err(|e| OrliczError::Table { line: i + 1, msg: format!("{e}") })?;
            }
            t.push(T::c(parsed[0]));
            v.push(T::c(parsed[1]));
            d.push(T::c(parsed[2]));
        }
        Self::tabulated(t, v, d)
    }
}

impl<T: Real> YoungTable<T> {
    fn eval(&self, x: T) -> (T, T) {
        let n = self.t.len();
        let last = self.t[n - 1];
        if x >= last {
            let s = x - last;
            let (y, d, c) = (self.value[n - 1], self.slope[n - 1], self.tail_curvature);
            return (y + d * s + T::c(0.5) * c * s * s, d + c * s);
        }
        let k = self.t.partition_point(|&t| t <= x).saturating_sub(1).min(n - 2);
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let (y0, y1, d0, d1) = (self.value[k], self.value[k + 1], self.slope[k], self.slope[k + 1]);
        let (s2, s3) = (s * s, s * s * s);
        let two = T::c(2.0);
        let three = T::c(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let six = T::c(6.0);
        let dh00 = six * s2 - six * s;
        let dh10 = three * s2 - T::c(4.0) * s + T::one();
        let dh11 = three * s2 - two * s;
        let deriv = dh00 * (y0 - y1) / h + dh10 * d0 + dh11 * d1;
        (value, deriv)
    }
}

/// Cell values of a density on a velocity grid. Radial grids store cell
/// centres as `(r, 0, ..., 0)` and shell volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    pub dim: usize,
    pub centers: Vec<T>,
    pub volumes: Vec<T>,
    pub values: Vec<T>,
    /// Histogram counts and sample size, when built from particles.
    pub counts: Option<(Vec<T>, usize)>,
}

impl<T: Real> DensityGrid<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center(&self, i: usize) -> &[T] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    /// Tensor grid on `[-radius, radius]^dim` with `per_axis` cells per axis.
    pub fn tensor<F: FnMut(&[T]) -> T>(dim: usize, radius: T, per_axis: usize, mut f: F) -> Result<Self, OrliczError> {
        if dim == 0 || per_axis == 0 || !(radius > T::zero()) {
            return Err(OrliczError::Invalid("tensor grid needs dim, cells and radius positive".into()));
        }
        let cells = per_axis.checked_pow(dim as u32).filter(|&c| c <= 1 << 26).ok_or_else(|| OrliczError::Invalid("tensor grid too large".into()))?;
        let h = T::c(2.0) * radius / T::from_usize_lossy(per_axis);
        let vol = h.powi(dim as i32);
        let mut centers = Vec::with_capacity(cells * dim);
        let mut values = Vec::with_capacity(cells);
        let mut point = vec![T::zero(); dim];
        for idx in 0..cells {
            let mut rem = idx;
            for p in point.iter_mut() {
                *p = -radius + h * (T::from_usize_lossy(rem % per_axis) + T::c(0.5));
                rem /= per_axis;
            }
            centers.extend_from_slice(&point);
            values.push(f(&point));
        }
        Ok(Self { dim, centers, volumes: vec![vol; cells], values, counts: None })
    }

    /// Radial shells of equal width on `[0, radius]` in dimension `dim`.
    pub fn radial<F: FnMut(T) -> T>(dim: usize, radius: T, shells: usize, mut f: F) -> Result<Self, OrliczError> {
        if dim == 0 || shells == 0 || !(radius > T::zero()) {
            return Err(OrliczError::Invalid("radial grid needs dim, shells and radius positive".into()));
        }
        let dr = radius / T::from_usize_lossy(shells);
        let area = sphere_area::<T>(dim);
        let nd = T::from_usize_lossy(dim);
        let mut centers = vec![T::zero(); shells * dim];
        let mut volumes = Vec::with_capacity(shells);
        let mut values = Vec::with_capacity(shells);
        for k in 0..shells {
            let (a, b) = (dr * T::from_usize_lossy(k), dr * T::from_usize_lossy(k + 1));
            let r = T::c(0.5) * (a + b);
            centers[k * dim] = r;
            volumes.push(area * (b.powi(dim as i32) - a.powi(dim as i32)) / nd);
            values.push(f(r));
        }
        Ok(Self { dim, centers, volumes, values, counts: None })
    }

    /// Histogram estimate of the velocity density: radial shells for
    /// `dim != 2`, a tensor grid for `dim == 2`, on a box of radius six
    /// thermal speeds. Particles outside the box are dropped and the result
    /// renormalized.
    pub fn from_ensemble(ens: &Ensemble<T>, resolution: usize) -> Result<Self, OrliczError> {
        if ens.is_empty() || resolution == 0 {
            return Err(OrliczError::Invalid("empty ensemble or zero resolution".into()));
        }
        let dim = ens.dim;
        let thermal = (ens.energy() / T::from_usize_lossy(dim)).sqrt();
        if !(thermal > T::zero()) {
            return Err(OrliczError::Invalid("ensemble at rest has no density".into()));
        }
        let radius = T::c(6.0) * thermal;
        let mut grid = if dim == 2 {
            Self::tensor(2, radius, resolution, |_| T::zero())?
        } else {
            Self::radial(dim, radius, resolution, |_| T::zero())?
        };
        let mut counts = vec![T::zero(); grid.len()];
        let res = T::from_usize_lossy(resolution);
        let mut inside = 0usize;
        for i in 0..ens.len() {
            let v = ens.row(i);
            let cell = if dim == 2 {
                let ix = ((v[0] + radius) / (T::c(2.0) * radius) * res).floor();
                let iy = ((v[1] + radius) / (T::c(2.0) * radius) * res).floor();
                if ix < T::zero() || iy < T::zero() || ix >= res || iy >= res {
                    continue;
                }
                ix.to_usize().unwrap_or(0) + resolution * iy.to_usize().unwrap_or(0)
            } else {
                let k = (norm(v) / radius * res).floor();
                if k >= res {
                    continue;
                }
                k.to_usize().unwrap_or(0)
            };
            counts[cell] += T::one();
            inside += 1;
        }
        if inside == 0 {
            return Err(OrliczError::Invalid("no particle inside the histogram box".into()));
        }
        let total = T::from_usize_lossy(inside);
        for ((v, &c), &vol) in grid.values.iter_mut().zip(&counts).zip(&grid.volumes) {
            *v = c / (total * vol);
        }
        grid.counts = Some((counts, inside));
        Ok(grid)
    }

    pub fn integral(&self) -> T {
        kahan_sum(self.values.iter().zip(&self.volumes).map(|(&f, &w)| f * w))
    }

    /// Rescales to unit integral.
    pub fn normalize(&mut self) -> Result<(), OrliczError> {
        let m = self.integral();
        if !(m > T::zero()) {
            return Err(OrliczError::Invalid("cannot normalize a density with zero mass".into()));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out.counts = None;
        out
    }

    /// `∫ |f| (1 + |v|) dv`.
    pub fn l1_1(&self) -> T {
        kahan_sum((0..self.len()).map(|i| self.values[i].abs() * (T::one() + norm(self.center(i))) * self.volumes[i]))
    }

    /// `∫ Λ(|f|/λ) dv`.
    pub fn modular(&self, young: &YoungFunction<T>, lambda: T) -> T {
        let terms: Vec<T> = self.values.iter().zip(&self.volumes).map(|(&f, &w)| young.value(f.abs() / lambda) * w).collect();
        // Compensated summation turns an overflowed term into NaN.
        if terms.iter().any(|t| t.is_infinite()) {
            return T::infinity();
        }
        kahan_sum(terms.into_iter())
    }

    fn same_cells(&self, other: &Self) -> bool {
        self.dim == other.dim && self.volumes == other.volumes && self.centers == other.centers
    }
}

/// Luxemburg norm with its certificate `∫Λ(|f|/‖f‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrliczNorm<T> {
    pub norm: T,
    pub certificate: T,
    pub iterations: usize,
}

/// `‖f‖_Λ = inf{λ > 0 : ∫Λ(|f|/λ) ≤ 1}` by bisection to `1e-10` absolute,
/// then Newton polishing on the modular equation.
pub fn orlicz_norm<T: Real>(f: &DensityGrid<T>, young: &YoungFunction<T>) -> Result<OrliczNorm<T>, OrliczError> {
    if f.values.iter().all(|&v| v == T::zero()) {
        return Ok(OrliczNorm { norm: T::zero(), certificate: T::zero(), iterations: 0 });
    }
    let phi = |lambda: T| f.modular(young, lambda);
    let mut lo = T::min_positive_value();
    let mut hi = phi(T::one()) + T::one();
    if !hi.is_finite() {
        hi = T::c(2.0);
    }
    let mut iterations = 0;
    while phi(hi) > T::one() {
        lo = hi;
        hi = hi * T::c(2.0);
        iterations += 1;
        if !hi.is_finite() || iterations > 2000 {
            return Err(OrliczError::Invalid("could not bracket the Orlicz norm".into()));
        }
    }
    let tol = T::c(1e-10);
    while hi - lo > tol && iterations < 10_000 {
        let mid = if hi > T::c(4.0) * lo { (lo * hi).sqrt() } else { T::c(0.5) * (lo + hi) };
        if phi(mid) > T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut lambda = T::c(0.5) * (lo + hi);
    // Newton on φ(λ) = 1 with φ'(λ) = -∫Λ'(|f|/λ)|f|/λ² dv.
    for _ in 0..8 {
        let val = phi(lambda) - T::one();
        let slope = -kahan_sum(
            f.values.iter().zip(&f.volumes).map(|(&v, &w)| young.derivative(v.abs() / lambda) * v.abs() * w),
        ) / (lambda * lambda);
        if !(slope < T::zero()) || !val.is_finite() {
            break;
        }
        let next = lambda - val / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        let done = (next - lambda).abs() <= T::epsilon() * lambda;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(OrliczNorm { norm: lambda, certificate: phi(lambda), iterations })
}

/// Standard error of a histogram-based Orlicz norm from multinomial cell
/// noise, propagated through the modular equation.
pub fn orlicz_norm_std_error<T: Real>(f: &DensityGrid<T>, young: &YoungFunction<T>, norm_value: T) -> Option<T> {
    let (counts, n) = f.counts.as_ref()?;
    if !(norm_value > T::zero()) {
        return Some(T::zero());
    }
    let lambda = norm_value;
    let denom = kahan_sum(f.values.iter().zip(&f.volumes).map(|(&v, &w)| young.derivative(v / lambda) * v * w));
    if !(denom > T::zero()) {
        return None;
    }
    let nn = T::from_usize_lossy(*n);
    let var = kahan_sum((0..f.len()).map(|i| {
        let grad = lambda * f.volumes[i] * young.derivative(f.values[i] / lambda) / denom;
        let var_f = counts[i] / (nn * nn * f.volumes[i] * f.volumes[i]);
        grad * grad * var_f
    }));
    Some(var.sqrt())
}

/// Relative change of the histogram norm when the resolution is halved.
pub fn resolution_sensitivity<T: Real>(ens: &Ensemble<T>, young: &YoungFunction<T>, resolution: usize) -> Result<T, OrliczError> {
    let fine = orlicz_norm(&DensityGrid::from_ensemble(ens, resolution)?, young)?.norm;
    let coarse = orlicz_norm(&DensityGrid::from_ensemble(ens, (resolution / 2).max(1))?, young)?.norm;
    Ok((fine - coarse).abs() / fine)
}

/// `N^{Λ*}(g) = sup{∫|fg| : ∫Λ(|f|) ≤ 1}`, evaluated at the maximizer
/// `|f| = (Λ')⁻¹(|g|/μ)` with `μ` fixed by `∫Λ(|f|) = 1`.
pub fn dual_norm<T: Real>(g: &DensityGrid<T>, young: &YoungFunction<T>) -> Result<T, OrliczError> {
    let gmax = g.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if gmax == T::zero() {
        return Ok(T::zero());
    }
    let maximizer = |mu: T| -> Result<Vec<T>, OrliczError> {
        g.values.iter().map(|&v| young.derivative_inverse(v.abs() / mu)).collect()
    };
    let excess = |log_mu: T| -> T {
        match maximizer(log_mu.exp()) {
            Ok(h) => {
                let s = kahan_sum(h.iter().zip(&g.volumes).map(|(&x, &w)| young.value(x) * w));
                if s.is_nan() { T::infinity() } else { s.ln() }
            }
            Err(_) => T::infinity(),
        }
    };
    // ln ∫Λ(h_μ) is decreasing in ln μ; bracket its zero.
    let mut lo = gmax.ln();
    let mut step = T::one();
    while excess(lo) <= T::zero() {
        lo = lo - step;
        step = step * T::c(2.0);
        if step > T::c(1e4) {
            return Err(OrliczError::Invalid("dual norm bracket failed below".into()));
        }
    }
    let mut hi = lo + T::one();
    step = T::one();
    while excess(hi) > T::zero() {
        hi = hi + step;
        step = step * T::c(2.0);
        if step > T::c(1e4) {
            return Err(OrliczError::Invalid("dual norm bracket failed above".into()));
        }
    }
    let log_mu = brent_root(
        |x| {
            let e = excess(x);
            if e.is_finite() { e } else { T::max_value() }
        },
        lo,
        hi,
        T::epsilon() * T::c(4.0) * (T::one() + hi.abs()),
        400,
    )?;
    let h = maximizer(log_mu.exp())?;
    Ok(kahan_sum(g.values.iter().zip(&h).zip(&g.volumes).map(|((&gv, &hv), &w)| gv.abs() * hv * w)))
}

/// `d/dt ‖f_t‖ = [N^{Λ*}(Λ'(|f|/‖f‖))]⁻¹ ∫ ∂_t f Λ'(|f|/‖f‖) dv`.
pub fn norm_derivative<T: Real>(f: &DensityGrid<T>, df_dt: &DensityGrid<T>, young: &YoungFunction<T>) -> Result<T, OrliczError> {
    if !f.same_cells(df_dt) {
        return Err(OrliczError::Invalid("f and its time derivative live on different grids".into()));
    }
    let lambda = orlicz_norm(f, young)?.norm;
    if lambda == T::zero() {
        return Err(OrliczError::Invalid("norm derivative needs f not identically zero".into()));
    }
    let mut g = f.clone();
    g.counts = None;
    for v in &mut g.values {
        *v = young.derivative(v.abs() / lambda);
    }
    let den = dual_norm(&g, young)?;
    if !(den > T::zero()) {
        return Err(OrliczError::VanishingDual);
    }
    let num = kahan_sum(df_dt.values.iter().zip(&g.values).zip(&f.volumes).map(|((&d, &gv), &w)| d * gv * w));
    Ok(num / den)
}

/// [`norm_derivative`] on a time family, with `∂_t f` from central
/// differences of step `h`.
pub fn norm_derivative_of_family<T: Real, F: FnMut(T) -> DensityGrid<T>>(
    mut family: F,
    young: &YoungFunction<T>,
    t: T,
    h: T,
) -> Result<T, OrliczError> {
    let f = family(t);
    let (plus, minus) = (family(t + h), family(t - h));
    if !f.same_cells(&plus) || !f.same_cells(&minus) {
        return Err(OrliczError::Invalid("family changes grid with time".into()));
    }
    let mut dfdt = f.clone();
    for ((d, &p), &m) in dfdt.values.iter_mut().zip(&plus.values).zip(&minus.values) {
        *d = (p - m) / (T::c(2.0) * h);
    }
    norm_derivative(&f, &dfdt, young)
}

/// Builds a tabulated Young function from the decreasing rearrangement of
/// `f`. `Λ'(t) = t` up to the level `t₁` carrying half of the mass; beyond,
/// `Λ'` grows by `t₁/k` across `[2^{k-1} t₁, 2^k t₁]`, past the largest value.
pub fn build_young_from_density<T: Real>(f: &DensityGrid<T>) -> Result<YoungFunction<T>, OrliczError> {
    let mut cells: Vec<(T, T)> = f.values.iter().zip(&f.volumes).filter(|(v, _)| **v > T::zero()).map(|(&v, &w)| (v, w)).collect();
    let fallback = || YoungFunction::power(T::c(2.0));
    if cells.is_empty() {
        return fallback();
    }
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let (fmax, fmin) = (cells[0].0, cells[cells.len() - 1].0);
    if fmax - fmin <= T::epsilon() * fmax {
        return fallback();
    }
    let total = kahan_sum(cells.iter().map(|&(v, w)| v * w));
    let mut acc = T::zero();
    let mut t1 = fmin;
    for &(v, w) in &cells {
        acc += v * w;
        if acc >= T::c(0.5) * total {
            t1 = v;
            break;
        }
    }
    let mut t = vec![T::zero(), t1];
    let mut value = vec![T::zero(), T::c(0.5) * t1 * t1];
    let mut slope = vec![T::zero(), t1];
    let mut k = 1usize;
    while *t.last().unwrap_or(&T::zero()) < T::c(2.0) * fmax || k < 3 {
        let a = *t.last().unwrap_or(&T::zero());
        let b = T::c(2.0) * a;
        let da = *slope.last().unwrap_or(&T::zero());
        let db = da + t1 / T::from_usize_lossy(k);
        let va = *value.last().unwrap_or(&T::zero());
        t.push(b);
        slope.push(db);
        value.push(va + T::c(0.5) * (da + db) * (b - a));
        k += 1;
        if k > 4096 {
            break;
        }
    }
    YoungFunction::tabulated(t, value, slope)
}

/// `C⁺(ε) = 2(1 + 2^N/ε) + (2 + 2^{N+2}) j`.
pub fn gain_constant<T: Real>(dim: usize, eps: T, j_eps: T) -> Result<T, OrliczError> {
    if !(eps > T::zero() && eps <= T::one()) || !(j_eps >= T::zero()) {
        return Err(OrliczError::Invalid(format!("gain constant needs eps in (0,1] and j >= 0, got {eps}, {j_eps}")));
    }
    let two_n = T::c(2.0).powi(dim as i32);
    Ok(T::c(2.0) * (T::one() + two_n / eps) + (T::c(2.0) + T::c(4.0) * two_n) * j_eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSelection<T> {
    pub eps: T,
    pub j: T,
    pub threshold: T,
    pub c_plus: T,
}

/// Largest `ε₀ ∈ (0, 1]` with `j_E(ε₀) ≤ (2 + 2^{N+2})⁻¹ ‖f‖_{L¹₁}⁻¹`, found
/// by bisection on the nondecreasing map `ε ↦ j_E(ε)`.
pub fn select_eps0<T: Real>(spec: &KernelSpec<T>, energy: T, l1_1: T, quad: &QuadratureConfig<T>) -> Result<EpsSelection<T>, OrliczError> {
    if !(l1_1 > T::zero()) {
        return Err(OrliczError::Invalid("L1_1 norm must be positive".into()));
    }
    let dim = spec.dim;
    let threshold = T::one() / ((T::c(2.0) + T::c(2.0).powi(dim as i32 + 2)) * l1_1);
    let j = |e: T| angular_spreading(spec, energy, e, quad);
    let finish = |eps: T, jv: T| Ok(EpsSelection { eps, j: jv, threshold, c_plus: gain_constant(dim, eps, jv)? });
    let j1 = j(T::one());
    if j1 <= threshold {
        return finish(T::one(), j1);
    }
    let mut lo = T::c(1e-12);
    let jlo = j(lo);
    if jlo > threshold {
        return Err(OrliczError::SelectorFailed { threshold: threshold.to_f64_lossy(), eps: lo.to_f64_lossy(), j: jlo.to_f64_lossy() });
    }
    let mut hi = T::one();
    for _ in 0..200 {
        if hi - lo <= T::c(1e-10) * hi {
            break;
        }
        let mid = if hi > T::c(4.0) * lo { (lo * hi).sqrt() } else { T::c(0.5) * (lo + hi) };
        if j(mid) <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(lo, j(lo))
}

/// `C_K = max_E α(E) C⁺_E(ε₀(E))` over the given energies.
pub fn assemble_c_k<T: Real>(spec: &KernelSpec<T>, energies: &[T], l1_1: T, quad: &QuadratureConfig<T>) -> Result<T, OrliczError> {
    let mut best = T::zero();
    for &e in energies {
        let sel = select_eps0(spec, e, l1_1, quad)?;
        best = best.max(spec.alpha(e) * sel.c_plus);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallSnapshot<T> {
    pub time: T,
    pub grid: DensityGrid<T>,
    /// `‖f‖_{L¹₁}`; computed from the grid when absent.
    pub l1_1: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport<T> {
    pub times: Vec<T>,
    pub measured: Vec<T>,
    pub std_errors: Vec<T>,
    pub envelope: Vec<T>,
    pub c_k: T,
    /// Snapshot indices where `measured - band·se` exceeds the envelope.
    pub crossings: Vec<usize>,
    /// Smallest `C` for which `‖f_t‖ ≤ ‖f_0‖ exp(C ∫‖f‖_{L¹₁})` holds exactly.
    pub minimal_c_k: T,
    /// Same, allowing the `band` standard-error tolerance.
    pub minimal_c_k_banded: T,
}

/// Measured `‖f_t‖_Λ` against `‖f_0‖_Λ exp(C_K ∫₀ᵗ ‖f_s‖_{L¹₁} ds)`.
pub fn gronwall_envelope<T: Real>(
    snapshots: &[GronwallSnapshot<T>],
    young: &YoungFunction<T>,
    c_k: T,
    band: T,
) -> Result<GronwallReport<T>, OrliczError> {
    if snapshots.is_empty() {
        return Err(OrliczError::Invalid("no snapshots".into()));
    }
    let first = &snapshots[0].grid;
    // Histograms follow the current thermal speed, so grids may differ
    // between snapshots; only the dimension has to agree.
    if snapshots.iter().any(|s| s.grid.dim != first.dim) {
        return Err(OrliczError::Invalid("snapshots must share one dimension".into()));
    }
    if snapshots.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(OrliczError::Invalid("snapshot times must increase".into()));
    }
    let mut measured = Vec::with_capacity(snapshots.len());
    let mut std_errors = Vec::with_capacity(snapshots.len());
    let mut l11 = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let n = orlicz_norm(&s.grid, young)?.norm;
        std_errors.push(orlicz_norm_std_error(&s.grid, young, n).unwrap_or(T::zero()));
        measured.push(n);
        l11.push(s.l1_1.unwrap_or_else(|| s.grid.l1_1()));
    }
    let mut integral = vec![T::zero(); snapshots.len()];
    for k in 1..snapshots.len() {
        let dt = snapshots[k].time - snapshots[k - 1].time;
        integral[k] = integral[k - 1] + T::c(0.5) * dt * (l11[k] + l11[k - 1]);
    }
    let n0 = measured[0];
    let envelope: Vec<T> = integral.iter().map(|&i| n0 * (c_k * i).exp()).collect();
    let crossings = (0..snapshots.len()).filter(|&k| measured[k] - band * std_errors[k] > envelope[k]).collect();
    let mut minimal = T::zero();
    let mut minimal_banded = T::zero();
    for k in 1..snapshots.len() {
        if integral[k] > T::zero() && n0 > T::zero() {
            minimal = minimal.max((measured[k] / n0).ln() / integral[k]);
            let lowered = (measured[k] - band * std_errors[k]).max(T::min_positive_value());
            minimal_banded = minimal_banded.max((lowered / n0).ln() / integral[k]);
        }
    }
    Ok(GronwallReport {
        times: snapshots.iter().map(|s| s.time).collect(),
        measured,
        std_errors,
        envelope,
        c_k,
        crossings,
        minimal_c_k: minimal,
        minimal_c_k_banded: minimal_banded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorationCheck<T> {
    /// `min_v (∫ f_* |v - v_*| dv_* - |v|)` over the sample points.
    pub min_margin: T,
    /// `|∫ f v dv|` after normalization; the bound is exact only when this
    /// vanishes.
    pub mean_offset: T,
    pub points: usize,
}

/// Loss-term minoration `∫ f_* |v - v_*| dv_* ≥ |v|` at the given points,
/// for `f` normalized to unit mass.
pub fn loss_minoration_check<T: Real>(f: &DensityGrid<T>, points: &[Vec<T>]) -> Result<MinorationCheck<T>, OrliczError> {
    let mass = f.integral();
    if !(mass > T::zero()) {
        return Err(OrliczError::Invalid("density has no mass".into()));
    }
    let dim = f.dim;
    let mut mean = vec![T::zero(); dim];
    for i in 0..f.len() {
        for (m, &c) in mean.iter_mut().zip(f.center(i)) {
            *m += f.values[i] * f.volumes[i] * c / mass;
        }
    }
    let mut min_margin = T::infinity();
    let mut diff = vec![T::zero(); dim];
    for v in points {
        if v.len() != dim {
            return Err(OrliczError::Invalid("sample point dimension mismatch".into()));
        }
        let conv = kahan_sum((0..f.len()).map(|i| {
            for ((d, &a), &b) in diff.iter_mut().zip(v).zip(f.center(i)) {
                *d = a - b;
            }
            f.values[i] * f.volumes[i] * norm(&diff)
        })) / mass;
        min_margin = min_margin.min(conv - norm(v));
    }
    Ok(MinorationCheck { min_margin, mean_offset: norm(&mean), points: points.len() })
}

/// Gaussian density `(2π s²)^{-N/2} exp(-|v|²/(2 s²))` at radius `r`.
pub fn gaussian_density<T: Real>(dim: usize, s: T, r: T) -> T {
    let two_pi_s2 = T::c(2.0) * T::PI() * s * s;
    two_pi_s2.powf(-T::from_usize_lossy(dim) / T::c(2.0)) * (-(r * r) / (T::c(2.0) * s * s)).exp()
}

/// Radial density `c exp(-r^η)` normalized to unit mass in dimension `N`.
pub fn stretched_radial_density<T: Real>(dim: usize, eta: T, r: T) -> T {
    let nd = T::from_usize_lossy(dim);
    let mass = sphere_area::<T>(dim) * gamma(nd / eta) / eta;
    (-r.powf(eta)).exp() / mass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> DensityGrid<f64> {
        DensityGrid::tensor(1, 0.5, 10, |_| 1.0).unwrap()
    }

    #[test]
    fn trivial_norms() {
        let sq = YoungFunction::monomial(2.0, 1.0).unwrap();
        let n = orlicz_norm(&unit_cube(), &sq).unwrap();
        assert!((n.norm - 1.0).abs() < 1e-12);
        let n2 = orlicz_norm(&unit_cube().scaled(2.0), &sq).unwrap();
        assert!((n2.norm - 2.0).abs() < 1e-12);
        let zero = unit_cube().scaled(0.0);
        assert_eq!(orlicz_norm(&zero, &sq).unwrap().norm, 0.0);
    }

    #[test]
    fn power_complement_closed_form() {
        let lam = YoungFunction::power(3.0).unwrap();
        let star = lam.complementary().unwrap();
        let q = 1.5;
        for y in [0.01, 0.3, 1.0, 7.0] {
            let expect = f64::powf(y, q) / q;
            assert!((star.value(y) - expect).abs() < 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn mixed_fails_superlinearity_only() {
        let h = YoungFunction::<f64>::mixed().hypotheses();
        assert!(h.vanishes_at_zero && h.convex_increasing && h.doubling);
        assert!(!h.superlinear);
        assert!(YoungFunction::<f64>::mixed().complementary().is_err());
        assert!(YoungFunction::<f64>::t_log_t().hypotheses().all());
    }

    #[test]
    fn tlogt_complement_is_not_doubling() {
        let star = YoungFunction::<f64>::t_log_t().complementary().unwrap();
        let h = star.hypotheses();
        assert!(h.vanishes_at_zero && h.convex_increasing);
        assert!(!h.doubling);
    }

    #[test]
    fn tabulated_round_trip() {
        let f = DensityGrid::radial(3, 4.0, 40, |r| gaussian_density(3, 1.0, r)).unwrap();
        let lam = build_young_from_density(&f).unwrap();
        assert!(lam.hypotheses().all(), "{:?}", lam.hypotheses());
        let back = YoungFunction::<f64>::from_csv(&lam.to_csv(lam.knots().unwrap())).unwrap();
        for t in [0.001, 0.02, 0.3, 5.0, 100.0] {
            assert!((back.value(t) - lam.value(t)).abs() <= 1e-14 * lam.value(t).max(1e-300));
        }
    }

    #[test]
    fn gain_constant_values() {
        assert_eq!(gain_constant(3, 0.5, 0.0).unwrap(), 34.0);
        assert!((gain_constant(3, 0.5f64, 0.1).unwrap() - 37.4).abs() < 1e-12);
        assert!(gain_constant(3, 0.0, 0.0).is_err());
    }

    #[test]
    fn dual_norm_quadratic() {
        let g = DensityGrid::tensor(1, 1.0, 50, |v| 1.0 + v[0] * v[0]).unwrap();
        let lam = YoungFunction::power(2.0).unwrap();
        let l2 = g.values.iter().zip(&g.volumes).map(|(&x, &w)| x * x * w).sum::<f64>();
        let n = dual_norm(&g, &lam).unwrap();
        assert!((n - (2.0 * l2).sqrt()).abs() < 1e-10 * n);
    }
}
