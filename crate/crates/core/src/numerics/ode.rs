use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_negative: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h}); stats {stats:?}")]
    StepTooSmall { t: f64, h: f64, stats: OdeStats },
    #[error("step budget of {max_steps} exhausted at t = {t}; stats {stats:?}")]
    MaxSteps { max_steps: usize, t: f64, stats: OdeStats },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; `None` picks a fraction of the first output interval.
    pub h0: Option<T>,
    pub h_min: T,
    pub max_steps: usize,
    /// Reject (and shrink) steps that drive any component below zero.
    pub nonnegative: bool,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::c(1e-10),
            atol: T::c(1e-12),
            h0: None,
            h_min: T::c(1e-14),
            max_steps: 1_000_000,
            nonnegative: true,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = rhs(t, y)` from `t0` and report the state at each of the
/// (increasing) `output_times`. Steps are clipped to land on output times.
pub fn integrate_adaptive<T, F>(
    mut rhs: F,
    t0: T,
    y0: &[T],
    output_times: &[T],
    opts: &OdeOptions<T>,
) -> Result<(Vec<Vec<T>>, OdeStats), OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(output_times.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![T::zero(); dim]; 7];
    let mut stage = vec![T::zero(); dim];
    let mut y5 = vec![T::zero(); dim];
    let mut h = match (opts.h0, output_times.first()) {
        (Some(h), _) => h,
        (None, Some(&t1)) if t1 > t0 => (t1 - t0) * T::c(1e-3),
        _ => T::c(1e-3),
    };
    rhs(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut steps = 0usize;

    for &target in output_times {
        while t < target {
            if steps >= opts.max_steps {
                return Err(OdeError::MaxSteps { max_steps: opts.max_steps, t: t.to_f64_lossy(), stats });
            }
            steps += 1;
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += hs * T::c(a) * kj[i];
                        }
                    }
                    stage[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                rhs(t + T::c(C[s]) * hs, &stage, &mut tail[0]);
                stats.evaluations += 1;
            }
            // Stage 7 evaluates at the 5th-order solution (FSAL), so `stage` holds it.
            y5.copy_from_slice(&stage);

            let mut err = T::zero();
            for i in 0..dim {
                let mut diff = T::zero();
                for s in 0..7 {
                    diff += T::c(B5[s] - B4[s]) * k[s][i];
                }
                let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                let r = hs * diff / scale;
                err = err.max(r.abs());
            }
            if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                if hs <= opts.h_min {
                    return Err(OdeError::NonFinite { t: t.to_f64_lossy() });
                }
                stats.rejected_error += 1;
                h = hs * T::c(0.25);
                continue;
            }
            let negative = opts.nonnegative && y5.iter().any(|&v| v < T::zero());
            if err <= T::one() && !negative {
                stats.accepted += 1;
                t = if last { target } else { t + hs };
                y.copy_from_slice(&y5);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let factor = if err == T::zero() {
                    T::c(5.0)
                } else {
                    (T::c(0.9) * err.powf(T::c(-0.2))).clamp_to(T::c(0.2), T::c(5.0))
                };
                h = if last { h.max(hs) } else { hs * factor };
            } else {
                if negative {
                    stats.rejected_negative += 1;
                    h = hs * T::c(0.5);
                } else {
                    stats.rejected_error += 1;
                    h = hs * (T::c(0.9) * err.powf(T::c(-0.25))).clamp_to(T::c(0.1), T::one());
                }
                if h < opts.h_min {
                    return Err(OdeError::StepTooSmall { t: t.to_f64_lossy(), h: h.to_f64_lossy(), stats });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
