use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations, bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error("function returned a non-finite value at {at}")]
    NonFinite { at: f64 },
}

/// Brent's method on a sign-changing bracket `[lo, hi]`.
///
/// Converges when the bracket width falls below `tol` (absolute, plus a few
/// ulps relative) or an exact zero is hit.
pub fn brent_root<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    tol: T,
    max_iter: usize,
) -> Result<T, RootError> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { at: a.to_f64_lossy() });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { at: b.to_f64_lossy() });
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(RootError::NotBracketed {
            lo: a.to_f64_lossy(),
            hi: b.to_f64_lossy(),
            f_lo: fa.to_f64_lossy(),
            f_hi: fb.to_f64_lossy(),
        });
    }
    let two = T::c(2.0);
    let half = T::c(0.5);
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * tol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::c(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { at: b.to_f64_lossy() });
        }
    }
    Err(RootError::NoConvergence {
        iterations: max_iter,
        lo: b.min(c).to_f64_lossy(),
        hi: b.max(c).to_f64_lossy(),
    })
}

/// Grow `hi` geometrically until `f(hi)` has the opposite sign of `f(lo)`.
pub fn expand_bracket_up<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    mut hi: T,
    max_doublings: usize,
) -> Result<T, RootError> {
    let f_lo = f(lo);
    let mut f_hi = f(hi);
    for _ in 0..max_doublings {
        if (f_lo > T::zero()) != (f_hi > T::zero()) || f_hi == T::zero() {
            return Ok(hi);
        }
        hi = hi * T::c(2.0) + T::one();
        f_hi = f(hi);
        if !f_hi.is_finite() {
            return Err(RootError::NonFinite { at: hi.to_f64_lossy() });
        }
    }
    Err(RootError::NotBracketed {
        lo: lo.to_f64_lossy(),
        hi: hi.to_f64_lossy(),
        f_lo: f_lo.to_f64_lossy(),
        f_hi: f_hi.to_f64_lossy(),
    })
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> (T, T) {
    let inv_phi = T::c(0.618_033_988_749_894_8);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let fa = f(lo);
    let fb = f(hi);
    let (mut best, mut fbest) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fa < fbest {
        best = lo;
        fbest = fa;
    }
    if fb < fbest {
        best = hi;
        fbest = fb;
    }
    (best, fbest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = brent_root(|x: f64| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_bracket() {
        let err = brent_root(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 50).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn reports_iteration_exhaustion_with_bracket() {
        let err = brent_root(|x: f64| x.exp() - 2.0, 0.0, 3.0, 0.0, 1).unwrap_err();
        match err {
            RootError::NoConvergence { lo, hi, .. } => assert!(lo <= hi),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expands_until_sign_change() {
        let hi = expand_bracket_up(|x: f64| x - 100.0, 0.0, 1.0, 20).unwrap();
        assert!(hi >= 100.0);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(|x: f64| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-14);
    }
}
