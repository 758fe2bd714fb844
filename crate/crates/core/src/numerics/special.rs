use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 1/2).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::c(0.5);
    if x < half {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::c(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += T::c(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::c(LANCZOS_G) + half;
    T::c(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

pub fn gamma<T: Real>(x: T) -> T {
    ln_gamma(x).exp()
}

/// Generalised binomial coefficient `C(p, k)` for real `p` and integer `k`.
pub fn binomial<T: Real>(p: T, k: usize) -> T {
    let mut acc = T::one();
    for i in 0..k {
        let fi = T::from_usize_lossy(i);
        acc = acc * (p - fi) / (fi + T::one());
    }
    acc
}

/// Surface area of the unit sphere `S^{dim-1}` in `R^dim`.
pub fn sphere_area<T: Real>(dim: usize) -> T {
    let half_n = T::from_usize_lossy(dim) * T::c(0.5);
    T::c(2.0) * T::PI().powf(half_n) / gamma(half_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_factorials_and_half_integers() {
        assert!((gamma(5.0f64) - 24.0).abs() < 1e-11);
        assert!((gamma(0.5f64) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(2.5f64) - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((ln_gamma(100.0f64) - 359.134_205_369_575_4).abs() < 1e-9);
    }

    #[test]
    fn binomial_generalised() {
        assert_eq!(binomial(5.0f64, 2), 10.0);
        assert!((binomial(1.5f64, 1) - 1.5).abs() < 1e-15);
        assert!((binomial(2.5f64, 2) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-12);
        assert!((sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-12);
        assert!((sphere_area::<f64>(1) - 2.0).abs() < 1e-12);
    }
}
