use crate::scalar::Real;

/// Fixed-order Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

/// A quadrature value together with an a posteriori error estimate obtained
/// by comparing against the rule of half the order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate<T> {
    pub value: T,
    pub residual: T,
}

impl<T: Real> GaussLegendre<T> {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, refined in f64 then once more in T.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_f64(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_f64(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::c(-x);
            nodes[n - 1 - i] = T::c(x);
            weights[i] = T::c(w);
            weights[n - 1 - i] = T::c(w);
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::c(0.5);
        let mid = (a + b) * T::c(0.5);
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrate over `[a, b]` split into `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(T) -> T>(&self, a: T, b: T, panels: usize, mut f: F) -> T {
        let panels = panels.max(1);
        let h = (b - a) / T::from_usize_lossy(panels);
        let mut acc = T::zero();
        for k in 0..panels {
            let lo = a + h * T::from_usize_lossy(k);
            acc += self.integrate(lo, lo + h, &mut f);
        }
        acc
    }
}

/// Integrate with the given order and report the discrepancy against the
/// half-order rule as the residual estimate.
pub fn integrate_with_residual<T: Real, F: FnMut(T) -> T>(
    order: usize,
    a: T,
    b: T,
    mut f: F,
) -> QuadratureEstimate<T> {
    let fine = GaussLegendre::<T>::new(order);
    let coarse = GaussLegendre::<T>::new((order / 2).max(1));
    let value = fine.integrate(a, b, &mut f);
    let rough = coarse.integrate(a, b, &mut f);
    QuadratureEstimate {
        value,
        residual: (value - rough).abs(),
    }
}

fn legendre_f64(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let gl = GaussLegendre::<f64>::new(8);
        // degree 15 is exact for an 8-point rule
        let v = gl.integrate(-1.0, 1.0, |x| x.powi(14));
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn residual_small_for_smooth_integrand() {
        let est = integrate_with_residual::<f64, _>(64, 0.0, 1.0, |x| x.exp());
        assert!((est.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn odd_order_has_center_node() {
        let gl = GaussLegendre::<f32>::new(5);
        assert_eq!(gl.nodes()[2], 0.0);
        let v = gl.integrate(0.0, 2.0, |x| x * x);
        assert!((v - 8.0 / 3.0).abs() < 1e-5);
    }
}
