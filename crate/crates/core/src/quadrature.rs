//! One-dimensional Gaussian quadrature rules.
//!
//! Gauss–Hermite nodes back the interpolating layer rule; composite
//! Gauss–Legendre on a truncated line backs the closed-form single-atom
//! functional and the fixed-point oracle, where the integrands have poles at
//! distance `π/2` from the real axis and plain Hermite rules converge slowly.

use std::f64::consts::PI;

/// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`.
#[derive(Clone, Debug)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    /// `n`-point Gauss–Hermite rule rescaled to the standard normal.
    pub fn hermite(n: usize) -> Self {
        let (x, w) = hermite_nodes(n);
        let scale = PI.sqrt();
        Self {
            nodes: x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
            weights: w.iter().map(|v| v / scale).collect(),
        }
    }

    /// Composite Gauss–Legendre on `[-half_width, half_width]` with `panels`
    /// equal panels of `order` points each, weighted by the normal density.
    pub fn composite_legendre(half_width: f64, panels: usize, order: usize) -> Self {
        let (x, w) = legendre_nodes(order);
        let width = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        let norm = 1.0 / (2.0 * PI).sqrt();
        for p in 0..panels {
            let mid = -half_width + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let z = mid + 0.5 * width * xi;
                nodes.push(z);
                weights.push(0.5 * width * wi * norm * (-0.5 * z * z).exp());
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(Z)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Gauss–Hermite nodes and weights for the weight `e^{-x²}` (ascending).
pub fn hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Hermite rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        // asymptotic initial guesses, largest root first
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[n - 1],
            3 => 1.91 * z - 0.91 * x[n - 2],
            _ => 2.0 * z - x[n + 1 - i],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, dp) = hermite_orthonormal(n, z, pim4);
            pp = dp;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = hermite_orthonormal(n, z, pim4);
        pp = if dp != 0.0 { dp } else { pp };
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // ascending order: the loop filled x[i] = -z with z decreasing in i
    (x, w)
}

/// Orthonormal Hermite polynomial value and derivative at `z`.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (ascending).
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let z1 = z;
            z = z1 - p / d;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p2) / (z * z - 1.0))
}

/// `log cosh x` without overflow.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn normal_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|v| v as f64).product()
        }
    }

    #[test]
    fn hermite_integrates_polynomials() {
        for n in [1usize, 2, 5, 20, 40, 100] {
            let rule = GaussianRule::hermite(n);
            assert_eq!(rule.len(), n);
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            for k in 0..(2 * n as u32).min(16) {
                let got = rule.expect(|z| z.powi(k as i32));
                let want = normal_moment(k);
                // odd moments cancel between terms of size E|Z|^k
                let scale = normal_moment(k + k % 2).max(1.0);
                assert!((got - want).abs() <= 1e-13 * scale, "n={n} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        for n in [1usize, 3, 8, 16] {
            let (x, w) = legendre_nodes(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for k in 0..(2 * n as i32) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert_abs_diff_eq!(got, want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn composite_legendre_gaussian_expectations() {
        let rule = GaussianRule::composite_legendre(12.0, 48, 8);
        assert_abs_diff_eq!(rule.expect(|_| 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.expect(|z| z * z), 1.0, epsilon = 1e-13);
        // E cosh(a + σZ) = cosh(a) e^{σ²/2}
        let got = rule.expect(|z| (0.3 + 1.7 * z).cosh());
        assert_abs_diff_eq!(got, 0.3f64.cosh() * (0.5 * 1.7 * 1.7f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn log_cosh_is_stable() {
        assert_eq!(log_cosh(0.0), 0.0);
        assert_abs_diff_eq!(log_cosh(0.3), 0.3f64.cosh().ln(), epsilon = 1e-16);
        assert_abs_diff_eq!(log_cosh(-800.0), 800.0 - std::f64::consts::LN_2, epsilon = 1e-12);
    }
}
