//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use parisi_core::quadrature::{legendre_nodes, log_cosh};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Composite Gauss–Legendre nodes for `E g(σZ)`, returned as offsets `σz`
/// with normal weights. Panels are at most one unit wide in `σz`.
pub fn oracle_rule(sigma: f64, tilt: f64) -> Vec<(f64, f64)> {
    let half = 10.0 + tilt * sigma;
    let panels = ((2.0 * half * sigma).ceil() as usize).max(8);
    let (x, w) = legendre_nodes(10);
    let width = 2.0 * half / panels as f64;
    let mut out = Vec::new();
    for p in 0..panels {
        let mid = -half + (p as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            let z = mid + 0.5 * width * xi;
            let weight = 0.5 * width * wi * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            if weight > 1e-40 {
                out.push((sigma * z, weight));
            }
        }
    }
    out
}

pub fn xi_prime(coeffs: &[(u32, f64)], x: f64) -> f64 {
    coeffs
        .iter()
        .map(|&(p, b)| p as f64 * b * b * x.powi(p as i32 - 1))
        .sum()
}

pub fn theta(coeffs: &[(u32, f64)], x: f64) -> f64 {
    coeffs
        .iter()
        .map(|&(p, b)| (p as f64 - 1.0) * b * b * x.powi(p as i32))
        .sum()
}

/// Nested quadrature of the recursion; the top layer uses
/// `E cosh(a + σZ) = cosh(a) e^{σ²/2}`.
pub fn tensor_oracle(coeffs: &[(u32, f64)], h: f64, q: &[f64], m: &[f64]) -> f64 {
    let k = q.len();
    let mut var = vec![xi_prime(coeffs, q[0])];
    for l in 1..k {
        var.push(xi_prime(coeffs, q[l]) - xi_prime(coeffs, q[l - 1]));
    }
    let top = 0.5 * (xi_prime(coeffs, 1.0) - xi_prime(coeffs, q[k - 1]));
    let rules: Vec<Vec<(f64, f64)>> = (0..k)
        .map(|l| {
            let mass = if l == 0 { 0.0 } else { m[l - 1] };
            if var[l] <= 0.0 {
                vec![(0.0, 1.0)]
            } else {
                oracle_rule(var[l].sqrt(), mass)
            }
        })
        .collect();

    // X_l(s), l = k-1 is the analytic top layer
    fn layer(l: usize, s: f64, k: usize, h: f64, top: f64, m: &[f64], rules: &[Vec<(f64, f64)>]) -> f64 {
        if l == k - 1 {
            return log_cosh(s + h) + top;
        }
        let mass = m[l];
        let next = &rules[l + 1];
        if mass <= 1e-10 {
            return next
                .iter()
                .map(|&(t, w)| w * layer(l + 1, s + t, k, h, top, m, rules))
                .sum();
        }
        let vals: Vec<f64> = next
            .iter()
            .map(|&(t, _)| layer(l + 1, s + t, k, h, top, m, rules))
            .collect();
        let peak = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = next
            .iter()
            .zip(&vals)
            .map(|(&(_, w), v)| w * (mass * (v - peak)).exp())
            .sum();
        peak + sum.ln() / mass
    }

    let e_x0: f64 = rules[0]
        .iter()
        .map(|&(t, w)| w * layer(0, t, k, h, top, m, &rules))
        .sum();
    let mut corr = 0.0;
    for l in 0..k {
        let next = if l + 1 < k { q[l + 1] } else { 1.0 };
        corr += m[l] * (theta(coeffs, next) - theta(coeffs, q[l]));
    }
    e_x0 - 0.5 * corr
}

pub type Case = (Vec<(u32, f64)>, f64, Vec<f64>, Vec<f64>);

/// Random model with orders {2, 4} or {1, 2, 3}, `ξ'(1) ≤ 4`, and a random
/// measure with `1..=k_max` atoms.
pub fn random_case(rng: &mut ChaCha8Rng, k_max: usize) -> Case {
    let orders: &[u32] = if rng.random_bool(0.5) { &[2, 4] } else { &[1, 2, 3] };
    let mut coeffs: Vec<(u32, f64)> = orders.iter().map(|&p| (p, rng.random_range(0.1..0.9))).collect();
    // keep ξ'(1) ≤ 4
    let xp1 = xi_prime(&coeffs, 1.0);
    if xp1 > 4.0 {
        let s = (4.0 / xp1).sqrt();
        coeffs.iter_mut().for_each(|c| c.1 *= s);
    }
    let h = rng.random_range(0.0..0.6);
    let k = rng.random_range(1..=k_max);
    let mut q: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut m: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    q.sort_by(f64::total_cmp);
    m.sort_by(f64::total_cmp);
    m[k - 1] = 1.0;
    (coeffs, h, q, m)
}
