//! Evaluation of the Parisi functional `P(m, β)` for discrete measures.
//!
//! With atoms `q_1 ≤ … ≤ q_k`, cumulative masses `m_1 ≤ … ≤ m_k = 1` and
//! independent Gaussians `z_0, …, z_k` of variances `ξ'(q_1)`,
//! `ξ'(q_{l+1}) − ξ'(q_l)` and `ξ'(1) − ξ'(q_k)`, the functional is
//!
//! ```text
//! X_k     = log cosh(z_0 + … + z_k + h)
//! X_{l-1} = (1/m_l) log E_l exp(m_l X_l)        (integrating out z_l)
//! P(m, β) = E X_0 − ½ Σ_l m_l (θ(q_{l+1}) − θ(q_l)),   q_{k+1} = 1.
//! ```
//!
//! `X_l` depends on the Gaussians only through the partial sum
//! `s = z_0 + … + z_l`, so each layer is a function on a uniform grid in `s`.
//! The top layer has `m_k = 1` and is exact:
//! `X_{k-1}(s) = log cosh(s + h) + ½(ξ'(1) − ξ'(q_k))`.
//!
//! Layers store `D(s) = X(s) − log cosh(s + h)`. Every layer is 1-Lipschitz
//! with slopes tending to ±1, so `D` tends to constants and is extended
//! flat beyond the grid.
//!
//! Two per-layer integration rules are available. [`LayerRule::Aligned`]
//! (default) places trapezoid nodes on grid points, so no interpolation is
//! involved; the trapezoid rule converges geometrically for integrands
//! analytic in a strip, which `log cosh` is (poles at `±iπ/2`). Variances
//! too small for the grid use a seven-point moment-matched stencil
//! (heat-kernel expansion through `σ⁶`). [`LayerRule::Hermite`] uses
//! Gauss–Hermite nodes and interpolates `D` between grid points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{validate_sequences, DiscreteMeasure};
use crate::mixture::MixtureSpec;
use crate::quadrature::{log_cosh, GaussianRule};

/// Below this cumulative mass a layer is a plain expectation.
pub const MASS_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LayerRule {
    #[default]
    Aligned,
    Hermite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Gauss–Hermite nodes per layer (Hermite rule).
    pub hermite_nodes: usize,
    /// Points of the partial-sum grid; odd so that `s = 0` is a node.
    pub grid_points: usize,
    /// Grid half-width in units of `√ξ'(1)`.
    pub grid_halfwidth_sigmas: f64,
    /// 1 (linear) or 3 (cubic); Hermite rule only.
    pub interpolation_order: u8,
    pub rule: LayerRule,
    /// Largest trapezoid node spacing in `s` (aligned rule).
    pub node_spacing: f64,
    /// Truncation of each layer's Gaussian in standard deviations.
    pub tail_sigmas: f64,
    /// Fail with [`Error::Resolution`] when the refinement estimate exceeds
    /// this value.
    pub error_ceiling: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            hermite_nodes: 40,
            grid_points: 513,
            grid_halfwidth_sigmas: 8.0,
            interpolation_order: 3,
            rule: LayerRule::Aligned,
            node_spacing: 0.3,
            tail_sigmas: 9.0,
            error_ceiling: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.hermite_nodes < 8 {
            return bad("hermite_nodes must be at least 8");
        }
        if self.grid_points < 257 || self.grid_points.is_multiple_of(2) {
            return bad("grid_points must be odd and at least 257");
        }
        if !(self.grid_halfwidth_sigmas >= 6.0) || !self.grid_halfwidth_sigmas.is_finite() {
            return bad("grid_halfwidth_sigmas must be at least 6");
        }
        if !matches!(self.interpolation_order, 1 | 3) {
            return bad("interpolation_order must be 1 or 3");
        }
        if !(self.node_spacing > 0.0) || !(self.tail_sigmas >= 6.0) {
            return bad("node_spacing must be positive and tail_sigmas at least 6");
        }
        if matches!(self.error_ceiling, Some(c) if !(c > 0.0)) {
            return bad("error_ceiling must be positive");
        }
        Ok(())
    }

    /// Same rule with the grid spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            grid_points: 2 * self.grid_points - 1,
            ..self.clone()
        }
    }
}

/// `P(m, β)` with its two parts; `value = e_x0 − correction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub e_x0: f64,
    pub correction: f64,
    pub quad_error_estimate: f64,
}

impl FunctionalValue {
    /// Value including the `log 2` entropy term, comparable with the
    /// finite-N free energy.
    pub fn with_entropy(&self) -> f64 {
        self.value + std::f64::consts::LN_2
    }
}

/// Evaluates `P(m, β)` at the given resolution, with a refinement-based
/// error estimate.
pub fn evaluate(spec: &MixtureSpec, m: &DiscreteMeasure, quad: &QuadratureConfig) -> Result<FunctionalValue> {
    let coarse = Evaluator::new(spec, quad)?;
    let fine = Evaluator::with_halfwidth(spec, &quad.refined(), coarse.halfwidth())?;
    let (e_x0, correction) = coarse.parts(m.atoms(), m.cumulative());
    let (fine_e, fine_c) = fine.parts(m.atoms(), m.cumulative());
    let value = e_x0 - correction;
    let quad_error_estimate = (value - (fine_e - fine_c)).abs();
    if let Some(ceiling) = quad.error_ceiling {
        if quad_error_estimate > ceiling {
            return Err(Error::Resolution {
                estimate: quad_error_estimate,
                ceiling,
            });
        }
    }
    Ok(FunctionalValue {
        value,
        e_x0,
        correction,
        quad_error_estimate,
    })
}

/// Single-atom functional by direct one-dimensional quadrature:
/// `P(δ_q) = E log cosh(z√ξ'(q) + h) + ½(ξ'(1) − ξ'(q)) − ½(θ(1) − θ(q))`.
pub fn rs_closed_form(spec: &MixtureSpec, q: f64, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    let xp = spec.xi_prime(q)?;
    let sigma = xp.sqrt();
    let rule = dirac_rule(sigma, quad.tail_sigmas);
    let h = spec.h();
    let expectation = rule.expect(|z| log_cosh(sigma * z + h));
    Ok(expectation + 0.5 * (spec.xi_prime_at(1.0) - xp) - 0.5 * (spec.theta_at(1.0) - spec.theta_at(q)))
}

/// Composite Gauss–Legendre rule fine enough for `log cosh(σz + h)`:
/// panels no wider than 0.5 in the argument of `log cosh`.
pub(crate) fn dirac_rule(sigma: f64, tail_sigmas: f64) -> GaussianRule {
    let half = tail_sigmas + 3.0;
    let panels = ((2.0 * half * sigma / 0.5).ceil() as usize).max(24);
    GaussianRule::composite_legendre(half, panels, 8)
}

/// Result of [`decomposition_f`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `f(ξ'(q_1), …, ξ'(q_k)) = 2 E X_0 − ξ'(1)`.
    pub f_value: f64,
    /// Rearranged form `½ξ(1) + ½f + ½Σ(m_l − m_{l−1})θ(q_l)` minus the
    /// direct value.
    pub identity_residual: f64,
}

pub fn decomposition_f(spec: &MixtureSpec, m: &DiscreteMeasure, quad: &QuadratureConfig) -> Result<Decomposition> {
    let ev = Evaluator::new(spec, quad)?;
    let (e_x0, correction) = ev.parts(m.atoms(), m.cumulative());
    let direct = e_x0 - correction;
    let f_value = 2.0 * e_x0 - spec.xi_prime_at(1.0);
    let jump_sum: f64 = m.jumps().map(|(q, w)| w * spec.theta_at(q)).sum();
    let rearranged = 0.5 * spec.xi_at(1.0) + 0.5 * f_value + 0.5 * jump_sum;
    Ok(Decomposition {
        f_value,
        identity_residual: rearranged - direct,
    })
}

/// Finite-difference stencil actually used for a partial derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    Central,
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub value: f64,
    pub stencil: Stencil,
}

/// `∂P/∂q_l` (atom index `l` is zero-based).
pub fn partial_q(
    spec: &MixtureSpec,
    m: &DiscreteMeasure,
    l: usize,
    quad: &QuadratureConfig,
    step: f64,
) -> Result<Derivative> {
    Evaluator::new(spec, quad)?.partial(m.atoms(), m.cumulative(), Coordinate::Location(l), step)
}

/// `∂P/∂m_l` for a cumulative mass `m_l`, `l < k − 1` (zero-based; the last
/// mass is pinned to one).
pub fn partial_m(
    spec: &MixtureSpec,
    m: &DiscreteMeasure,
    l: usize,
    quad: &QuadratureConfig,
    step: f64,
) -> Result<Derivative> {
    Evaluator::new(spec, quad)?.partial(m.atoms(), m.cumulative(), Coordinate::Mass(l), step)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    Location(usize),
    Mass(usize),
}

/// Reusable evaluator for one spec and grid.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    spec: &'a MixtureSpec,
    quad: QuadratureConfig,
    step: f64,
    half: i64,
    hermite: Option<GaussianRule>,
}

enum Kernel {
    Identity,
    Stencil { var: f64 },
    Trapezoid { stride: i64, weights: Vec<f64> },
    Hermite { offsets: Vec<f64>, weights: Vec<f64> },
}

impl Kernel {
    fn reach(&self, step: f64) -> i64 {
        match self {
            Kernel::Identity => 0,
            Kernel::Stencil { .. } => 3,
            Kernel::Trapezoid { stride, weights } => stride * (weights.len() as i64 / 2),
            Kernel::Hermite { offsets, .. } => {
                let max = offsets.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
                (max / step).ceil() as i64 + 2
            }
        }
    }
}

/// Layer values `X(s_i)` for `|i| ≤ reach`.
struct Layer {
    reach: i64,
    vals: Vec<f64>,
}

impl Layer {
    #[inline]
    fn at(&self, i: i64) -> f64 {
        self.vals[(i + self.reach) as usize]
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a MixtureSpec, quad: &QuadratureConfig) -> Result<Self> {
        let width = (quad.grid_halfwidth_sigmas * spec.xi_prime_at(1.0).sqrt()).max(1.0);
        Self::with_halfwidth(spec, quad, width)
    }

    /// Evaluator on `[-halfwidth, halfwidth]`; used to keep one grid across
    /// finite-difference stencils in the model parameters.
    pub fn with_halfwidth(spec: &'a MixtureSpec, quad: &QuadratureConfig, halfwidth: f64) -> Result<Self> {
        quad.validate()?;
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid half-width {halfwidth} must be positive"
            )));
        }
        let half = ((quad.grid_points - 1) / 2) as i64;
        let hermite = (quad.rule == LayerRule::Hermite).then(|| GaussianRule::hermite(quad.hermite_nodes));
        Ok(Self {
            spec,
            quad: quad.clone(),
            step: halfwidth / half as f64,
            half,
            hermite,
        })
    }

    pub fn spec(&self) -> &MixtureSpec {
        self.spec
    }

    pub fn halfwidth(&self) -> f64 {
        self.step * self.half as f64
    }

    /// `P(m, β)` for raw nondecreasing sequences (not necessarily canonical).
    pub fn value(&self, qs: &[f64], ms: &[f64]) -> f64 {
        let (e, c) = self.parts(qs, ms);
        e - c
    }

    /// Checked variant of [`Evaluator::value`].
    pub fn try_value(&self, qs: &[f64], ms: &[f64]) -> Result<f64> {
        validate_sequences(qs, ms)?;
        Ok(self.value(qs, ms))
    }

    /// `(E X_0, ½ Σ m_l (θ(q_{l+1}) − θ(q_l)))`.
    pub fn parts(&self, qs: &[f64], ms: &[f64]) -> (f64, f64) {
        debug_assert!(!qs.is_empty() && qs.len() == ms.len());
        let spec = self.spec;
        let k = qs.len();
        let h = spec.h();

        let mut correction = 0.0;
        for l in 0..k {
            let next = if l + 1 < k { qs[l + 1] } else { 1.0 };
            correction += ms[l] * (spec.theta_at(next) - spec.theta_at(qs[l]));
        }
        correction *= 0.5;

        // variance of z_l for l = 0..=k; ξ'(q_0) is taken as 0 so that a
        // linear term acts as a Gaussian random field of variance β_1²
        let xp: Vec<f64> = qs.iter().map(|&q| spec.xi_prime_at(q)).collect();
        let mut var = Vec::with_capacity(k + 1);
        var.push(xp[0].max(0.0));
        for l in 1..k {
            var.push((xp[l] - xp[l - 1]).max(0.0));
        }
        var.push((spec.xi_prime_at(1.0) - xp[k - 1]).max(0.0));

        // kernels[l] integrates z_l, l = 0..k-1; z_k is handled in closed form
        let kernels: Vec<Kernel> = (0..k)
            .map(|l| {
                let mass = if l == 0 { 0.0 } else { ms[l - 1] };
                self.kernel(var[l], mass)
            })
            .collect();
        // reach[l]: indices on which X_l is needed
        let mut reach = Vec::with_capacity(k);
        let mut acc = 0;
        for kernel in &kernels {
            acc += kernel.reach(self.step);
            reach.push(acc);
        }

        let top_shift = 0.5 * var[k];
        let top_reach = reach[k - 1];
        let mut layer = Layer {
            reach: top_reach,
            vals: (-top_reach..=top_reach)
                .map(|i| log_cosh(i as f64 * self.step + h) + top_shift)
                .collect(),
        };
        for l in (1..k).rev() {
            // integrate z_l with mass m_l (zero-based ms[l - 1]) to get X_{l-1}
            layer = self.integrate_layer(&layer, &kernels[l], ms[l - 1], reach[l - 1]);
        }
        let e_x0 = self.apply(&layer, &kernels[0], 0.0, 0);
        (e_x0, correction)
    }

    fn kernel(&self, var: f64, mass: f64) -> Kernel {
        if var <= 0.0 {
            return Kernel::Identity;
        }
        let sigma = var.sqrt();
        let tilt = if mass > MASS_EPS { mass * sigma } else { 0.0 };
        let span = (self.quad.tail_sigmas + tilt) * sigma;
        match self.quad.rule {
            LayerRule::Aligned => {
                let spacing = self.quad.node_spacing.min(0.8 * sigma);
                if spacing < self.step {
                    return Kernel::Stencil { var };
                }
                let stride = (spacing / self.step).floor() as i64;
                let delta = stride as f64 * self.step;
                let half = (span / delta).ceil() as i64;
                let mut weights: Vec<f64> = (-half..=half)
                    .map(|j| {
                        let t = j as f64 * delta;
                        (-0.5 * t * t / var).exp()
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                Kernel::Trapezoid { stride, weights }
            }
            LayerRule::Hermite => {
                let rule = self.hermite.as_ref().expect("hermite rule prepared");
                Kernel::Hermite {
                    offsets: rule.nodes().iter().map(|z| z * sigma).collect(),
                    weights: rule.weights().to_vec(),
                }
            }
        }
    }

    /// `X_{l-1}` on `|i| ≤ out_reach` from `X_l`.
    fn integrate_layer(&self, input: &Layer, kernel: &Kernel, mass: f64, out_reach: i64) -> Layer {
        let inner = out_reach.min(self.half);
        let mut vals = vec![0.0; (2 * out_reach + 1) as usize];
        for i in -inner..=inner {
            vals[(i + out_reach) as usize] = self.apply(input, kernel, mass, i);
        }
        if out_reach > inner {
            // flat extension of D = X − log cosh(s + h) beyond the grid
            let h = self.spec.h();
            let lc = |i: i64| log_cosh(i as f64 * self.step + h);
            let d_hi = vals[(inner + out_reach) as usize] - lc(inner);
            let d_lo = vals[(out_reach - inner) as usize] - lc(-inner);
            for i in inner + 1..=out_reach {
                vals[(i + out_reach) as usize] = lc(i) + d_hi;
                vals[(out_reach - i) as usize] = lc(-i) + d_lo;
            }
        }
        Layer { reach: out_reach, vals }
    }

    /// `(1/m) log E exp(m X(s_i + Z))`, or `E X(s_i + Z)` for `m ≤ MASS_EPS`.
    #[inline]
    fn apply(&self, x: &Layer, kernel: &Kernel, mass: f64, i: i64) -> f64 {
        let base = x.at(i);
        let tilted = mass > MASS_EPS;
        match kernel {
            Kernel::Identity => base,
            Kernel::Trapezoid { stride, weights } => {
                let half = weights.len() as i64 / 2;
                let mut acc = 0.0;
                if tilted {
                    for (j, w) in (-half..=half).zip(weights) {
                        acc += w * (mass * (x.at(i + j * stride) - base)).exp_m1();
                    }
                    base + acc.ln_1p() / mass
                } else {
                    for (j, w) in (-half..=half).zip(weights) {
                        acc += w * (x.at(i + j * stride) - base);
                    }
                    base + acc
                }
            }
            Kernel::Stencil { var } => {
                let g = |j: i64| {
                    let d = x.at(i + j) - base;
                    if tilted {
                        (mass * d).exp_m1()
                    } else {
                        d
                    }
                };
                let (g1, g2, g3) = (g(1) + g(-1), g(2) + g(-2), g(3) + g(-3));
                let s2 = self.step * self.step;
                // central differences; g(0) = 0
                let d2 = (1.5 * g1 - 0.15 * g2 + g3 / 90.0) / s2;
                let d4 = (-6.5 * g1 + 2.0 * g2 - g3 / 6.0) / (s2 * s2);
                let d6 = (15.0 * g1 - 6.0 * g2 + g3) / (s2 * s2 * s2);
                let v = *var;
                let series = 0.5 * v * d2 + v * v / 8.0 * d4 + v * v * v / 48.0 * d6;
                if tilted {
                    base + series.ln_1p() / mass
                } else {
                    base + series
                }
            }
            Kernel::Hermite { offsets, weights } => {
                let mut acc = 0.0;
                for (t, w) in offsets.iter().zip(weights) {
                    let d = self.interpolate(x, i, *t) - base;
                    acc += w * if tilted { (mass * d).exp_m1() } else { d };
                }
                if tilted {
                    base + acc.ln_1p() / mass
                } else {
                    base + acc
                }
            }
        }
    }

    /// `X(s_i + t)` by interpolating `D = X − log cosh(s + h)`.
    fn interpolate(&self, x: &Layer, i: i64, t: f64) -> f64 {
        let h = self.spec.h();
        let s = i as f64 * self.step + t;
        let d = |j: i64| {
            let j = j.clamp(-x.reach, x.reach);
            x.at(j) - log_cosh(j as f64 * self.step + h)
        };
        let pos = s / self.step;
        let j0 = pos.floor() as i64;
        let u = pos - j0 as f64;
        let d_val = if self.quad.interpolation_order == 1 {
            (1.0 - u) * d(j0) + u * d(j0 + 1)
        } else {
            let (a, b, c, e) = (d(j0 - 1), d(j0), d(j0 + 1), d(j0 + 2));
            -u * (u - 1.0) * (u - 2.0) / 6.0 * a + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * b
                - (u + 1.0) * u * (u - 2.0) / 2.0 * c
                + (u + 1.0) * u * (u - 1.0) / 6.0 * e
        };
        log_cosh(s + h) + d_val
    }

    /// Richardson-refined finite difference in one coordinate of a raw
    /// measure; falls back to a one-sided stencil next to a constraint.
    pub fn partial(&self, qs: &[f64], ms: &[f64], coord: Coordinate, step: f64) -> Result<Derivative> {
        validate_sequences(qs, ms)?;
        if !(step > 0.0) {
            return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
        }
        let k = qs.len();
        let (seq, l, lo, hi) = match coord {
            Coordinate::Location(l) if l < k => {
                let lo = if l == 0 { 0.0 } else { qs[l - 1] };
                let hi = if l + 1 < k { qs[l + 1] } else { 1.0 };
                (qs, l, lo, hi)
            }
            Coordinate::Mass(l) if l + 1 < k => {
                let lo = if l == 0 { 0.0 } else { ms[l - 1] };
                (ms, l, lo, ms[l + 1])
            }
            Coordinate::Mass(l) if l + 1 == k => {
                return Err(Error::Admissibility("the last cumulative mass is fixed at one".into()))
            }
            _ => return Err(Error::Admissibility(format!("{coord:?} out of range for {k} atoms"))),
        };
        let x0 = seq[l];
        let up = x0 + step <= hi;
        let down = x0 - step >= lo;
        let f = |x: f64| {
            let mut v = seq.to_vec();
            v[l] = x;
            match coord {
                Coordinate::Location(_) => self.value(&v, ms),
                Coordinate::Mass(_) => self.value(qs, &v),
            }
        };
        let (value, stencil) = match (up, down) {
            (true, true) => {
                let c = |h: f64| (f(x0 + h) - f(x0 - h)) / (2.0 * h);
                ((4.0 * c(0.5 * step) - c(step)) / 3.0, Stencil::Central)
            }
            (true, false) => {
                let f0 = f(x0);
                let fw = |h: f64| (f(x0 + h) - f0) / h;
                (2.0 * fw(0.5 * step) - fw(step), Stencil::Forward)
            }
            (false, true) => {
                let f0 = f(x0);
                let bw = |h: f64| (f0 - f(x0 - h)) / h;
                (2.0 * bw(0.5 * step) - bw(step), Stencil::Backward)
            }
            (false, false) => {
                return Err(Error::Admissibility(format!(
                    "{coord:?}: step {step} leaves [{lo}, {hi}] in both directions"
                )))
            }
        };
        Ok(Derivative { value, stencil })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn dirac_at_zero_closed_form() {
        let spec = MixtureSpec::pure(2, 0.5, 0.0).unwrap();
        let v = evaluate(&spec, &DiscreteMeasure::dirac(0.0).unwrap(), &quad()).unwrap();
        assert_abs_diff_eq!(v.value, 0.125, epsilon = 1e-13);
        assert_eq!(v.value, v.e_x0 - v.correction);
        assert_abs_diff_eq!(rs_closed_form(&spec, 0.0, &quad()).unwrap(), 0.125, epsilon = 1e-14);
        let field = MixtureSpec::pure(2, 0.5, 0.3).unwrap();
        let want = 0.3f64.cosh().ln() + 0.125;
        assert_abs_diff_eq!(rs_closed_form(&field, 0.0, &quad()).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(want, 0.169340, epsilon = 1e-6);
    }

    #[test]
    fn decoupled_model_is_log_cosh_h() {
        let spec = MixtureSpec::new_degenerate([(2, 0.0)], 0.3).unwrap();
        for m in [
            DiscreteMeasure::dirac(0.0).unwrap(),
            DiscreteMeasure::new(&[0.2, 0.7], &[0.4, 1.0]).unwrap(),
        ] {
            let v = evaluate(&spec, &m, &quad()).unwrap();
            assert_abs_diff_eq!(v.value, 0.3f64.cosh().ln(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(0.3f64.cosh().ln(), 0.044340, epsilon = 1e-6);
    }

    #[test]
    fn dirac_at_one_is_well_defined() {
        let spec = MixtureSpec::new([(2, 1.0), (4, 0.3)], 0.2).unwrap();
        let v = evaluate(&spec, &DiscreteMeasure::dirac(1.0).unwrap(), &quad()).unwrap();
        let oracle = rs_closed_form(&spec, 1.0, &quad()).unwrap();
        assert_abs_diff_eq!(v.value, oracle, epsilon = 1e-10);
    }

    #[test]
    fn zero_mass_atom_and_split_leave_value_unchanged() {
        let spec = MixtureSpec::new([(2, 1.1), (4, 0.4)], 0.25).unwrap();
        let ev = Evaluator::new(&spec, &quad()).unwrap();
        let base = ev.value(&[0.3, 0.7], &[0.4, 1.0]);
        let zero_mass = ev.value(&[0.3, 0.5, 0.7], &[0.4, 0.4, 1.0]);
        let split = ev.value(&[0.3, 0.3, 0.7], &[0.2, 0.4, 1.0]);
        assert_abs_diff_eq!(base, zero_mass, epsilon = 1e-10);
        assert_abs_diff_eq!(base, split, epsilon = 1e-10);
    }

    #[test]
    fn rules_agree() {
        let spec = MixtureSpec::new([(2, 0.8), (4, 0.5)], 0.3).unwrap();
        let (q, m) = ([0.15, 0.4, 0.8], [0.3, 0.6, 1.0]);
        let aligned = Evaluator::new(&spec, &quad()).unwrap().value(&q, &m);
        let hermite_cfg = QuadratureConfig {
            rule: LayerRule::Hermite,
            hermite_nodes: 80,
            grid_points: 4097,
            ..quad()
        };
        let hermite = Evaluator::new(&spec, &hermite_cfg).unwrap().value(&q, &m);
        assert_abs_diff_eq!(aligned, hermite, epsilon = 1e-7);
    }

    #[test]
    fn config_validation() {
        let bad = [
            QuadratureConfig {
                grid_points: 512,
                ..quad()
            },
            QuadratureConfig {
                grid_points: 101,
                ..quad()
            },
            QuadratureConfig {
                hermite_nodes: 4,
                ..quad()
            },
            QuadratureConfig {
                interpolation_order: 2,
                ..quad()
            },
            QuadratureConfig {
                grid_halfwidth_sigmas: 2.0,
                ..quad()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(quad().validate().is_ok());
    }

    #[test]
    fn error_ceiling_is_enforced() {
        let spec = MixtureSpec::new([(2, 1.2)], 0.0).unwrap();
        let m = DiscreteMeasure::new(&[0.2, 0.6], &[0.5, 1.0]).unwrap();
        let tight = QuadratureConfig {
            error_ceiling: Some(1e-30),
            ..quad()
        };
        match evaluate(&spec, &m, &tight) {
            Err(Error::Resolution { .. }) => {}
            Ok(v) => assert_eq!(v.quad_error_estimate, 0.0),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn partial_derivative_stencils() {
        let spec = MixtureSpec::pure(2, 0.4, 0.0).unwrap();
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        let dq = partial_q(&spec, &d0, 0, &quad(), 1e-4).unwrap();
        assert_eq!(dq.stencil, Stencil::Forward);
        assert!(dq.value.abs() < 1e-8, "{}", dq.value);
        assert!(matches!(
            partial_m(&spec, &d0, 0, &quad(), 1e-4),
            Err(Error::Admissibility(_))
        ));
        let one = DiscreteMeasure::dirac(1.0).unwrap();
        assert_eq!(
            partial_q(&spec, &one, 0, &quad(), 1e-4).unwrap().stencil,
            Stencil::Backward
        );
    }

    #[test]
    fn single_atom_derivative_matches_fixed_point_form() {
        // d/dq P(δ_q) = ½ ξ''(q) (q − E tanh²(z√ξ'(q) + h))
        let spec = MixtureSpec::pure(2, 0.9, 0.2).unwrap();
        let q = 0.35;
        let d = partial_q(&spec, &DiscreteMeasure::dirac(q).unwrap(), 0, &quad(), 1e-4).unwrap();
        let sigma = spec.xi_prime_at(q).sqrt();
        let rule = dirac_rule(sigma, 9.0);
        let t2 = rule.expect(|z| (sigma * z + 0.2).tanh().powi(2));
        let want = 0.5 * spec.xi_second_at(q) * (q - t2);
        assert_abs_diff_eq!(d.value, want, epsilon = 1e-8);
    }
}
