//! Derivatives of `P` in the mixture coefficients, the difference-quotient
//! sandwich for the minimized functional, and predicted overlap moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Evaluator, QuadratureConfig};
use crate::measure::DiscreteMeasure;
use crate::mixture::MixtureSpec;
use crate::optimizer::{minimize_k_from, LadderReport, OptimizerOptions};

/// Floor on the sandwich step when the ladder gap is (near) zero.
pub const Y_MIN: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaDerivative {
    pub value: f64,
    /// False when `p` is not a term of the model (then `β_p = 0`).
    pub term_present: bool,
}

/// `β_p (1 − ∫q^p dm)`: the derivative of `P(m, β)` in `β_p` when `m`
/// minimizes over its atom count.
pub fn dp_dbeta_analytic(spec: &MixtureSpec, m: &DiscreteMeasure, p: u32) -> BetaDerivative {
    let beta = spec.beta(p);
    BetaDerivative {
        value: beta * (1.0 - m.moment(p)),
        term_present: spec.contains(p),
    }
}

/// Richardson-refined central difference of `P(m, ·)` in `β_p` at fixed
/// `m`. The grid of the unperturbed model is reused at every stencil point.
pub fn dp_dbeta_fd(spec: &MixtureSpec, m: &DiscreteMeasure, p: u32, step: f64, quad: &QuadratureConfig) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let width = Evaluator::new(spec, quad)?.halfwidth();
    let beta = spec.beta(p);
    let at = |b: f64| -> Result<f64> {
        let s = spec.with_beta(p, b)?;
        Ok(Evaluator::with_halfwidth(&s, quad, width)?.value(m.atoms(), m.cumulative()))
    };
    let central = |h: f64| -> Result<f64> { Ok((at(beta + h)? - at(beta - h)?) / (2.0 * h)) };
    Ok((4.0 * central(0.5 * step)? - central(step)?) / 3.0)
}

/// `|∂²P(m, ·)/∂β_p²|` from a five-point stencil.
pub fn curvature_estimate(
    spec: &MixtureSpec,
    m: &DiscreteMeasure,
    p: u32,
    step: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let width = Evaluator::new(spec, quad)?.halfwidth();
    let beta = spec.beta(p);
    let at = |b: f64| -> Result<f64> {
        let s = spec.with_beta(p, b)?;
        Ok(Evaluator::with_halfwidth(&s, quad, width)?.value(m.atoms(), m.cumulative()))
    };
    let f: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|j| at(beta + j * step))
        .collect::<Result<_>>()?;
    Ok(((-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * step * step)).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    pub measure: DiscreteMeasure,
    pub analytic: f64,
    pub contained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdifferentialProbe {
    pub p: u32,
    pub beta_value: f64,
    pub k: usize,
    /// `β_p (1 − ∫q^p dm^k)` at the top ladder measure.
    pub analytic: f64,
    /// `(E(β) − E(β − y)) / y` for the `k`-atom envelope `E`.
    pub lower: f64,
    /// `(E(β + y) − E(β)) / y`.
    pub upper: f64,
    /// Gap used for the step: the last ladder decrement.
    pub eps_k: f64,
    pub y: f64,
    pub c_estimate: f64,
    /// `C·y + ε_k / y`.
    pub slack: f64,
    pub contained: bool,
    /// Every distinct near-minimizer at the top level, checked separately.
    pub candidates: Vec<CandidateCheck>,
}

/// Step for the curvature stencil.
const CURVATURE_STEP: f64 = 1e-2;

/// Checks `lower − C·y − ε/y ≤ β_p(1 − ∫q^p dm^k) ≤ upper + C·y + ε/y` at
/// the top level of `ladder`, re-minimizing at `β_p ± y`.
pub fn subdifferential_probe(
    spec: &MixtureSpec,
    p: u32,
    ladder: &LadderReport,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
) -> Result<SubdifferentialProbe> {
    let top = ladder.top();
    let k = top.k;
    let beta = spec.beta(p);
    let eps_k = ladder.top_gap();
    let y = eps_k.sqrt().max(Y_MIN);
    let starts: Vec<DiscreteMeasure> = top.candidates.iter().map(|c| c.measure.clone()).collect();
    let env = |b: f64| -> Result<f64> {
        let s = spec.with_beta(p, b)?;
        Ok(minimize_k_from(&s, k, opts, quad, &starts)?.value.value)
    };
    let center = top.value;
    let upper = (env(beta + y)? - center) / y;
    let lower = (center - env(beta - y)?) / y;
    let c_estimate = curvature_estimate(spec, &top.measure, p, CURVATURE_STEP, quad)?;
    let slack = c_estimate * y + eps_k / y;
    let inside = |a: f64| lower - slack <= a && a <= upper + slack;
    let analytic = dp_dbeta_analytic(spec, &top.measure, p).value;
    let candidates = top
        .candidates
        .iter()
        .map(|c| {
            let a = dp_dbeta_analytic(spec, &c.measure, p).value;
            CandidateCheck {
                measure: c.measure.clone(),
                analytic: a,
                contained: inside(a),
            }
        })
        .collect();
    Ok(SubdifferentialProbe {
        p,
        beta_value: beta,
        k,
        analytic,
        lower,
        upper,
        eps_k,
        y,
        c_estimate,
        slack,
        contained: inside(analytic),
        candidates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPrediction {
    pub p: u32,
    /// `∫q^p dm` for the top ladder measure.
    pub value: f64,
    /// False when `β_p = 0`: the minimized functional then carries no
    /// information about this moment.
    pub within_guarantee: bool,
}

pub fn overlap_moment_limit(spec: &MixtureSpec, ladder: &LadderReport, p: u32) -> MomentPrediction {
    MomentPrediction {
        p,
        value: ladder.top().measure.moment(p),
        within_guarantee: spec.beta(p) != 0.0,
    }
}

/// `k`-atom minimum along a `β_p` grid, each point warm-started from the
/// previous minimizer (and from `seed_measure` when given).
pub fn envelope(
    spec: &MixtureSpec,
    p: u32,
    betas: &[f64],
    k: usize,
    opts: &OptimizerOptions,
    quad: &QuadratureConfig,
    seed_measure: Option<&DiscreteMeasure>,
) -> Result<Vec<(f64, f64, DiscreteMeasure)>> {
    let mut out: Vec<(f64, f64, DiscreteMeasure)> = Vec::with_capacity(betas.len());
    for &b in betas {
        let s = spec.with_beta(p, b)?;
        let mut starts: Vec<DiscreteMeasure> = seed_measure.into_iter().cloned().collect();
        if let Some(prev) = out.last() {
            starts.push(prev.2.clone());
        }
        let r = minimize_k_from(&s, k, opts, quad, &starts)?;
        out.push((b, r.value.value, r.measure));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn analytic_derivative_cases() {
        let spec = MixtureSpec::pure(2, 0.5, 0.0).unwrap();
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert_eq!(dp_dbeta_analytic(&spec, &d0, 2).value, 0.5);
        let absent = dp_dbeta_analytic(&spec, &d0, 4);
        assert_eq!(absent.value, 0.0);
        assert!(!absent.term_present);
        let d1 = DiscreteMeasure::dirac(1.0).unwrap();
        assert_eq!(dp_dbeta_analytic(&spec, &d1, 2).value, 0.0);
    }

    #[test]
    fn fd_derivative_at_dirac_zero() {
        // P(δ_0) = log cosh h + β²/2
        let spec = MixtureSpec::pure(2, 0.5, 0.0).unwrap();
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        let fd = dp_dbeta_fd(&spec, &d0, 2, 1e-3, &QuadratureConfig::default()).unwrap();
        assert_abs_diff_eq!(fd, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn fd_derivative_vanishes_at_zero_coupling() {
        let spec = MixtureSpec::new_degenerate([(2, 0.0), (4, 0.7)], 0.2).unwrap();
        let m = DiscreteMeasure::new(&[0.2, 0.6], &[0.4, 1.0]).unwrap();
        let fd = dp_dbeta_fd(&spec, &m, 2, 1e-3, &QuadratureConfig::default()).unwrap();
        assert!(fd.abs() < 1e-10, "{fd}");
    }
}
