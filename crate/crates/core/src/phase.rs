//! Replica-symmetric region detection and measure-level diagnostics of
//! overlap non-concentration.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functional::{dirac_rule, rs_closed_form, QuadratureConfig};
use crate::measure::DiscreteMeasure;
use crate::mixture::MixtureSpec;
use crate::optimizer::{minimize_ladder, LadderReport, OptimizerOptions};

/// Points of the Dirac scan in `q`.
pub const DIRAC_GRID: usize = 1001;

/// Default tolerance on the RS margin.
pub const RS_TOL: f64 = 1e-7;

/// Minimizer of `q ↦ P(δ_q)` over `[0, 1]`: a 1001-point scan followed by
/// golden-section refinement. Ties go to the smallest `q`.
pub fn rs_best_dirac(spec: &MixtureSpec, quad: &QuadratureConfig) -> Result<(f64, f64)> {
    let mut best = (0.0, rs_closed_form(spec, 0.0, quad)?);
    let mut best_i = 0;
    for i in 1..DIRAC_GRID {
        let q = i as f64 / (DIRAC_GRID - 1) as f64;
        let v = rs_closed_form(spec, q, quad)?;
        if v < best.1 {
            best = (q, v);
            best_i = i;
        }
    }
    let step = 1.0 / (DIRAC_GRID - 1) as f64;
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let hi = ((best_i + 1) as f64 * step).min(1.0);
    let f = |q: f64| rs_closed_form(spec, q, quad);
    let (gq, gv) = golden_section(f, lo, hi, 1e-10)?;
    if gv < best.1 {
        best = (gq, gv);
    }
    Ok(best)
}

fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// `q − E tanh²(z√ξ'(q) + h)` with a 200-node composite Gauss–Legendre rule.
fn fixed_point_map(spec: &MixtureSpec, q: f64) -> f64 {
    let sigma = spec.xi_prime_at(q).sqrt();
    let h = spec.h();
    let rule = crate::quadrature::GaussianRule::composite_legendre(10.0, 25, 8);
    q - rule.expect(|z| (sigma * z + h).tanh().powi(2))
}

/// Roots in `[0, 1]` of `q = E tanh²(z√ξ'(q) + h)`, from a sign scan on
/// 2001 points refined by bisection.
pub fn fixed_point_oracle(spec: &MixtureSpec) -> Vec<f64> {
    const N: usize = 2001;
    let qs: Vec<f64> = (0..N).map(|i| i as f64 / (N - 1) as f64).collect();
    let gs: Vec<f64> = qs.iter().map(|&q| fixed_point_map(spec, q)).collect();
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&q, &g) in qs.iter().zip(&gs) {
        if g.abs() <= 1e-14 {
            roots.push(q);
            prev = None;
            continue;
        }
        if let Some((pq, pg)) = prev {
            if pg.signum() != g.signum() {
                let (mut a, mut b, mut ga) = (pq, q, pg);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    let gm = fixed_point_map(spec, mid);
                    if gm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if gm.signum() == ga.signum() {
                        a = mid;
                        ga = gm;
                    } else {
                        b = mid;
                    }
                    if b - a <= 1e-15 {
                        break;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        prev = Some((q, g));
    }
    roots
}

/// `d/dq P(δ_q) = ½ ξ''(q) (q − E tanh²(z√ξ'(q) + h))`, by direct
/// quadrature.
pub fn dirac_slope(spec: &MixtureSpec, q: f64) -> f64 {
    let sigma = spec.xi_prime_at(q).sqrt();
    let h = spec.h();
    let t2 = dirac_rule(sigma, 9.0).expect(|z| (sigma * z + h).tanh().powi(2));
    0.5 * spec.xi_second_at(q) * (q - t2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Rs,
    /// Margin within a factor of ten of the tolerance.
    Indeterminate,
    Rsb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentGap {
    pub p1: u32,
    pub p2: u32,
    /// `(∫q^{p1} dm)^{1/p1} − (∫q^{p2} dm)^{1/p2}`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    pub best_dirac_q: f64,
    pub best_dirac_value: f64,
    /// The Dirac the ladder is compared with: `δ_0` for spin-flip symmetric
    /// models, the best Dirac otherwise.
    pub reference_q: f64,
    pub reference_value: f64,
    pub ladder_value: f64,
    /// `reference_value − ladder_value`.
    pub rs_margin: f64,
    pub tol: f64,
    pub is_rs: bool,
    pub band: Band,
    /// The reference Dirac when RS, else the top ladder measure.
    pub measure: DiscreteMeasure,
    pub ladder_measure: DiscreteMeasure,
    /// `(p, ∫q^p dm)`.
    pub moments: Vec<(u32, f64)>,
    pub moment_gaps: Vec<MomentGap>,
    pub l1_spread: f64,
    pub variance_proxy: f64,
    /// At `h = 0` outside RS: every even `p` has `∫q^p dm > 0`.
    pub positive_overlap_witness: Option<bool>,
    /// With two even orders outside RS: some moment gap below `−tol` and
    /// positive variance.
    pub spread_witness: Option<bool>,
    /// Set for the 2-spin model with a field, where non-concentration of
    /// the overlap is not established.
    pub conjectural: bool,
    pub converged: bool,
}

/// Orders whose moments are reported: 1, 2 and the orders of the model.
pub fn moment_orders(spec: &MixtureSpec) -> Vec<u32> {
    let mut ps: Vec<u32> = [1, 2].into_iter().chain(spec.orders()).collect();
    ps.sort_unstable();
    ps.dedup();
    ps
}

pub fn classify(
    spec: &MixtureSpec,
    k_max: usize,
    tol: f64,
    quad: &QuadratureConfig,
    opts: &OptimizerOptions,
) -> Result<PhaseDiagnostics> {
    let ladder = minimize_ladder(spec, k_max, opts, quad)?;
    diagnostics_from(spec, &ladder, tol, quad)
}

pub fn diagnostics_from(
    spec: &MixtureSpec,
    ladder: &LadderReport,
    tol: f64,
    quad: &QuadratureConfig,
) -> Result<PhaseDiagnostics> {
    let (best_dirac_q, best_dirac_value) = rs_best_dirac(spec, quad)?;
    let (reference_q, reference_value) = if spec.is_spin_flip_symmetric() {
        (0.0, rs_closed_form(spec, 0.0, quad)?)
    } else {
        (best_dirac_q, best_dirac_value)
    };
    let top = ladder.top();
    let rs_margin = reference_value - top.value;
    let is_rs = rs_margin <= tol;
    let band = if rs_margin <= 0.1 * tol {
        Band::Rs
    } else if rs_margin <= 10.0 * tol {
        Band::Indeterminate
    } else {
        Band::Rsb
    };
    let measure = if is_rs {
        DiscreteMeasure::dirac(reference_q)?
    } else {
        top.measure.clone()
    };
    let ps = moment_orders(spec);
    let moments: Vec<(u32, f64)> = ps.iter().map(|&p| (p, measure.moment(p))).collect();
    let mut moment_gaps = Vec::new();
    for (i, &p1) in ps.iter().enumerate() {
        for &p2 in &ps[i + 1..] {
            let gap = measure.moment(p1).powf(1.0 / p1 as f64) - measure.moment(p2).powf(1.0 / p2 as f64);
            moment_gaps.push(MomentGap { p1, p2, gap });
        }
    }
    let even: Vec<u32> = spec.orders().filter(|p| p % 2 == 0).collect();
    let positive_overlap_witness = (spec.h() == 0.0 && !is_rs).then(|| even.iter().all(|&p| measure.moment(p) > 0.0));
    let variance_proxy = measure.variance();
    let spread_witness = (even.len() >= 2 && !is_rs).then(|| {
        let gap_found = moment_gaps
            .iter()
            .any(|g| even.contains(&g.p1) && even.contains(&g.p2) && g.gap < -tol);
        gap_found && variance_proxy > 0.0
    });
    let conjectural = spec.h() != 0.0 && spec.orders().eq([2]);
    Ok(PhaseDiagnostics {
        best_dirac_q,
        best_dirac_value,
        reference_q,
        reference_value,
        ladder_value: top.value,
        rs_margin,
        tol,
        is_rs,
        band,
        l1_spread: measure.l1_spread(),
        variance_proxy,
        measure,
        ladder_measure: top.measure.clone(),
        moments,
        moment_gaps,
        positive_overlap_witness,
        spread_witness,
        conjectural,
        converged: ladder.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub beta: f64,
    pub diagnostics: PhaseDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub p: u32,
    /// First flip of `is_rs` along the grid, refined by bisection; `None`
    /// when there is no transition in range.
    pub beta_c: Option<f64>,
    /// Bracket of the refined transition.
    pub bracket: Option<(f64, f64)>,
    pub table: Vec<ScanRow>,
    /// Midpoints evaluated during bisection.
    pub refinements: Vec<ScanRow>,
    /// Where the fixed-point equation first gains a root away from the
    /// reference Dirac, when the model is spin-flip symmetric.
    pub fixed_point_beta_c: Option<f64>,
    pub converged: bool,
}

/// Sweeps `β_p` over `grid` (other coefficients fixed), classifying each
/// point; the first flip is refined to `resolution` by bisection, with
/// flips re-checked at doubled restarts.
#[allow(clippy::too_many_arguments)]
pub fn boundary_scan(
    base: &MixtureSpec,
    p: u32,
    grid: &[f64],
    k_max: usize,
    tol: f64,
    resolution: f64,
    quad: &QuadratureConfig,
    opts: &OptimizerOptions,
) -> Result<ScanReport> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(crate::Error::InvalidConfig(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let inner = OptimizerOptions {
        parallelism: crate::par::Parallelism::Sequential,
        ..opts.clone()
    };
    let at = |beta: f64, o: &OptimizerOptions| -> Result<ScanRow> {
        let spec = base.with_beta(p, beta)?;
        Ok(ScanRow {
            beta,
            diagnostics: classify(&spec, k_max, tol, quad, o)?,
        })
    };
    let table: Vec<ScanRow> = opts
        .parallelism
        .map(grid, |&b| at(b, &inner))
        .into_iter()
        .collect::<Result<_>>()?;

    let mut refinements = Vec::new();
    let mut bracket = None;
    if let Some(i) = (1..table.len()).find(|&i| table[i].diagnostics.is_rs != table[0].diagnostics.is_rs) {
        let left_state = table[i - 1].diagnostics.is_rs;
        let (mut a, mut b) = (table[i - 1].beta, table[i].beta);
        let doubled = OptimizerOptions {
            restarts: 2 * opts.restarts,
            ..inner.clone()
        };
        while b - a > resolution {
            let mid = 0.5 * (a + b);
            let mut row = at(mid, &inner)?;
            if row.diagnostics.is_rs != left_state {
                row = at(mid, &doubled)?;
            }
            if row.diagnostics.is_rs == left_state {
                a = mid;
            } else {
                b = mid;
            }
            refinements.push(row);
        }
        bracket = Some((a, b));
    }
    let converged = table.iter().chain(&refinements).all(|r| r.diagnostics.converged);
    let fixed_point_beta_c = if base.is_spin_flip_symmetric() {
        fixed_point_transition(base, p, grid[0], grid[grid.len() - 1], resolution)?
    } else {
        None
    };
    Ok(ScanReport {
        p,
        beta_c: bracket.map(|(a, b)| 0.5 * (a + b)),
        bracket,
        table,
        refinements,
        fixed_point_beta_c,
        converged,
    })
}

fn has_nontrivial_root(spec: &MixtureSpec) -> bool {
    fixed_point_oracle(spec).iter().any(|&r| r > 1e-6)
}

/// Bisection on the appearance of a positive root of the fixed-point
/// equation along `β_p ∈ [lo, hi]`.
pub fn fixed_point_transition(base: &MixtureSpec, p: u32, lo: f64, hi: f64, resolution: f64) -> Result<Option<f64>> {
    let at = |b: f64| -> Result<bool> { Ok(has_nontrivial_root(&base.with_beta(p, b)?)) };
    if at(lo)? || !at(hi)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > resolution {
        let mid = 0.5 * (a + b);
        if at(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixed_point_roots() {
        let rs = MixtureSpec::pure(2, 0.4, 0.0).unwrap();
        assert_eq!(fixed_point_oracle(&rs), vec![0.0]);
        let rsb = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
        let roots = fixed_point_oracle(&rsb);
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[0], 0.0);
        assert!(roots[1] > 0.1);
        let field = MixtureSpec::pure(2, 0.4, 0.3).unwrap();
        let roots = fixed_point_oracle(&field);
        assert_eq!(roots.len(), 1);
        assert!(roots[0] > 0.0);
    }

    #[test]
    fn best_dirac_matches_fixed_point() {
        let field = MixtureSpec::pure(2, 0.4, 0.3).unwrap();
        let (q, _) = rs_best_dirac(&field, &QuadratureConfig::default()).unwrap();
        let root = fixed_point_oracle(&field)[0];
        assert_abs_diff_eq!(q, root, epsilon = 1e-6);
        let rs = MixtureSpec::pure(2, 0.4, 0.0).unwrap();
        assert_eq!(rs_best_dirac(&rs, &QuadratureConfig::default()).unwrap().0, 0.0);
    }

    #[test]
    fn flat_objective_picks_zero() {
        let flat = MixtureSpec::new_degenerate([(2, 0.0)], 0.3).unwrap();
        let (q, v) = rs_best_dirac(&flat, &QuadratureConfig::default()).unwrap();
        assert_eq!(q, 0.0);
        assert_abs_diff_eq!(v, 0.3f64.cosh().ln(), epsilon = 1e-15);
    }

    #[test]
    fn fixed_point_transition_of_two_spin() {
        let base = MixtureSpec::pure(2, 0.5, 0.0).unwrap();
        let bc = fixed_point_transition(&base, 2, 0.1, 1.5, 1e-4).unwrap().unwrap();
        assert_abs_diff_eq!(bc, 0.5f64.sqrt(), epsilon = 2e-3);
    }
}
