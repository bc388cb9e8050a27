use parisi_core::calculus::{dp_dbeta_analytic, dp_dbeta_fd, overlap_moment_limit};
use parisi_core::functional::Evaluator;
use parisi_core::optimizer::{minimize_k, minimize_ladder, stationarity_certificate, Strategy as Search};
use parisi_core::phase::{classify, fixed_point_oracle, rs_best_dirac, Band, RS_TOL};
use parisi_core::quadrature::legendre_nodes;
use parisi_core::{DiscreteMeasure, MixtureSpec, OptimizerOptions, Parallelism, QuadratureConfig};
use proptest::prelude::*;

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[test]
fn high_temperature_minimizer_is_dirac_at_zero() {
    let spec = MixtureSpec::pure(2, 0.4, 0.0).unwrap();
    let ladder = minimize_ladder(&spec, 3, &OptimizerOptions::default(), &quad()).unwrap();
    for level in &ladder.levels {
        assert!((level.value - 0.08).abs() < 1e-12);
        assert_eq!(level.measure, DiscreteMeasure::dirac(0.0).unwrap());
    }
    assert!(ladder.converged);
}

#[test]
fn two_atom_minimizer_beats_random_two_atom_measures() {
    let spec = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
    let best = minimize_k(&spec, 2, &OptimizerOptions::default(), &quad()).unwrap();
    let ev = Evaluator::new(&spec, &quad()).unwrap();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let measures = (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64);
    runner
        .run(&measures, |(a, b, m)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(best.value.value <= ev.value(&[lo, hi], &[m, 1.0]) + 1e-10);
            Ok(())
        })
        .unwrap();
    assert!(best.stationarity.pass, "{:?}", best.stationarity);
}

#[test]
fn strategies_and_schedules_agree() {
    let spec = MixtureSpec::new([(2, 1.0), (4, 0.8)], 0.4).unwrap();
    let base = OptimizerOptions::default();
    let seq = OptimizerOptions {
        parallelism: Parallelism::Sequential,
        ..base.clone()
    };
    let a = minimize_k(&spec, 2, &base, &quad()).unwrap();
    let b = minimize_k(&spec, 2, &seq, &quad()).unwrap();
    assert_eq!(a, b);
    let pg = OptimizerOptions {
        strategy: Search::ProjectedGradient,
        ..base
    };
    let c = minimize_k(&spec, 2, &pg, &quad()).unwrap();
    assert!(
        (a.value.value - c.value.value).abs() < 1e-7,
        "{} vs {}",
        a.value.value,
        c.value.value
    );
}

#[test]
fn stationarity_rejects_a_non_minimizer() {
    let spec = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
    let m = DiscreteMeasure::new(&[0.2, 0.7], &[0.3, 1.0]).unwrap();
    let cert = stationarity_certificate(&spec, &m, &quad(), 1e-3).unwrap();
    assert!(!cert.pass);
    // δ_0 deep in the low-temperature phase: zero first derivative in q,
    // but the finite boundary probes see the descent
    let d0 = DiscreteMeasure::dirac(0.0).unwrap();
    assert!(!stationarity_certificate(&spec, &d0, &quad(), 1e-3).unwrap().pass);
}

#[test]
fn derivative_identity_needs_stationarity() {
    let spec = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
    let best = minimize_k(&spec, 2, &OptimizerOptions::default(), &quad()).unwrap();
    let fd = dp_dbeta_fd(&spec, &best.measure, 2, 1e-3, &quad()).unwrap();
    assert!((fd - dp_dbeta_analytic(&spec, &best.measure, 2).value).abs() < 1e-5);
    let off = DiscreteMeasure::new(&[0.1, 0.9], &[0.5, 1.0]).unwrap();
    let fd_off = dp_dbeta_fd(&spec, &off, 2, 1e-3, &quad()).unwrap();
    assert!((fd_off - dp_dbeta_analytic(&spec, &off, 2).value).abs() > 1e-3);
}

#[test]
fn classification_of_reference_models() {
    let opts = OptimizerOptions::default();
    let rs = classify(&MixtureSpec::pure(2, 0.4, 0.0).unwrap(), 2, RS_TOL, &quad(), &opts).unwrap();
    assert!(rs.is_rs);
    assert_eq!(rs.band, Band::Rs);
    assert_eq!(rs.measure, DiscreteMeasure::dirac(0.0).unwrap());

    let rsb = classify(&MixtureSpec::pure(2, 1.2, 0.0).unwrap(), 2, RS_TOL, &quad(), &opts).unwrap();
    assert!(!rsb.is_rs);
    assert_eq!(rsb.band, Band::Rsb);
    assert_eq!(rsb.positive_overlap_witness, Some(true));

    let field = classify(&MixtureSpec::pure(2, 1.2, 0.3).unwrap(), 2, RS_TOL, &quad(), &opts).unwrap();
    assert!(field.conjectural);
}

#[test]
fn moment_predictions_outside_the_model_are_flagged() {
    let spec = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
    let ladder = minimize_ladder(&spec, 2, &OptimizerOptions::default(), &quad()).unwrap();
    assert!(overlap_moment_limit(&spec, &ladder, 2).within_guarantee);
    let p4 = overlap_moment_limit(&spec, &ladder, 4);
    assert!(!p4.within_guarantee);
    assert_eq!(p4.value, ladder.top().measure.moment(4));
}

/// `q − E tanh²(h + √ξ'(q) z)` by a wide composite Legendre rule.
fn fixed_point_residual(spec: &MixtureSpec, q: f64) -> f64 {
    let sigma = spec.xi_prime(q).unwrap().sqrt();
    let (x, w) = legendre_nodes(20);
    let panels = 40;
    let width = 24.0 / panels as f64;
    let mut e = 0.0;
    for p in 0..panels {
        let mid = -12.0 + (p as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            let z = mid + 0.5 * width * xi;
            let dens = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            e += 0.5 * width * wi * dens * (spec.h() + sigma * z).tanh().powi(2);
        }
    }
    q - e
}

#[test]
fn fixed_point_roots_solve_the_equation() {
    for spec in [
        MixtureSpec::pure(2, 1.2, 0.0).unwrap(),
        MixtureSpec::pure(2, 0.5, 0.4).unwrap(),
        MixtureSpec::new([(2, 1.0), (4, 0.8)], 0.4).unwrap(),
    ] {
        let roots = fixed_point_oracle(&spec);
        assert!(!roots.is_empty());
        for r in roots {
            assert!(fixed_point_residual(&spec, r).abs() < 1e-9, "{spec}: root {r}");
        }
    }
}

#[test]
fn best_dirac_beats_the_scan() {
    let spec = MixtureSpec::pure(2, 0.6, 0.5).unwrap();
    let (q, v) = rs_best_dirac(&spec, &quad()).unwrap();
    let ev = Evaluator::new(&spec, &quad()).unwrap();
    for i in 0..=50 {
        let x = i as f64 / 50.0;
        assert!(v <= ev.value(&[x], &[1.0]) + 1e-12);
    }
    assert!(fixed_point_residual(&spec, q).abs() < 1e-6);
}
