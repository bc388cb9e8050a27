//! The grid evaluator against a literal nested quadrature of the recursion.

mod support;

use parisi_core::functional::{decomposition_f, evaluate, rs_closed_form, Evaluator};
use parisi_core::{DiscreteMeasure, LayerRule, MixtureSpec, QuadratureConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{random_case, tensor_oracle};

#[test]
fn aligned_rule_matches_tensor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let quad = QuadratureConfig::default();
    for case in 0..12 {
        let (coeffs, h, q, m) = random_case(&mut rng, 3);
        let spec = MixtureSpec::new(coeffs.clone(), h).unwrap();
        let want = tensor_oracle(&coeffs, h, &q, &m);
        let got = Evaluator::new(&spec, &quad).unwrap().value(&q, &m);
        assert!(
            (got - want).abs() <= 1e-8,
            "case {case} {coeffs:?} h={h} q={q:?} m={m:?}: {got} vs {want}"
        );
    }
}

#[test]
fn hermite_rule_matches_tensor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let quad = QuadratureConfig {
        rule: LayerRule::Hermite,
        hermite_nodes: 60,
        grid_points: 2049,
        ..QuadratureConfig::default()
    };
    for case in 0..6 {
        let (coeffs, h, q, m) = random_case(&mut rng, 3);
        let spec = MixtureSpec::new(coeffs.clone(), h).unwrap();
        let want = tensor_oracle(&coeffs, h, &q, &m);
        let got = Evaluator::new(&spec, &quad).unwrap().value(&q, &m);
        assert!((got - want).abs() <= 1e-6, "case {case}: {got} vs {want}");
    }
}

#[test]
fn dirac_matches_closed_form_and_error_estimate_is_small() {
    let quad = QuadratureConfig::default();
    for (coeffs, h) in [
        (vec![(2u32, 1.0)], 0.0),
        (vec![(2, 1.4), (4, 0.6)], 0.3),
        (vec![(1, 0.5), (3, 0.9)], 0.1),
    ] {
        let spec = MixtureSpec::new(coeffs, h).unwrap();
        for q in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let v = evaluate(&spec, &DiscreteMeasure::dirac(q).unwrap(), &quad).unwrap();
            let oracle = rs_closed_form(&spec, q, &quad).unwrap();
            assert!(
                (v.value - oracle).abs() <= 1e-8,
                "{spec} q={q}: {} vs {oracle}",
                v.value
            );
            assert!(v.quad_error_estimate <= 1e-8);
        }
    }
}

#[test]
fn decomposition_identity_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let quad = QuadratureConfig::default();
    for _ in 0..20 {
        let (coeffs, h, q, m) = random_case(&mut rng, 3);
        let spec = MixtureSpec::new(coeffs, h).unwrap();
        let mu = DiscreteMeasure::new(&q, &m).unwrap();
        let d = decomposition_f(&spec, &mu, &quad).unwrap();
        assert!(d.identity_residual.abs() <= 1e-12, "{}", d.identity_residual);
    }
}
