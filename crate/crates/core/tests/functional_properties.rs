mod support;

use parisi_core::functional::{evaluate, rs_closed_form, Evaluator};
use parisi_core::{DiscreteMeasure, MixtureSpec, QuadratureConfig};
use proptest::prelude::*;

fn arb_spec() -> impl Strategy<Value = MixtureSpec> {
    (0.0..0.6f64, 0.2..1.3f64, 0.0..0.8f64, -0.7..0.7f64)
        .prop_map(|(b1, b2, b4, h)| MixtureSpec::new([(1, b1), (2, b2), (4, b4)], h).unwrap())
}

fn arb_measure(max_atoms: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_atoms).prop_flat_map(|k| {
        (
            proptest::collection::vec(0.0..1.0f64, k),
            proptest::collection::vec(0.0..1.0f64, k),
        )
            .prop_map(|(mut q, mut m)| {
                q.sort_by(f64::total_cmp);
                m.sort_by(f64::total_cmp);
                *m.last_mut().unwrap() = 1.0;
                (q, m)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn splitting_an_atom_leaves_the_value(spec in arb_spec(), (q, m) in arb_measure(3), at in 0usize..3) {
        let ev = Evaluator::new(&spec, &QuadratureConfig::default()).unwrap();
        let i = at % q.len();
        let mut q2 = q.clone();
        let mut m2 = m.clone();
        q2.insert(i, q[i]);
        m2.insert(i, if i == 0 { 0.5 * m[0] } else { 0.5 * (m[i - 1] + m[i]) });
        prop_assert!((ev.value(&q, &m) - ev.value(&q2, &m2)).abs() < 1e-10);
    }

    #[test]
    fn value_is_even_in_the_field_and_couplings(spec in arb_spec(), (q, m) in arb_measure(3)) {
        let quad = QuadratureConfig::default();
        let flipped = MixtureSpec::new(spec.coeffs().iter().map(|&(p, b)| (p, -b)), -spec.h()).unwrap();
        let a = Evaluator::new(&spec, &quad).unwrap().value(&q, &m);
        let b = Evaluator::new(&flipped, &quad).unwrap().value(&q, &m);
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn dirac_values_match_closed_form(spec in arb_spec(), q in 0.0..1.0f64) {
        let quad = QuadratureConfig::default();
        let v = evaluate(&spec, &DiscreteMeasure::dirac(q).unwrap(), &quad).unwrap();
        prop_assert!((v.value - rs_closed_form(&spec, q, &quad).unwrap()).abs() < 1e-8);
        prop_assert!((v.with_entropy() - v.value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn decoupled_model_is_log_cosh(h in -2.0..2.0f64, (q, m) in arb_measure(3)) {
        let spec = MixtureSpec::new_degenerate([(2, 0.0)], h).unwrap();
        let v = Evaluator::new(&spec, &QuadratureConfig::default()).unwrap().value(&q, &m);
        prop_assert!((v - h.cosh().ln()).abs() < 1e-12);
    }
}

#[test]
fn pure_two_spin_at_zero_overlap() {
    // P(δ_0) = β²/2 at h = 0
    for beta in [0.2, 0.7, 1.5] {
        let spec = MixtureSpec::pure(2, beta, 0.0).unwrap();
        let v = evaluate(
            &spec,
            &DiscreteMeasure::dirac(0.0).unwrap(),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((v.value - 0.5 * beta * beta).abs() < 1e-12);
    }
}

#[test]
fn linear_term_acts_as_a_random_field() {
    // with only p = 1, P(δ_q) = E log cosh(h + β₁ z) for every q
    let spec = MixtureSpec::new_degenerate([(1, 0.8)], 0.3).unwrap();
    let quad = QuadratureConfig::default();
    let rule = support::oracle_rule(0.8, 0.0);
    let want: f64 = rule.iter().map(|&(t, w)| w * (0.3 + t).cosh().ln()).sum();
    for q in [0.0, 0.4, 1.0] {
        let v = evaluate(&spec, &DiscreteMeasure::dirac(q).unwrap(), &quad).unwrap();
        assert!((v.value - want).abs() < 1e-10, "q={q}: {} vs {want}", v.value);
    }
}
