mod common;

use harnack_lab::model::{
    admissible_pq, check_hypotheses, lqp_norm, translation_modulus, DiffusionSpec, DriftSpec, QuadratureParams,
    SigmaSource,
};
use harnack_lab::Error;
use proptest::prelude::*;

fn quad() -> QuadratureParams {
    QuadratureParams::default()
}

#[test]
fn indicator_drift_values() {
    let b = DriftSpec::indicator_box(vec![2.0], vec![0.0], vec![1.0], 2.0, 4.0).unwrap();
    assert_eq!(b.eval(0.3, &[0.5]).unwrap(), vec![2.0]);
    assert_eq!(b.eval(7.0, &[1.5]).unwrap(), vec![0.0]);
    assert_eq!(common::zero_drift(1).eval(0.5, &[3.0]).unwrap(), vec![0.0]);
    assert!(matches!(b.eval(0.0, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn closed_form_norms() {
    let b = DriftSpec::indicator_box(vec![2.0], vec![0.0], vec![1.0], 2.0, 4.0).unwrap();
    assert!((lqp_norm(&b, 1.0, &quad()).unwrap() - 2.0).abs() < 1e-12);
    let b = DriftSpec::indicator_box(vec![1.0], vec![0.0], vec![1.0], 2.0, 2.0).unwrap();
    assert!((lqp_norm(&b, 4.0, &quad()).unwrap() - 2.0).abs() < 1e-12);
    assert!((translation_modulus(&b, 0.0, &[0.5], &quad()).unwrap() - 1.0).abs() < 1e-12);
    assert!((translation_modulus(&b, 0.0, &[3.0], &quad()).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(lqp_norm(&common::zero_drift(2), 1.0, &quad()).unwrap(), 0.0);
}

#[test]
fn hypothesis_report_examples() {
    let diff = DiffusionSpec::identity(1, 1.5).unwrap();
    let r = check_hypotheses(&common::zero_drift(1), &diff, 1.0, &[vec![0.1]], &quad()).unwrap();
    assert!(r.admissible_pq);
    assert!(r.h2_ok);
    assert_eq!(r.lqp_norm_of_b, 0.0);
    assert!(!admissible_pq(2, 2.0, 2.0));

    // indicator ratio sqrt(2) |y|^{-1/2} grows as |y| shrinks
    let b = DriftSpec::indicator_box(vec![1.0], vec![0.0], vec![1.0], 2.0, 4.0).unwrap();
    let ys = [vec![0.5], vec![0.1], vec![0.01]];
    let r = check_hypotheses(&b, &diff, 1.0, &ys, &quad()).unwrap();
    for row in &r.empirical_translation_ratios {
        let expect = 2f64.sqrt() * row.displacement_norm.powf(-0.5);
        assert!((row.ratio - expect).abs() < 1e-9 * expect);
    }
    assert!(r.empirical_translation_ratios[2].ratio > r.empirical_translation_ratios[0].ratio);
}

#[test]
fn diffusion_rejects_degenerate_sigma() {
    let too_small = SigmaSource::Constant(vec![vec![0.5]]);
    assert!(DiffusionSpec::new(too_small, 1.5).is_err());
    let ok = SigmaSource::Constant(vec![vec![0.9]]);
    assert!(DiffusionSpec::new(ok, 1.5).is_ok());
    assert!(DiffusionSpec::identity(1, 1.0).is_err());
}

#[test]
fn mollified_converges_to_indicator_off_boundary() {
    for x in [-0.3, 0.02, 0.5, 0.97, 1.4] {
        let target = if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
        let mut last = f64::INFINITY;
        for eps in [0.5, 0.1, 0.02, 0.004] {
            let b = DriftSpec::mollified_indicator(vec![1.0], vec![0.0], vec![1.0], eps, 4.0, 4.0).unwrap();
            let err = (b.eval(0.0, &[x]).unwrap()[0] - target).abs();
            assert!(err <= last);
            last = err;
        }
        assert_eq!(last, 0.0, "x = {x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_absolutely_homogeneous(a in -5.0f64..5.0, p in 1.5f64..6.0, q in 1.5f64..6.0) {
        let unit = DriftSpec::indicator_box(vec![1.0], vec![-0.5], vec![0.25], p, q).unwrap();
        let scaled = DriftSpec::indicator_box(vec![a], vec![-0.5], vec![0.25], p, q).unwrap();
        let n1 = lqp_norm(&unit, 2.0, &quad()).unwrap();
        let na = lqp_norm(&scaled, 2.0, &quad()).unwrap();
        prop_assert!((na - a.abs() * n1).abs() <= 1e-12 * (1.0 + na));
    }

    #[test]
    fn translation_is_symmetric(y in 0.01f64..2.0, eps in 0.02f64..0.5) {
        for spec in [
            DriftSpec::indicator_box(vec![1.5], vec![0.0], vec![1.0], 3.0, 4.0).unwrap(),
            DriftSpec::mollified_indicator(vec![1.5], vec![0.0], vec![1.0], eps, 3.0, 4.0).unwrap(),
        ] {
            let plus = translation_modulus(&spec, 0.0, &[y], &quad()).unwrap();
            let minus = translation_modulus(&spec, 0.0, &[-y], &quad()).unwrap();
            prop_assert!((plus - minus).abs() <= 1e-6 * plus.max(1e-12));
        }
    }

    #[test]
    fn norm_monotone_in_horizon(t in 0.01f64..5.0, dt in 0.0f64..3.0) {
        let spec = common::mollified();
        let a = lqp_norm(&spec, t, &quad()).unwrap();
        let b = lqp_norm(&spec, t + dt, &quad()).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn mollified_modulus_is_linear(y in 1e-3f64..1.0, eps in 0.05f64..0.4) {
        let spec = DriftSpec::mollified_indicator(vec![1.0], vec![0.0], vec![1.0], eps, 4.0, 4.0).unwrap();
        let k = spec.analytic_norms().unwrap().modulus.unwrap();
        let m = translation_modulus(&spec, 0.0, &[y], &quad()).unwrap();
        prop_assert!(m <= k * y * (1.0 + 1e-3), "m = {m}, K|y| = {}", k * y);
    }

    #[test]
    fn admissibility_predicate(d in 1usize..4, p in 1.01f64..20.0, q in 1.01f64..20.0) {
        prop_assert_eq!(admissible_pq(d, p, q), d as f64 / p + 2.0 / q < 1.0);
    }
}
