mod common;

use proptest::prelude::*;
use qhm_core::dalgebra::{d_mul, d_star, d_trace};
use qhm_core::ealgebra::{e_identity, e_mul, e_star, e_twist_defect};
use qhm_core::harness::Session;
use qhm_core::numerics::C;
use qhm_core::samples;
use qhm_core::ximodule::*;
use qhm_core::Error;

fn vectors(seed: u64) -> (XiElement, XiElement, XiElement) {
    let s = common::setup();
    let mut rng = samples::rng(seed, 10);
    (
        samples::random_vector(&s, &mut rng).unwrap(),
        samples::random_vector(&s, &mut rng).unwrap(),
        samples::random_vector(&s, &mut rng).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn right_module_and_inner_product_laws(seed in any::<u64>()) {
        let s = common::setup();
        let (f, g, _) = vectors(seed);
        let mut rng = samples::rng(seed, 11);
        let (a, b) = (samples::random_d(&s, &mut rng), samples::random_d(&s, &mut rng));
        let lhs = act_d(&act_d(&f, &a).unwrap(), &b).unwrap();
        prop_assert!(lhs.defect(&act_d(&f, &d_mul(&a, &b).unwrap()).unwrap()).unwrap().value() < 1e-7);
        let lhs = inner_d(&f, &act_d(&g, &a).unwrap()).unwrap();
        prop_assert!(lhs.defect(&d_mul(&inner_d(&f, &g).unwrap(), &a).unwrap()).unwrap().value() < 1e-7);
        prop_assert!(d_star(&inner_d(&f, &g).unwrap()).defect(&inner_d(&g, &f).unwrap()).unwrap().value() < 1e-8);
        let tr = d_trace(&inner_d(&f, &f).unwrap());
        prop_assert!(tr.re >= 0.0 && (tr.re - f.l2_norm_sq()).abs() < 1e-8);
    }

    #[test]
    fn sesquilinearity(seed in any::<u64>(), w in prop::array::uniform2(-1.0f64..1.0)) {
        let (f, g, h) = vectors(seed);
        let w = C::new(w[0], w[1]);
        let lhs = inner_d(&f, &g.axpy(w, &h).unwrap()).unwrap();
        // conjugate-linear in the second slot
        let rhs = inner_d(&f, &g).unwrap().axpy(w.conj(), &inner_d(&f, &h).unwrap()).unwrap();
        prop_assert!(lhs.defect(&rhs).unwrap().value() < 1e-10);
    }

    #[test]
    fn imprimitivity_and_left_module_laws(seed in any::<u64>()) {
        let s = common::setup();
        let session = common::session();
        let (f, g, h) = vectors(seed);
        let fg = inner_e(&f, &g).unwrap();
        prop_assert!(e_twist_defect(&fg, 3) < 1e-8);
        prop_assert!(e_star(&fg).defect(&inner_e(&g, &f).unwrap()).unwrap().value() < 1e-7);
        let lhs = act_e(&session, &fg, &h).unwrap();
        prop_assert!(lhs.defect(&act_d(&f, &inner_d(&g, &h).unwrap()).unwrap()).unwrap().value() < 1e-7);
        let mut rng = samples::rng(seed, 12);
        let (psi, chi) = (samples::random_e(&s, &mut rng), samples::random_e(&s, &mut rng));
        let phi = samples::random_d(&s, &mut rng);
        let lhs = act_e(&session, &e_mul(&psi, &chi).unwrap(), &f).unwrap();
        let rhs = act_e(&session, &psi, &act_e(&session, &chi, &f).unwrap()).unwrap();
        prop_assert!(lhs.defect(&rhs).unwrap().value() < 1e-7);
        let lhs = act_e(&session, &psi, &act_d(&f, &phi).unwrap()).unwrap();
        let rhs = act_d(&act_e(&session, &psi, &f).unwrap(), &phi).unwrap();
        prop_assert!(lhs.defect(&rhs).unwrap().value() < 1e-7);
    }
}

#[test]
fn e_action_requires_validated_conventions() {
    let s = common::setup();
    let fresh = Session::new(&s);
    let f = gaussian_vector(&s, 1.0, 0, 0.0).unwrap();
    assert!(matches!(act_e(&fresh, &e_identity(&s), &f), Err(Error::ConventionUnvalidated)));
    let back = act_e(&common::session(), &e_identity(&s), &f).unwrap();
    assert!(back.defect(&f).unwrap().value() < 1e-14);
}

#[test]
fn p0_action_is_pointwise_conjugate_multiplication() {
    let s = common::setup();
    let f = gaussian_vector(&s, 2.0, 0, 0.1).unwrap();
    let phi = samples::d_from_fibers(&s, |x, y, _| C::new(1.0 + 0.3 * x, 0.2 * (2.0 * std::f64::consts::PI * y).sin()), &[0]);
    let out = act_d(&f, &phi).unwrap();
    for (x, y) in [(0.2, 0.1), (0.55, 0.7)] {
        let want = qhm_core::dalgebra::d_eval(&phi, x, y, 0).conj() * xi_eval(&f, x, y);
        assert!((xi_eval(&out, x, y) - want).norm() < 1e-9);
    }
}

#[test]
fn leaking_result_is_a_tail_overflow() {
    let s = common::setup();
    // moving mass of a Gaussian near the edge outwards leaves it at the edge
    let f = xi_from_profile(&s, 0, |x| C::new((-(x - 5.5f64).powi(2)).exp(), 0.0)).unwrap();
    let shift = samples::periodized_d(&s, -1, 2.0, 0.5, &samples::Profile::single(0, C::new(1.0, 0.0)));
    assert!(matches!(act_d(&f, &shift), Err(Error::TailOverflow { .. })));
}
