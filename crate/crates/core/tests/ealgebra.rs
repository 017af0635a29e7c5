mod common;

use proptest::prelude::*;
use qhm_core::ealgebra::*;
use qhm_core::gauge::nabla0;
use qhm_core::numerics::C;
use qhm_core::samples;
use qhm_core::ximodule::{act_e, act_e_candidate, inner_d, inner_e};
use qhm_core::dalgebra::d_trace;
use qhm_core::Direction;

fn elem(seed: u64, stream: u64) -> EElement {
    samples::random_e(&common::setup(), &mut samples::rng(seed, stream))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unit_associativity_and_involution(seed in any::<u64>()) {
        let s = common::setup();
        let id = e_identity(&s);
        let (a, b, c) = (elem(seed, 1), elem(seed, 2), elem(seed, 3));
        prop_assert!(e_mul(&a, &id).unwrap().defect(&a).unwrap().value() < 1e-10);
        prop_assert!(e_mul(&id, &a).unwrap().defect(&a).unwrap().value() < 1e-10);
        prop_assert!(e_star(&e_star(&a)).defect(&a).unwrap().value() < 1e-10);
        let left = e_mul(&e_mul(&a, &b).unwrap(), &c).unwrap();
        let right = e_mul(&a, &e_mul(&b, &c).unwrap()).unwrap();
        prop_assert!(left.defect(&right).unwrap().value() < 1e-8);
        let rev = e_mul(&e_star(&b), &e_star(&a)).unwrap();
        prop_assert!(e_star(&e_mul(&a, &b).unwrap()).defect(&rev).unwrap().value() < 1e-8);
    }

    #[test]
    fn trace_is_tracial_and_kills_derivations(seed in any::<u64>()) {
        let cal = common::calibration();
        let (a, b) = (elem(seed, 1), elem(seed, 2));
        let ab = e_trace_product(&a, &b, &cal).unwrap();
        let ba = e_trace_product(&b, &a, &cal).unwrap();
        prop_assert!((ab - ba).norm() < 1e-8);
        prop_assert!((ab - e_trace(&e_mul(&a, &b).unwrap(), &cal)).norm() < 1e-10);
        for d in Direction::ALL {
            prop_assert!(e_trace(&e_delta(d, &a), &cal).norm() < 1e-8, "{d}");
        }
    }

    #[test]
    fn derived_derivations_obey_the_bracket_table(seed in any::<u64>()) {
        let s = common::setup();
        let c = s.params.c as f64;
        let a = elem(seed, 1);
        let comm = |x: Direction, y: Direction| e_delta(x, &e_delta(y, &a)).sub(&e_delta(y, &e_delta(x, &a))).unwrap();
        let xy = comm(Direction::X, Direction::Y).axpy(C::new(c, 0.0), &e_delta(Direction::Z, &a)).unwrap();
        prop_assert!(xy.sup_norm() < 1e-7);
        prop_assert!(comm(Direction::X, Direction::Z).sup_norm() < 1e-7);
        prop_assert!(comm(Direction::Y, Direction::Z).sup_norm() < 1e-7);
    }

    #[test]
    fn derivations_are_leibniz(seed in any::<u64>()) {
        let (a, b) = (elem(seed, 1), elem(seed, 2));
        let ab = e_mul(&a, &b).unwrap();
        for d in Direction::ALL {
            let rhs = e_mul(&e_delta(d, &a), &b).unwrap().add(&e_mul(&a, &e_delta(d, &b)).unwrap()).unwrap();
            prop_assert!(e_delta(d, &ab).defect(&rhs).unwrap().value() < 1e-7, "{d}");
        }
    }

    #[test]
    fn outputs_stay_twist_consistent(seed in any::<u64>()) {
        let (a, b) = (elem(seed, 1), elem(seed, 2));
        prop_assert!(e_twist_defect(&a, 3) < 1e-8);
        prop_assert!(e_twist_defect(&e_mul(&a, &b).unwrap(), 3) < 1e-8);
        prop_assert!(e_twist_defect(&e_star(&a), 3) < 1e-8);
        prop_assert!(e_twist_defect(&e_delta(Direction::Y, &a), 3) < 1e-8);
    }

    #[test]
    fn exponential_of_skew_is_unitary(seed in any::<u64>(), amp in 0.05f64..1.5) {
        let s = common::setup();
        let u = samples::random_unitary(&s, &mut samples::rng(seed, 4), amp).unwrap();
        let id = e_identity(&s);
        prop_assert!(e_mul(&u, &e_star(&u)).unwrap().defect(&id).unwrap().value() < 1e-8);
        prop_assert!(e_mul(&e_star(&u), &u).unwrap().defect(&id).unwrap().value() < 1e-8);
    }
}

#[test]
fn closed_form_derivations_match_operator_commutators() {
    let s = common::setup();
    let session = common::session();
    let mut rng = samples::rng(21, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let psi = samples::random_e(&s, &mut rng);
        let f = samples::random_vector(&s, &mut rng).unwrap();
        for d in Direction::ALL {
            let comm = nabla0(d, &act_e(&session, &psi, &f).unwrap())
                .sub(&act_e(&session, &psi, &nabla0(d, &f)).unwrap())
                .unwrap();
            let closed = act_e(&session, &e_delta(d, &psi), &f).unwrap();
            worst = worst.max(comm.defect(&closed).unwrap().value());
        }
    }
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn calibrated_trace_matches_the_d_trace_on_inner_products() {
    let s = common::setup();
    let cal = common::calibration();
    assert!(cal.spread < 1e-6);
    assert!((e_trace(&e_identity(&s), &cal).re - cal.constant * 2.0 * s.params.mu).abs() < 1e-14);
    let mut rng = samples::rng(4, 6);
    for _ in 0..5 {
        let f = samples::random_vector(&s, &mut rng).unwrap();
        let te = e_trace(&inner_e(&f, &f).unwrap(), &cal);
        let td = d_trace(&inner_d(&f, &f).unwrap());
        assert!((te - td).norm() < 1e-8, "{te} vs {td}");
    }
}

#[test]
fn from_operator_recovers_identity_actions_and_derivations() {
    let s = common::setup();
    let session = common::session();
    let (id, twist) = from_operator(&s, s.p_max(), |f| Ok(f.clone())).unwrap();
    assert!(id.defect(&e_identity(&s)).unwrap().value() < 1e-7);
    assert!(twist < 1e-8);

    let psi = elem(31, 1);
    let (back, _) = from_operator(&s, s.p_max(), |f| act_e(&session, &psi, f)).unwrap();
    let d = back.defect(&psi).unwrap().value();
    assert!(d < 1e-7, "round trip {d:e}");

    let (dz, _) = from_operator(&s, s.p_max(), |f| {
        nabla0(Direction::Z, &act_e_candidate(&psi, f)?).sub(&act_e_candidate(&psi, &nabla0(Direction::Z, f))?)
    })
    .unwrap();
    let d = dz.defect(&e_delta(Direction::Z, &psi)).unwrap().value();
    assert!(d < 1e-7, "δ̂_Z {d:e}");
}

#[test]
fn from_operator_rejects_out_of_range_fibers() {
    let s = common::setup();
    assert!(from_operator(&s, s.p_max() + 1, |f| Ok(f.clone())).is_err());
}

#[test]
fn interior_bump_at_fiber_one_is_twist_consistent() {
    let s = common::setup();
    let mu = s.params.mu;
    let bump = |x: f64| {
        let t = (x - mu) / (0.8 * mu);
        if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 }
    };
    let (c, nu) = (s.params.c as f64, s.params.nu);
    // the twist extension of the bump: reduce x into [0, 2μ) by q steps
    let sampler = |x: f64, y: f64, k: i64| {
        if k != 1 {
            return C::new(0.0, 0.0);
        }
        let q = (x / (2.0 * mu)).floor();
        let (x0, y0) = (x - 2.0 * q * mu, y - 2.0 * q * nu);
        C::from_polar(bump(x0), -2.0 * std::f64::consts::PI * c * q * (y0 + q * nu))
    };
    let (psi, defect) = e_from_function(&s, sampler).unwrap();
    assert!(defect < 1e-12, "{defect:e}");
    let x = s.e_grid.x(20);
    assert!((e_eval(&psi, x, 0.3, 1) - C::new(bump(x), 0.0)).norm() < 1e-12);
}
