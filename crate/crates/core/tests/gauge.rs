mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use qhm_core::ealgebra::{e_identity, e_mul, e_star, from_operator};
use qhm_core::gauge::*;
use qhm_core::harness::random_connection;
use qhm_core::numerics::{C, I};
use qhm_core::samples;
use qhm_core::ximodule::{act_e, gaussian_vector, xi_eval};
use qhm_core::{EElement, Error};

fn only(d: Direction, rho: &EElement) -> Connection {
    let s = rho.setup().clone();
    let mut parts = [EElement::zero(&s), EElement::zero(&s), EElement::zero(&s)];
    parts[d.index()] = rho.clone();
    Connection::new(parts).unwrap()
}

#[test]
fn reference_connection_in_direction_z_multiplies_by_x() {
    let s = common::setup();
    let f = gaussian_vector(&s, 1.0, 0, 0.0).unwrap();
    let g = nabla0(Direction::Z, &f);
    for x in [-1.3, 0.0, 0.4, 2.2] {
        let want = I * (PI * x / s.params.mu) * xi_eval(&f, x, 0.25);
        assert!((xi_eval(&g, x, 0.25) - want).norm() < 1e-9);
    }
}

#[test]
fn omega_of_a_pure_z_perturbation_is_the_bracket_term() {
    let s = common::setup();
    let rz = samples::random_skew_e(&s, &mut samples::rng(2, 1));
    let om = omega(&only(Direction::Z, &rz)).unwrap();
    let want = rz.scale(C::new(s.params.c as f64, 0.0));
    let got = om.get(Pair::XY);
    assert!(got.defect(&want).unwrap().value() < 1e-12);
    let zero = omega(&Connection::trivial(&s)).unwrap();
    for p in Pair::ALL {
        assert!(zero.get(p).is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn curvature_of_compatible_connections_is_skew(seed in any::<u64>()) {
        let s = common::setup();
        let conn = random_connection(&s, &mut samples::rng(seed, 2), 0.3).unwrap();
        let om = omega(&conn).unwrap();
        let th = curvature(&conn).unwrap();
        for p in Pair::ALL {
            prop_assert!(om.get(p).skew_defect() < 1e-8);
            prop_assert!(th.get(p).skew_defect() < 1e-8);
        }
        prop_assert!(ym_value(&conn, &common::calibration()).unwrap() >= 0.0);
    }

    #[test]
    fn gauge_transform_conjugates_curvature(seed in any::<u64>()) {
        let s = common::setup();
        let mut rng = samples::rng(seed, 3);
        let conn = random_connection(&s, &mut rng, 0.2).unwrap();
        let u = samples::random_unitary(&s, &mut rng, 0.5).unwrap();
        let moved = curvature(&gauge_transform(&u, &conn).unwrap()).unwrap();
        let th = curvature(&conn).unwrap();
        for p in Pair::ALL {
            let want = e_mul(&e_mul(&u, th.get(p)).unwrap(), &e_star(&u)).unwrap();
            prop_assert!(moved.get(p).defect(&want).unwrap().value() < 1e-7, "{}", p.name());
        }
    }
}

#[test]
fn operator_curvature_matches_the_closed_form() {
    let s = common::setup();
    let session = common::session();
    let conn = Connection::trivial(&s);
    let (zx, _) = from_operator(&s, s.p_max(), |f| curvature_operator(&session, &conn, Pair::ZX, f)).unwrap();
    let d = zx.defect(theta0(&s).get(Pair::ZX)).unwrap().value();
    assert!(d < 1e-7, "Θ(Z,X) {d:e}");

    let rz = samples::random_skew_e(&s, &mut samples::rng(9, 4)).scale(C::new(0.3, 0.0));
    let conn = only(Direction::Z, &rz);
    let (xy, _) = from_operator(&s, s.p_max(), |f| curvature_operator(&session, &conn, Pair::XY, f)).unwrap();
    let d = xy.defect(curvature(&conn).unwrap().get(Pair::XY)).unwrap().value();
    assert!(d < 1e-7, "Θ(X,Y) with ρ_Z {d:e}");
}

#[test]
fn closed_form_gauge_transform_matches_the_operator() {
    let s = common::setup();
    let session = common::session();
    let u = samples::random_unitary(&s, &mut samples::rng(5, 5), 0.5).unwrap();
    let us = e_star(&u);
    let conn = Connection::trivial(&s);
    let moved = gauge_transform(&u, &conn).unwrap();
    for d in [Direction::X, Direction::Y] {
        let (rho, _) = from_operator(&s, s.p_max(), |f| {
            let inner = apply_connection(&session, &conn, d, &act_e(&session, &us, f)?)?;
            act_e(&session, &u, &inner)?.sub(&nabla0(d, f))
        })
        .unwrap();
        let defect = rho.defect(moved.rho(d)).unwrap().value();
        assert!(defect < 1e-7, "{d}: {defect:e}");
    }
    let same = gauge_transform(&e_identity(&s), &conn).unwrap();
    for d in Direction::ALL {
        let n = same.rho(d).sup_norm();
        assert!(n < 1e-12, "{d}: {n:e}");
    }
}

#[test]
fn generic_perturbations_are_not_critical_and_not_constant() {
    let s = common::setup();
    let conn = random_connection(&s, &mut samples::rng(6, 6), 0.5).unwrap();
    let res = ym_residual(&conn).unwrap();
    assert!(res.iter().any(|r| *r > 1e-2), "{res:?}");
    let bump = samples::bump_e0(&s, 0.3, s.params.mu).scale(I);
    let th = curvature(&only(Direction::Y, &bump)).unwrap();
    let fit = constant_fit(th.get(Pair::XY), &common::calibration()).unwrap();
    assert!(fit.residual > 1e-3, "{fit:?}");
}

#[test]
fn non_unitary_and_non_skew_inputs_are_rejected() {
    let s = common::setup();
    let twice = e_identity(&s).scale(C::new(2.0, 0.0));
    assert!(matches!(gauge_transform(&twice, &Connection::trivial(&s)), Err(Error::NotUnitary { .. })));
    let hermitian = e_identity(&s);
    let z = EElement::zero(&s);
    assert!(matches!(
        Connection::new([hermitian, z.clone(), z]),
        Err(Error::NotSkewAdjoint { direction: "X", .. })
    ));
}

#[test]
fn reports_serialize_with_the_documented_keys() {
    let s = common::setup();
    let conn = Connection::trivial(&s);
    let rows = curvature_report(&curvature(&conn).unwrap(), &common::calibration()).unwrap();
    let v = serde_json::to_value(&rows).unwrap();
    let zx = &v[2];
    assert_eq!(zx["pair"], "ZX");
    assert!((zx["kappa_im"].as_f64().unwrap() - PI / s.params.mu).abs() < 1e-9);
    assert!(zx["kappa_re"].as_f64().unwrap().abs() < 1e-12);
    assert!(zx["residual"].as_f64().unwrap() < 1e-8);
    let res = serde_json::to_value(residual_report(&ym_residual(&conn).unwrap())).unwrap();
    assert_eq!(res[1]["direction"], "Y");
    assert!(res[1]["residual"].as_f64().unwrap() < 1e-6);
}
