mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use qhm_core::ealgebra::{e_star, e_trace_product};
use qhm_core::gauge::{ym_value, Connection};
use qhm_core::minimize::*;
use qhm_core::samples;
use qhm_core::{Direction, Error};

fn basis() -> &'static PerturbationBasis {
    static BASIS: OnceLock<PerturbationBasis> = OnceLock::new();
    BASIS.get_or_init(|| PerturbationBasis::standard(&common::setup(), &common::calibration()).unwrap())
}

fn ym0() -> f64 {
    ym_value(&Connection::trivial(&common::setup()), &common::calibration()).unwrap()
}

fn ym_at(coeffs: &[f64]) -> f64 {
    ym_value(&rho_from_coeffs(basis(), coeffs).unwrap(), &common::calibration()).unwrap()
}

#[test]
fn basis_is_skew_and_orthonormal() {
    let b = basis();
    let cal = common::calibration();
    assert_eq!(b.dim(), 45);
    assert_eq!(b.coeff_len(), 135);
    assert!(b.condition.is_finite() && b.condition >= 1.0);
    for (i, a) in b.elements.iter().enumerate().step_by(7) {
        assert!(a.skew_defect() < 1e-8);
        for (j, c) in b.elements.iter().enumerate().step_by(5) {
            let g = e_trace_product(&e_star(a), c, &cal).unwrap().re;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-8, "({i},{j}) {g}");
        }
    }
}

#[test]
fn coefficients_map_onto_directions() {
    let b = basis();
    let zero = rho_from_coeffs(b, &vec![0.0; b.coeff_len()]).unwrap();
    assert!(Direction::ALL.iter().all(|d| zero.rho(*d).is_zero()));
    let mut e1 = vec![0.0; b.coeff_len()];
    e1[0] = 1.0;
    let conn = rho_from_coeffs(b, &e1).unwrap();
    assert!(conn.rho(Direction::X).defect(&b.elements[0]).unwrap().value() == 0.0);
    assert!(conn.rho(Direction::Y).is_zero() && conn.rho(Direction::Z).is_zero());
    assert!(matches!(
        rho_from_coeffs(b, &[1.0, 2.0]),
        Err(Error::DimensionMismatch { expected: 135, got: 2 })
    ));
    let mut bad = vec![0.0; b.coeff_len()];
    bad[3] = f64::NAN;
    assert!(rho_from_coeffs(b, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn real_combinations_stay_skew(seed in any::<u64>(), scale in 0.01f64..2.0) {
        let b = basis();
        let v = random_direction(b.coeff_len(), &mut samples::rng(seed, 1));
        let c: Vec<f64> = v.iter().map(|a| a * scale).collect();
        let conn = rho_from_coeffs(b, &c).unwrap();
        for d in Direction::ALL {
            prop_assert!(conn.rho(d).skew_defect() < 1e-8);
        }
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let b = basis();
    let cal = common::calibration();
    let v = random_direction(b.coeff_len(), &mut samples::rng(3, 2));
    let x: Vec<f64> = v.iter().map(|a| a * 0.3).collect();
    let (ym, g) = ym_with_gradient(b, &x, &cal).unwrap();
    assert!((ym - ym_at(&x)).abs() < 1e-12);
    let fd = ym_gradient(b, &x, 1e-4, &cal).unwrap();
    let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-7, "{err:e}");
}

#[test]
fn central_differences_are_stable_across_steps() {
    // YM is quartic in the coefficients, so truncation at any admissible
    // step sits below the quadrature noise; only stability is testable.
    let b = basis();
    let cal = common::calibration();
    let v = random_direction(b.coeff_len(), &mut samples::rng(4, 2));
    let x: Vec<f64> = v.iter().map(|a| a * 0.5).collect();
    let g = |h: f64| ym_gradient(b, &x, h, &cal).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(dist(&g(1e-2), &g(1e-4)) < 1e-8);
    assert!(matches!(ym_gradient(b, &x, 0.5, &cal), Err(Error::OutOfRange(_))));
    assert!(ym_gradient(b, &x, 0.0, &cal).is_err());
}

#[test]
fn gradient_vanishes_at_the_reference_connection() {
    let b = basis();
    let g = ym_gradient(b, &vec![0.0; b.coeff_len()], 1e-4, &common::calibration()).unwrap();
    let n = g.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    assert!(n < 1e-6, "{n:e}");
}

#[test]
fn gap_is_quadratic_at_leading_order() {
    let b = basis();
    let y0 = ym0();
    let mut e = vec![0.0; b.coeff_len()];
    e[b.dim() + 4] = 1.0;
    let a = |t: f64| {
        let c: Vec<f64> = e.iter().map(|v| v * t).collect();
        (ym_at(&c) - y0) / (t * t)
    };
    let (a1, a2) = (a(0.02), a(0.01));
    // Richardson: the remainder is O(t²) in a(t)
    let rich = (4.0 * a2 - a1) / 3.0;
    assert!(rich >= 0.0);
    assert!((a2 - rich).abs() < 1e-3 * rich.max(1.0), "{a1} {a2} {rich}");
}

#[test]
fn descent_from_the_origin_stops_immediately() {
    let b = basis();
    let cfg = DescentConfig::default();
    let res = descend(b, &cfg, &vec![0.0; b.coeff_len()], &common::calibration()).unwrap();
    assert_eq!(res.status, DescentStatus::GradTol);
    assert_eq!(res.iterations, 0);
    assert!((res.final_ym - ym0()).abs() < 1e-12);
}

#[test]
fn descent_history_is_monotone() {
    let b = basis();
    let cfg = DescentConfig {
        max_iter: 40,
        ..DescentConfig::default()
    };
    let v = random_direction(b.coeff_len(), &mut samples::rng(7, 3));
    let init: Vec<f64> = v.iter().map(|a| a * 0.3).collect();
    let res = descend(b, &cfg, &init, &common::calibration()).unwrap();
    assert_eq!(res.status, DescentStatus::MaxIter);
    assert_eq!(res.history.len(), res.iterations + 1);
    assert!(res.history.windows(2).all(|w| w[1] < w[0]));
    assert!(res.final_ym >= ym0() - 1e-8);
    assert!(res.final_ym < res.history[0]);
    assert!(DescentConfig { step: -1.0, ..cfg }.validate().is_err());
    assert!(DescentConfig { cauchy_steps: 1, ..cfg }.validate().is_err());
}

#[test]
fn sweep_gaps_are_nonnegative_quadratic_and_deterministic() {
    let b = basis();
    let cal = common::calibration();
    let scales = [0.01, 0.02, 0.04, 0.08];
    let rows = minimality_sweep(b, 16, &scales, 11, &cal).unwrap();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert!(r.gap >= -1e-8 && r.omega_energy >= -1e-8);
        assert!(r.agreement() < 1e-7, "{r:?}");
    }
    let slopes = gap_slopes(&rows, 0.1);
    assert_eq!(slopes.len(), 4);
    for s in slopes {
        assert!((s - 2.0).abs() < 0.1, "slope {s}");
    }
    let again = minimality_sweep(b, 16, &scales, 11, &cal).unwrap();
    assert_eq!(serde_json::to_string(&rows).unwrap(), serde_json::to_string(&again).unwrap());
    assert!(minimality_sweep(b, 4, &[0.0], 1, &cal).is_err());
}
