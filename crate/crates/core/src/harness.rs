//! Verification suites, reports and the session that gates the E-action.
//!
//! Suites run in a fixed order (conventions, algebra, module, gauge,
//! minimize). The conventions suite measures the trace calibration; when any
//! of its rows fails, every later suite is skipped and the report says why.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dalgebra::{d_identity, d_mul, d_star, d_trace, delta, delta_fd_check};
use crate::ealgebra::{
    calibrate_trace, e_identity, e_mul, e_star, e_trace, e_trace_product, Calibration,
};
use crate::error::{Error, Result};
use crate::gauge::{
    apply_connection, constant_fit, curvature, gauge_transform, ym_residual, ym_value, Connection,
    Direction, Pair,
};
use crate::minimize::{descend, minimality_sweep, random_direction, DescentConfig, PerturbationBasis};
use crate::numerics::C;
use crate::params::{ConfigFile, Setup};
use crate::samples;
use crate::ximodule::{act_d, act_e, act_e_candidate, inner_d, inner_e};

/// Random pairs (or triples) for each convention oracle.
pub const CONVENTION_SAMPLES: usize = 20;
/// Samples per identity in the algebra and module suites.
const IDENTITY_SAMPLES: usize = 5;
/// `(f, g, φ)` samples per direction for Leibniz and compatibility.
const CONNECTION_SAMPLES: usize = 10;
const UNITARIES: usize = 3;
const UNITARY_AMPLITUDE: f64 = 0.5;
/// Sup-norm of the random perturbations used as non-trivial connections.
const PERTURBATION_SIZE: f64 = 0.2;
pub const SWEEP_SAMPLES: usize = 100;
pub const SWEEP_SCALES: [f64; 4] = [0.01, 0.1, 0.3, 1.0];
pub const DESCENT_STARTS: usize = 5;
/// Coefficient norm of each random descent start.
pub const DESCENT_START_SCALE: f64 = 0.3;
const GRADIENT_FD_STEP: f64 = 1e-4;

const TOL_CALIBRATION: f64 = 1e-6;
const TOL_KAPPA_REL: f64 = 1e-6;
const TOL_YM_EQUATION: f64 = 1e-6;
const TOL_GAP: f64 = 1e-8;
const TOL_GAP_AGREEMENT: f64 = 1e-7;
const TOL_GRADIENT: f64 = 1e-6;
const TOL_DESCENT: f64 = 1e-5;
const TOL_INVARIANCE: f64 = 1e-6;
const TOL_YM_REL: f64 = 1e-6;
/// Relative drift of the calibration constant under refinement.
const TOL_CALIBRATION_DRIFT: f64 = 1e-7;
/// Allowed deviation of the step-halving ratio from 4 for an O(h²) defect.
const TOL_ORDER_RATIO: f64 = 0.1;
const FLOW_STEP: f64 = 2e-3;

/// One verified identity. `pass` is `measured ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub anchor: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(check: &str, anchor: &str, measured: f64, tolerance: f64) -> Self {
        CheckRow {
            check: check.to_string(),
            anchor: anchor.to_string(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

/// Holds the outcome of the convention oracles for one configuration.
#[derive(Debug, Clone)]
pub struct Session {
    setup: Arc<Setup>,
    calibration: Option<Calibration>,
}

impl Session {
    pub fn new(setup: &Arc<Setup>) -> Self {
        Session {
            setup: setup.clone(),
            calibration: None,
        }
    }

    pub fn setup(&self) -> &Arc<Setup> {
        &self.setup
    }

    pub fn require_conventions(&self) -> Result<()> {
        if self.calibration.is_some() {
            Ok(())
        } else {
            Err(Error::ConventionUnvalidated)
        }
    }

    pub fn calibration(&self) -> Result<&Calibration> {
        self.calibration.as_ref().ok_or(Error::ConventionUnvalidated)
    }

    pub fn mark_validated_for_tests(&mut self, cal: Calibration) {
        self.calibration = Some(cal);
    }

    /// Runs the convention oracles. The session is validated only if every
    /// row passes; the rows are returned either way.
    pub fn validate_conventions(&mut self) -> Result<Vec<CheckRow>> {
        let s = self.setup.clone();
        let tol = s.trunc.tol_gauge;
        let mut rng = samples::rng(s.seed, 0xC0);
        let (mut herm_d, mut herm_e, mut imprim) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..CONVENTION_SAMPLES {
            let f = samples::random_vector(&s, &mut rng)?;
            let g = samples::random_vector(&s, &mut rng)?;
            let h = samples::random_vector(&s, &mut rng)?;
            herm_d = herm_d.max(d_star(&inner_d(&f, &g)?).defect(&inner_d(&g, &f)?)?.value());
            let fg = inner_e(&f, &g)?;
            herm_e = herm_e.max(e_star(&fg).defect(&inner_e(&g, &f)?)?.value());
            let lhs = act_e_candidate(&fg, &h)?;
            let rhs = act_d(&f, &inner_d(&g, &h)?)?;
            imprim = imprim.max(lhs.defect(&rhs)?.value());
        }
        let (cal, spread) = match calibrate_trace(&s, s.seed, CONVENTION_SAMPLES) {
            Ok(c) => (Some(c), c.spread),
            Err(Error::CalibrationInconsistent { spread, .. }) => (None, spread),
            Err(e) => return Err(e),
        };
        let rows = vec![
            CheckRow::new("inner_d.hermitian", "<f,g>_D* = <g,f>_D", herm_d, tol),
            CheckRow::new("inner_e.hermitian", "<f,g>_E* = <g,f>_E", herm_e, tol),
            CheckRow::new("imprimitivity", "<f,g>_E·h = f·<g,h>_D", imprim, tol),
            CheckRow::new(
                "trace.calibration_spread",
                "τ_E(<f,g>_E) = τ_D(<f,g>_D)",
                spread,
                TOL_CALIBRATION,
            ),
        ];
        self.calibration = match cal {
            Some(c) if rows.iter().all(|r| r.pass) => Some(c),
            _ => None,
        };
        Ok(rows)
    }
}

/// Named verification suites, in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Conventions,
    Algebra,
    Module,
    Gauge,
    Minimize,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Conventions,
        Suite::Algebra,
        Suite::Module,
        Suite::Gauge,
        Suite::Minimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Conventions => "conventions",
            Suite::Algebra => "algebra",
            Suite::Module => "module",
            Suite::Gauge => "gauge",
            Suite::Minimize => "minimize",
        }
    }

    /// Resolves a suite name; `all` selects every suite.
    pub fn parse(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .find(|s| s.name() == name)
            .map(|s| vec![*s])
            .ok_or_else(|| Error::UnknownSuite(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteResult {
    pub suite: String,
    pub rows: Vec<CheckRow>,
    /// Why the suite did not run, if it did not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl SuiteResult {
    pub fn pass(&self) -> bool {
        self.skipped.is_none() && self.rows.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub total_seconds: f64,
    pub suite_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub config_echo: ConfigFile,
    pub calibration_constant: Option<f64>,
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
    pub timing: Timing,
}

impl Report {
    pub fn rows(&self) -> impl Iterator<Item = &CheckRow> {
        self.suites.iter().flat_map(|s| s.rows.iter())
    }

    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.rows().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timing zeroed: identical across runs of the same
    /// configuration.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        r.to_json()
    }
}

/// Loads `config_path` and runs the named suite (or `all`).
pub fn run_suite(config_path: &Path, suite: &str) -> Result<Report> {
    let config = ConfigFile::load(config_path)?;
    run_suites(&config, &Suite::parse(suite)?)
}

/// Runs the conventions suite and then each requested suite in dependency
/// order. Later suites are skipped when the conventions fail.
pub fn run_suites(config: &ConfigFile, suites: &[Suite]) -> Result<Report> {
    let start = Instant::now();
    let setup = config.validate()?;
    let mut session = Session::new(&setup);
    let mut timing = Timing::default();
    let mut results = Vec::new();

    let t = Instant::now();
    let conv_rows = session.validate_conventions()?;
    timing
        .suite_seconds
        .insert("conventions".into(), t.elapsed().as_secs_f64());
    let failed: Vec<String> = conv_rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check.clone())
        .collect();
    results.push(SuiteResult {
        suite: "conventions".into(),
        rows: conv_rows,
        skipped: None,
    });

    let mut wanted = suites.to_vec();
    wanted.sort();
    wanted.dedup();
    for suite in wanted.into_iter().filter(|s| *s != Suite::Conventions) {
        if !failed.is_empty() {
            results.push(SuiteResult {
                suite: suite.name().into(),
                rows: Vec::new(),
                skipped: Some(format!("convention oracles failed: {}", failed.join(", "))),
            });
            continue;
        }
        let t = Instant::now();
        let rows = match suite {
            Suite::Conventions => unreachable!("run above"),
            Suite::Algebra => algebra_suite(&session)?,
            Suite::Module => module_suite(&session)?,
            Suite::Gauge => gauge_suite(&session)?,
            Suite::Minimize => minimize_suite(&session)?,
        };
        timing
            .suite_seconds
            .insert(suite.name().into(), t.elapsed().as_secs_f64());
        results.push(SuiteResult {
            suite: suite.name().into(),
            rows,
            skipped: None,
        });
    }
    timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(Report {
        config_echo: *config,
        calibration_constant: session.calibration().ok().map(|c| c.constant),
        pass: results.iter().all(SuiteResult::pass),
        suites: results,
        timing,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn algebra_suite(session: &Session) -> Result<Vec<CheckRow>> {
    let s = session.setup().clone();
    let cal = session.calibration()?;
    let tol = s.trunc.tol_algebra;
    let c = s.params.c as f64;
    let mut rng = samples::rng(s.seed, 0xA1);

    let (mut d_unit, mut d_assoc, mut d_inv, mut d_trace_prop) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut d_tr_delta, mut d_bracket) = (0.0f64, 0.0f64);
    let id = d_identity(&s);
    for _ in 0..IDENTITY_SAMPLES {
        let a = samples::random_d(&s, &mut rng);
        let b = samples::random_d(&s, &mut rng);
        let e = samples::random_d(&s, &mut rng);
        d_unit = d_unit
            .max(d_mul(&id, &a)?.defect(&a)?.value())
            .max(d_mul(&a, &id)?.defect(&a)?.value());
        let ab_e = d_mul(&d_mul(&a, &b)?, &e)?;
        d_assoc = d_assoc.max(ab_e.defect(&d_mul(&a, &d_mul(&b, &e)?)?)?.value());
        let ab = d_mul(&a, &b)?;
        d_inv = d_inv
            .max(d_star(&ab).defect(&d_mul(&d_star(&b), &d_star(&a))?)?.value())
            .max(d_star(&d_star(&a)).defect(&a)?.value());
        d_trace_prop = d_trace_prop.max((d_trace(&ab) - d_trace(&d_mul(&b, &a)?)).norm());
        for dir in Direction::ALL {
            d_tr_delta = d_tr_delta.max(d_trace(&delta(dir, &a)).norm());
        }
        let xy = delta(Direction::X, &delta(Direction::Y, &a));
        let yx = delta(Direction::Y, &delta(Direction::X, &a));
        let lhs = xy.sub(&yx)?.axpy(C::new(c, 0.0), &delta(Direction::Z, &a))?;
        d_bracket = d_bracket.max(lhs.sup_norm());
    }

    // δ against the central difference of the group action; halving the
    // step must divide the defect by 4
    let a = samples::random_d(&s, &mut rng);
    let mut order_dev = 0.0f64;
    for dir in Direction::ALL {
        let coarse = delta_fd_check(dir, &a, FLOW_STEP)?;
        let fine = delta_fd_check(dir, &a, FLOW_STEP / 2.0)?;
        order_dev = order_dev.max((coarse / fine / 4.0 - 1.0).abs());
    }

    let (mut e_unit, mut e_assoc, mut e_inv, mut e_trace_prop) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let eid = e_identity(&s);
    for _ in 0..IDENTITY_SAMPLES {
        let a = samples::random_e(&s, &mut rng);
        let b = samples::random_e(&s, &mut rng);
        let e = samples::random_e(&s, &mut rng);
        e_unit = e_unit
            .max(e_mul(&eid, &a)?.defect(&a)?.value())
            .max(e_mul(&a, &eid)?.defect(&a)?.value());
        let ab_e = e_mul(&e_mul(&a, &b)?, &e)?;
        e_assoc = e_assoc.max(ab_e.defect(&e_mul(&a, &e_mul(&b, &e)?)?)?.value());
        let ab = e_mul(&a, &b)?;
        e_inv = e_inv
            .max(e_star(&ab).defect(&e_mul(&e_star(&b), &e_star(&a))?)?.value())
            .max(e_star(&e_star(&a)).defect(&a)?.value());
        e_trace_prop = e_trace_prop
            .max((e_trace_product(&a, &b, cal)? - e_trace_product(&b, &a, cal)?).norm());
    }

    Ok(vec![
        CheckRow::new("d.unit", "1·φ = φ·1 = φ", d_unit, tol),
        CheckRow::new("d.associativity", "(φψ)χ = φ(ψχ)", d_assoc, tol),
        CheckRow::new("d.involution", "(φψ)* = ψ*φ*, φ** = φ", d_inv, tol),
        CheckRow::new("d.trace_property", "τ_D(φψ) = τ_D(ψφ)", d_trace_prop, tol),
        CheckRow::new("d.trace_of_derivation", "τ_D(δ_d φ) = 0", d_tr_delta, tol),
        CheckRow::new(
            "d.derivation_bracket",
            "[δ_X, δ_Y] + c·δ_Z = 0",
            d_bracket,
            s.trunc.tol_gauge,
        ),
        CheckRow::new(
            "d.derivation_vs_flow_order",
            "|δφ − (α_h φ − α_{−h} φ)/2h| = O(h²)",
            order_dev,
            TOL_ORDER_RATIO,
        ),
        CheckRow::new("e.unit", "1·ψ = ψ·1 = ψ", e_unit, tol),
        CheckRow::new("e.associativity", "(ψχ)ω = ψ(χω)", e_assoc, tol),
        CheckRow::new("e.involution", "(ψχ)* = χ*ψ*, ψ** = ψ", e_inv, tol),
        CheckRow::new("e.trace_property", "τ_E(ψχ) = τ_E(χψ)", e_trace_prop, tol),
    ])
}

fn module_suite(session: &Session) -> Result<Vec<CheckRow>> {
    let s = session.setup().clone();
    let tol = s.trunc.tol_gauge;
    let mut rng = samples::rng(s.seed, 0xB2);
    let (mut d_assoc, mut d_lin, mut l2, mut e_assoc, mut commute, mut unit) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let eid = e_identity(&s);
    for _ in 0..IDENTITY_SAMPLES {
        let f = samples::random_vector(&s, &mut rng)?;
        let g = samples::random_vector(&s, &mut rng)?;
        let a = samples::random_d(&s, &mut rng);
        let b = samples::random_d(&s, &mut rng);
        let psi = samples::random_e(&s, &mut rng);
        let chi = samples::random_e(&s, &mut rng);
        d_assoc = d_assoc.max(act_d(&act_d(&f, &a)?, &b)?.defect(&act_d(&f, &d_mul(&a, &b)?)?)?.value());
        d_lin = d_lin.max(inner_d(&f, &act_d(&g, &a)?)?.defect(&d_mul(&inner_d(&f, &g)?, &a)?)?.value());
        l2 = l2.max((d_trace(&inner_d(&f, &f)?).re - f.l2_norm_sq()).abs());
        let lhs = act_e(session, &e_mul(&psi, &chi)?, &f)?;
        e_assoc = e_assoc.max(lhs.defect(&act_e(session, &psi, &act_e(session, &chi, &f)?)?)?.value());
        let lhs = act_e(session, &psi, &act_d(&f, &a)?)?;
        commute = commute.max(lhs.defect(&act_d(&act_e(session, &psi, &f)?, &a)?)?.value());
        unit = unit.max(act_e(session, &eid, &f)?.defect(&f)?.value());
    }
    Ok(vec![
        CheckRow::new("act_d.associativity", "(f·φ)·ψ = f·(φψ)", d_assoc, tol),
        CheckRow::new("inner_d.right_linear", "<f, g·φ>_D = <f,g>_D φ", d_lin, tol),
        CheckRow::new("inner_d.trace_is_l2", "τ_D(<f,f>_D) = ∫|f|²", l2, s.trunc.tol_algebra),
        CheckRow::new("act_e.left_module", "(ψχ)·f = ψ·(χ·f)", e_assoc, tol),
        CheckRow::new("act_e.commutant", "ψ·(f·φ) = (ψ·f)·φ", commute, tol),
        CheckRow::new("act_e.unit", "1·f = f", unit, tol),
    ])
}

/// A random compatible connection `∇⁰ + ρ` with `|ρ_d| = size`.
pub fn random_connection(setup: &Arc<Setup>, rng: &mut rand_chacha::ChaCha8Rng, size: f64) -> Result<Connection> {
    let mut rho = Vec::with_capacity(3);
    for _ in Direction::ALL {
        let r = samples::random_skew_e(setup, rng);
        let n = r.sup_norm().max(1e-300);
        rho.push(r.scale(C::new(size / n, 0.0)));
    }
    Connection::new(rho.try_into().expect("three directions"))
}

/// Largest Leibniz and compatibility defects of `conn` over the samples.
fn connection_defects(
    session: &Session,
    conn: &Connection,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, f64)> {
    let s = session.setup().clone();
    let (mut leib, mut compat) = (0.0f64, 0.0f64);
    for _ in 0..CONNECTION_SAMPLES {
        let f = samples::random_vector(&s, rng)?;
        let g = samples::random_vector(&s, rng)?;
        let phi = samples::random_d(&s, rng);
        for dir in Direction::ALL {
            let lhs = apply_connection(session, conn, dir, &act_d(&f, &phi)?)?;
            let rhs = act_d(&apply_connection(session, conn, dir, &f)?, &phi)?
                .add(&act_d(&f, &delta(dir, &phi))?)?;
            leib = leib.max(lhs.defect(&rhs)?.value());
            let lhs = delta(dir, &inner_d(&f, &g)?);
            let rhs = inner_d(&apply_connection(session, conn, dir, &f)?, &g)?
                .add(&inner_d(&f, &apply_connection(session, conn, dir, &g)?)?)?;
            compat = compat.max(lhs.defect(&rhs)?.value());
        }
    }
    Ok((leib, compat))
}

fn gauge_suite(session: &Session) -> Result<Vec<CheckRow>> {
    let s = session.setup().clone();
    let cal = session.calibration()?;
    let mut rng = samples::rng(s.seed, 0x6A);
    let tol_a = s.trunc.tol_algebra;
    let tol_g = s.trunc.tol_gauge;
    let mut rows = Vec::new();

    let trivial = Connection::trivial(&s);
    let perturbed = random_connection(&s, &mut rng, PERTURBATION_SIZE)?;
    let (mut leib, mut compat) = connection_defects(session, &trivial, &mut rng)?;
    let (l, c) = connection_defects(session, &perturbed, &mut rng)?;
    leib = leib.max(l);
    compat = compat.max(c);
    rows.push(CheckRow::new(
        "connection.leibniz",
        "∇_d(f·φ) = ∇_d(f)·φ + f·δ_d(φ)",
        leib,
        tol_g,
    ));
    rows.push(CheckRow::new(
        "connection.compatibility",
        "δ_d<f,g>_D = <∇_d f, g>_D + <f, ∇_d g>_D",
        compat,
        tol_g,
    ));

    let theta = curvature(&trivial)?;
    let kappa_ref = PI / s.params.mu;
    for p in Pair::ALL {
        let fit = constant_fit(theta.get(p), cal)?;
        rows.push(CheckRow::new(
            &format!("curvature.{}.constant_fit", p.name()),
            "Θ_{∇⁰}(a,b) = κ(a,b)·I_E",
            fit.residual,
            tol_a,
        ));
        let (name, anchor, measured, tol) = match p {
            Pair::ZX => (
                "curvature.ZX.kappa",
                "|κ(Z,X)| = π/μ",
                rel(fit.kappa().norm(), kappa_ref),
                TOL_KAPPA_REL,
            ),
            _ => (
                if p == Pair::XY { "curvature.XY.kappa" } else { "curvature.YZ.kappa" },
                "κ = 0",
                fit.kappa().norm(),
                tol_a,
            ),
        };
        rows.push(CheckRow::new(name, anchor, measured, tol));
    }

    let res = ym_residual(&trivial)?;
    for d in Direction::ALL {
        rows.push(CheckRow::new(
            &format!("ym_equation.{}", d.name()),
            "(∇̂*Θ_{∇⁰})(d) = 0",
            res[d.index()],
            TOL_YM_EQUATION,
        ));
    }

    let mut unitaries = Vec::with_capacity(UNITARIES);
    for _ in 0..UNITARIES {
        unitaries.push(samples::random_unitary(&s, &mut rng, UNITARY_AMPLITUDE)?);
    }
    let mut gauged_res = 0.0f64;
    for u in &unitaries {
        let r = ym_residual(&gauge_transform(u, &trivial)?)?;
        gauged_res = gauged_res.max(r.iter().cloned().fold(0.0, f64::max));
    }
    rows.push(CheckRow::new(
        "ym_equation.gauge_transformed",
        "∇̂*Θ_{γ_u(∇⁰)} = 0",
        gauged_res,
        TOL_YM_EQUATION,
    ));

    let conns = [
        trivial.clone(),
        perturbed,
        random_connection(&s, &mut rng, PERTURBATION_SIZE)?,
    ];
    let mut invariance = 0.0f64;
    for conn in &conns {
        let ym = ym_value(conn, cal)?;
        for u in &unitaries {
            invariance = invariance.max((ym_value(&gauge_transform(u, conn)?, cal)? - ym).abs());
        }
    }
    rows.push(CheckRow::new(
        "ym.gauge_invariance",
        "YM(γ_u(∇)) = YM(∇)",
        invariance,
        TOL_INVARIANCE,
    ));

    let ym0 = ym_value(&trivial, cal)?;
    let expected = kappa_ref * kappa_ref * e_trace(&e_identity(&s), cal).re;
    rows.push(CheckRow::new(
        "ym.reference_value",
        "YM(∇⁰) = (π/μ)²·τ_E(I_E)",
        rel(ym0, expected),
        TOL_YM_REL,
    ));
    Ok(rows)
}

/// Outcome of the sampled minimality checks, kept for the CLI's CSV.
#[derive(Debug, Clone)]
pub struct MinimalityRun {
    pub ym0: f64,
    pub sweep: Vec<crate::minimize::SweepRow>,
    pub gradient_at_zero: f64,
    pub descents: Vec<crate::minimize::DescentResult>,
}

/// Sweep, gradient at the origin and multi-start descent for a validated
/// session.
pub fn minimality_run(
    session: &Session,
    sweep_samples: usize,
    starts: usize,
    descent: &DescentConfig,
) -> Result<MinimalityRun> {
    let s = session.setup().clone();
    let cal = session.calibration()?;
    let basis = PerturbationBasis::standard(&s, cal)?;
    let ym0 = ym_value(&Connection::trivial(&s), cal)?;
    let sweep = minimality_sweep(&basis, sweep_samples, &SWEEP_SCALES, s.seed, cal)?;
    let zero = vec![0.0; basis.coeff_len()];
    let grad = crate::minimize::ym_gradient(&basis, &zero, GRADIENT_FD_STEP, cal)?;
    let gradient_at_zero = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut rng = samples::rng(descent.seed, 0xDE5);
    let mut descents = Vec::with_capacity(starts);
    for _ in 0..starts {
        let init: Vec<f64> = random_direction(basis.coeff_len(), &mut rng)
            .into_iter()
            .map(|v| v * DESCENT_START_SCALE)
            .collect();
        descents.push(descend(&basis, descent, &init, cal)?);
    }
    Ok(MinimalityRun {
        ym0,
        sweep,
        gradient_at_zero,
        descents,
    })
}

impl MinimalityRun {
    pub fn rows(&self) -> Vec<CheckRow> {
        let worst_gap = self.sweep.iter().fold(f64::NEG_INFINITY, |m, r| m.max(-r.gap));
        let agreement = self.sweep.iter().fold(0.0f64, |m, r| m.max(r.agreement()));
        let descent = self
            .descents
            .iter()
            .fold(0.0f64, |m, d| m.max((d.final_ym - self.ym0).abs()));
        vec![
            CheckRow::new(
                "minimality.gap_nonnegative",
                "YM(∇⁰+ρ) − YM(∇⁰) ≥ 0 (largest negative gap)",
                worst_gap,
                TOL_GAP,
            ),
            CheckRow::new(
                "minimality.gap_is_omega_energy",
                "YM(∇⁰+ρ) − YM(∇⁰) = τ_E(Σ Ω*Ω)",
                agreement,
                TOL_GAP_AGREEMENT,
            ),
            CheckRow::new(
                "minimality.gradient_at_zero",
                "∂YM/∂ρ = 0 at ρ = 0 (central differences)",
                self.gradient_at_zero,
                TOL_GRADIENT,
            ),
            CheckRow::new(
                "minimality.descent",
                "min YM over ρ = YM(∇⁰) (multi-start descent)",
                descent,
                TOL_DESCENT,
            ),
        ]
    }
}

fn minimize_suite(session: &Session) -> Result<Vec<CheckRow>> {
    let config = DescentConfig {
        seed: session.setup().seed,
        ..DescentConfig::default()
    };
    Ok(minimality_run(session, SWEEP_SAMPLES, DESCENT_STARTS, &config)?.rows())
}

/// Checks that `convergence_study` knows.
pub const CONVERGENCE_CHECKS: [&str; 4] = ["kappa_zx", "constant_fit_zx", "ym_reference", "calibration"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceRow {
    pub x_step: f64,
    pub value: f64,
    /// Relative change from the previous (coarser) row.
    pub rel_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceTable {
    pub check: String,
    pub rows: Vec<ConvergenceRow>,
    /// `log2` of successive difference ratios, when both differences sit
    /// above round-off.
    pub observed_order: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Re-runs one check at `xStep`, `xStep/2`, `xStep/4`.
pub fn convergence_study(config_path: &Path, check: &str) -> Result<ConvergenceTable> {
    let config = ConfigFile::load(config_path)?;
    convergence_study_with(&config, check, &[1, 2, 4])
}

/// Same as [`convergence_study`] on an in-memory configuration with the
/// given refinement factors.
pub fn convergence_study_with(config: &ConfigFile, check: &str, factors: &[u32]) -> Result<ConvergenceTable> {
    if !CONVERGENCE_CHECKS.contains(&check) {
        return Err(Error::UnknownCheck(check.to_string()));
    }
    let base = config.validate()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &f in factors {
        let s = base.refined(f)?;
        let cal = calibrate_trace(&s, s.seed, CONVENTION_SAMPLES)?;
        let value = measure(&s, check, &cal)?;
        let rel_change = rows.last().map(|r| rel(value, r.value));
        rows.push(ConvergenceRow {
            x_step: s.trunc.x_step,
            value,
            rel_change,
        });
    }
    let observed_order = if rows.len() >= 3 {
        let d1 = (rows[1].value - rows[0].value).abs();
        let d2 = (rows[2].value - rows[1].value).abs();
        let floor = 1e-13 * rows[0].value.abs().max(1e-3);
        (d1 > floor && d2 > floor).then(|| (d1 / d2).log2())
    } else {
        None
    };
    // residuals are judged against the algebra tolerance, values by their
    // relative drift
    let (tolerance, pass) = if check == "constant_fit_zx" {
        let t = config.tol_algebra;
        (t, rows.iter().all(|r| r.value <= t))
    } else {
        let t = if check == "calibration" { TOL_CALIBRATION_DRIFT } else { TOL_YM_REL };
        (t, rows.iter().all(|r| r.rel_change.is_none_or(|c| c < t)))
    };
    Ok(ConvergenceTable {
        check: check.to_string(),
        rows,
        observed_order,
        tolerance,
        pass,
    })
}

fn measure(s: &Arc<Setup>, check: &str, cal: &Calibration) -> Result<f64> {
    let trivial = Connection::trivial(s);
    Ok(match check {
        "kappa_zx" => constant_fit(curvature(&trivial)?.get(Pair::ZX), cal)?.kappa().norm(),
        "constant_fit_zx" => constant_fit(curvature(&trivial)?.get(Pair::ZX), cal)?.residual,
        "ym_reference" => ym_value(&trivial, cal)?,
        "calibration" => cal.constant,
        other => return Err(Error::UnknownCheck(other.to_string())),
    })
}
