//! Connections `∇ = ∇⁰ + ρ` on `Ξ`, their curvature, the Yang–Mills
//! functional and equation, and gauge transformations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ealgebra::{
    e_commutator, e_delta, e_identity, e_mul, e_star, e_trace, e_trace_product, Calibration,
    EElement,
};
use crate::error::{Error, Result};
use crate::harness::Session;
use crate::numerics::{Extender, Field, Layout, C, I, ZERO};
use crate::params::Setup;
use crate::ximodule::{act_e, XiElement};

/// Basis `X, Y, Z` of the Heisenberg Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
    Z,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::X, Direction::Y, Direction::Z];

    pub fn index(self) -> usize {
        match self {
            Direction::X => 0,
            Direction::Y => 1,
            Direction::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::X => "X",
            Direction::Y => "Y",
            Direction::Z => "Z",
        }
    }

    /// `[a, b]` as a multiple of a basis vector: `[X, Y] = −cZ`, all other
    /// brackets of distinct basis vectors vanish.
    pub fn bracket(a: Direction, b: Direction, c: i64) -> Option<(i64, Direction)> {
        match (a, b) {
            (Direction::X, Direction::Y) => Some((-c, Direction::Z)),
            (Direction::Y, Direction::X) => Some((c, Direction::Z)),
            _ => None,
        }
    }

    /// `c^i_{jk}` with indices 0, 1, 2 for X, Y, Z. Only `c³₁₂ = −c` and its
    /// antisymmetric partner are nonzero.
    pub fn structure_constant(i: usize, j: usize, k: usize, c: i64) -> i64 {
        match (i, j, k) {
            (2, 0, 1) => -c,
            (2, 1, 0) => c,
            _ => 0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Oriented pairs on which a 2-form is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    XY,
    YZ,
    ZX,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::XY, Pair::YZ, Pair::ZX];

    pub fn dirs(self) -> (Direction, Direction) {
        match self {
            Pair::XY => (Direction::X, Direction::Y),
            Pair::YZ => (Direction::Y, Direction::Z),
            Pair::ZX => (Direction::Z, Direction::X),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Pair::XY => 0,
            Pair::YZ => 1,
            Pair::ZX => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pair::XY => "XY",
            Pair::YZ => "YZ",
            Pair::ZX => "ZX",
        }
    }
}

/// `∇ = ∇⁰ + ρ` with skew-adjoint `ρ` per direction.
#[derive(Debug, Clone)]
pub struct Connection {
    rho: [EElement; 3],
}

/// Skew-adjointness is accepted up to this grid defect.
pub const SKEW_TOL: f64 = 1e-8;

impl Connection {
    pub fn trivial(setup: &Arc<Setup>) -> Self {
        let z = EElement::zero(setup);
        Connection {
            rho: [z.clone(), z.clone(), z],
        }
    }

    /// Validates each `ρ_d` against `ρ* = −ρ`.
    pub fn new(rho: [EElement; 3]) -> Result<Self> {
        for d in Direction::ALL {
            if !rho[d.index()].setup().same_as(rho[0].setup()) {
                return Err(Error::ConfigMismatch);
            }
            let defect = rho[d.index()].skew_defect();
            if !(defect < SKEW_TOL) {
                return Err(Error::NotSkewAdjoint {
                    direction: d.name(),
                    defect,
                });
            }
        }
        Ok(Connection { rho })
    }

    pub fn rho(&self, d: Direction) -> &EElement {
        &self.rho[d.index()]
    }

    pub fn setup(&self) -> &Arc<Setup> {
        self.rho[0].setup()
    }

    pub fn is_trivial(&self) -> bool {
        self.rho.iter().all(|r| r.is_zero())
    }
}

/// Values of a 2-form on `(X,Y)`, `(Y,Z)`, `(Z,X)`.
#[derive(Debug, Clone)]
pub struct CurvatureForm {
    pub values: [EElement; 3],
}

impl CurvatureForm {
    pub fn get(&self, p: Pair) -> &EElement {
        &self.values[p.index()]
    }

    /// `Θ(a, b)` with orientation, `None` on the diagonal.
    pub fn oriented(&self, a: Direction, b: Direction) -> Option<(f64, &EElement)> {
        use Direction::*;
        match (a, b) {
            (X, Y) => Some((1.0, self.get(Pair::XY))),
            (Y, X) => Some((-1.0, self.get(Pair::XY))),
            (Y, Z) => Some((1.0, self.get(Pair::YZ))),
            (Z, Y) => Some((-1.0, self.get(Pair::YZ))),
            (Z, X) => Some((1.0, self.get(Pair::ZX))),
            (X, Z) => Some((-1.0, self.get(Pair::ZX))),
            _ => None,
        }
    }
}

/// `∇⁰_X f = −∂f/∂x`, `∇⁰_Y f = −∂f/∂y + (πci/2μ)x²f`, `∇⁰_Z f = (πix/μ)f`.
pub fn nabla0(dir: Direction, f: &XiElement) -> XiElement {
    let s = f.setup();
    let nm = s.modes();
    let r = s.r;
    let points = s.xi_grid.points();
    let c = s.params.c as f64;
    let mu = s.params.mu;
    let mut out = Field::zeros(0, points, nm);
    match dir {
        Direction::X => {
            let d = Extender::new(s, Layout::Window, 0, &f.field().data).derivative();
            for (o, v) in out.data.iter_mut().zip(d) {
                *o = -v;
            }
        }
        Direction::Y => {
            for i in 0..points {
                let x = s.xi_grid.x(i);
                let mult = I * (PI * c / (2.0 * mu) * x * x);
                let src = f.field().at(0, i);
                for (m, o) in out.at_mut(0, i).iter_mut().enumerate() {
                    let n = (m as i64 - r) as f64;
                    *o = src[m] * (mult - I * (2.0 * PI * n));
                }
            }
        }
        Direction::Z => {
            for i in 0..points {
                let mult = I * (PI * s.xi_grid.x(i) / mu);
                let src = f.field().at(0, i);
                for (o, v) in out.at_mut(0, i).iter_mut().zip(src) {
                    *o = v * mult;
                }
            }
        }
    }
    f.with_field(out, f.truncation_budget())
}

/// `∇_dir f = ∇⁰_dir f + ρ_dir·f`
pub fn apply_connection(
    session: &Session,
    conn: &Connection,
    dir: Direction,
    f: &XiElement,
) -> Result<XiElement> {
    let base = nabla0(dir, f);
    let rho = conn.rho(dir);
    if rho.is_zero() {
        session.require_conventions()?;
        return Ok(base);
    }
    base.add(&act_e(session, rho, f)?)
}

/// Closed-form curvature of `∇⁰`: `Θ(X,Y) = Θ(Y,Z) = 0`, `Θ(Z,X) = (πi/μ)I_E`.
pub fn theta0(setup: &Arc<Setup>) -> CurvatureForm {
    let z = EElement::zero(setup);
    let zx = e_identity(setup).scale(I * (PI / setup.params.mu));
    CurvatureForm {
        values: [z.clone(), z, zx],
    }
}

/// The constant `κ(Z,X)` of `∇⁰`.
pub fn kappa0_zx(setup: &Setup) -> C {
    I * (PI / setup.params.mu)
}

/// `Ω(a,b) = δ̂_a ρ_b − δ̂_b ρ_a − ρ_{[a,b]} + [ρ_a, ρ_b]`
pub fn omega(conn: &Connection) -> Result<CurvatureForm> {
    let c = conn.setup().params.c;
    let mut values = Vec::with_capacity(3);
    for pair in Pair::ALL {
        let (a, b) = pair.dirs();
        let ra = conn.rho(a);
        let rb = conn.rho(b);
        let mut v = e_delta(a, rb).sub(&e_delta(b, ra))?;
        if let Some((coef, d)) = Direction::bracket(a, b, c) {
            v = v.axpy(C::new(-coef as f64, 0.0), conn.rho(d))?;
        }
        if !ra.is_zero() && !rb.is_zero() {
            v = v.add(&e_commutator(ra, rb)?)?;
        }
        values.push(v);
    }
    Ok(CurvatureForm {
        values: values.try_into().expect("three pairs"),
    })
}

/// `Θ_∇ = Θ_{∇⁰} + Ω(ρ)`
pub fn curvature(conn: &Connection) -> Result<CurvatureForm> {
    let base = theta0(conn.setup());
    let om = omega(conn)?;
    let mut values = Vec::with_capacity(3);
    for p in Pair::ALL {
        values.push(base.get(p).add(om.get(p))?);
    }
    Ok(CurvatureForm {
        values: values.try_into().expect("three pairs"),
    })
}

/// `Θ(a,b)f = ∇_a∇_b f − ∇_b∇_a f − ∇_{[a,b]} f`, applied literally.
pub fn curvature_operator(
    session: &Session,
    conn: &Connection,
    pair: Pair,
    f: &XiElement,
) -> Result<XiElement> {
    let (a, b) = pair.dirs();
    let ab = apply_connection(session, conn, a, &apply_connection(session, conn, b, f)?)?;
    let ba = apply_connection(session, conn, b, &apply_connection(session, conn, a, f)?)?;
    let mut out = ab.sub(&ba)?;
    if let Some((coef, d)) = Direction::bracket(a, b, conn.setup().params.c) {
        out = out.axpy(C::new(-coef as f64, 0.0), &apply_connection(session, conn, d, f)?)?;
    }
    Ok(out)
}

/// Result of fitting `Θv ≈ κ·I_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub kappa_re: f64,
    pub kappa_im: f64,
    pub residual: f64,
}

impl ConstantFit {
    pub fn kappa(&self) -> C {
        C::new(self.kappa_re, self.kappa_im)
    }
}

/// `κ = τ_E(Θv)/τ_E(I_E)`, residual `|Θv − κ I_E|`.
pub fn constant_fit(theta: &EElement, cal: &Calibration) -> Result<ConstantFit> {
    let id = e_identity(theta.setup());
    let kappa = e_trace(theta, cal) / e_trace(&id, cal);
    let residual = theta.defect(&id.scale(kappa))?.value();
    Ok(ConstantFit {
        kappa_re: kappa.re,
        kappa_im: kappa.im,
        residual,
    })
}

/// `[∇_d, T] = δ̂_d(T) + [ρ_d, T]`
pub fn covariant_commutator(conn: &Connection, d: Direction, t: &EElement) -> Result<EElement> {
    let base = e_delta(d, t);
    let rho = conn.rho(d);
    if rho.is_zero() || t.is_zero() {
        return Ok(base);
    }
    base.add(&e_commutator(rho, t)?)
}

/// `(∇̂*Θ)(Z_i) = Σ_j [∇_{Z_j}, Θ(Z_i∧Z_j)] − Σ_{j<k} c^i_{jk} Θ(Z_j∧Z_k)`
/// for each `i`, as elements.
pub fn ym_operator(conn: &Connection, theta: &CurvatureForm) -> Result<[EElement; 3]> {
    let c = conn.setup().params.c;
    let mut out = Vec::with_capacity(3);
    for di in Direction::ALL {
        let mut acc = EElement::zero(conn.setup());
        for dj in Direction::ALL {
            if let Some((sign, t)) = theta.oriented(di, dj) {
                let term = covariant_commutator(conn, dj, t)?;
                acc = acc.axpy(C::new(sign, 0.0), &term)?;
            }
        }
        for j in 0..3 {
            for k in (j + 1)..3 {
                let sc = Direction::structure_constant(di.index(), j, k, c);
                if sc != 0 {
                    let (sign, t) = theta
                        .oriented(Direction::ALL[j], Direction::ALL[k])
                        .expect("distinct directions");
                    acc = acc.axpy(C::new(-(sc as f64) * sign, 0.0), t)?;
                }
            }
        }
        out.push(acc);
    }
    Ok(out.try_into().expect("three directions"))
}

/// Grid sup-norms of the three components of `∇̂*Θ_∇`.
pub fn ym_residual(conn: &Connection) -> Result<[f64; 3]> {
    let theta = curvature(conn)?;
    let ops = ym_operator(conn, &theta)?;
    Ok([ops[0].sup_norm(), ops[1].sup_norm(), ops[2].sup_norm()])
}

/// `YM(∇) = −τ_E(Σ_{i<j} Θ(Z_i,Z_j)²)`. The imaginary part is checked to be
/// negligible and dropped.
pub fn ym_value(conn: &Connection, cal: &Calibration) -> Result<f64> {
    let theta = curvature(conn)?;
    ym_from_curvature(&theta, cal)
}

pub fn ym_from_curvature(theta: &CurvatureForm, cal: &Calibration) -> Result<f64> {
    let mut acc = ZERO;
    for p in Pair::ALL {
        let t = theta.get(p);
        if t.is_zero() {
            continue;
        }
        acc += e_trace_product(t, t, cal)?;
    }
    let ym = -acc;
    let scale = ym.re.abs().max(1.0);
    debug_assert!(ym.im.abs() < 1e-9 * scale, "YM has imaginary part {}", ym.im);
    Ok(ym.re)
}

/// `τ_E(Σ_{i<j} Ω*(Z_i,Z_j) Ω(Z_i,Z_j))`, the predicted gap `YM(∇) − YM(∇⁰)`.
pub fn omega_energy(conn: &Connection, cal: &Calibration) -> Result<f64> {
    let om = omega(conn)?;
    let mut acc = ZERO;
    for p in Pair::ALL {
        let w = om.get(p);
        if w.is_zero() {
            continue;
        }
        acc += e_trace_product(&e_star(w), w, cal)?;
    }
    Ok(acc.re)
}

/// `γ_u(∇)`: `ρ'_d = u·δ̂_d(u*) + u·ρ_d·u*`, the closed form of
/// `u ∇_d(u* ·) − ∇⁰_d`.
pub fn gauge_transform(u: &EElement, conn: &Connection) -> Result<Connection> {
    let setup = u.setup();
    let us = e_star(u);
    let defect = e_mul(u, &us)?.defect(&e_identity(setup))?.value();
    if !(defect < 1e-8) {
        return Err(Error::NotUnitary { defect });
    }
    let mut rho = Vec::with_capacity(3);
    for d in Direction::ALL {
        let mut r = e_mul(u, &e_delta(d, &us))?;
        let old = conn.rho(d);
        if !old.is_zero() {
            r = r.add(&e_mul(&e_mul(u, old)?, &us)?)?;
        }
        rho.push(r);
    }
    Connection::new(rho.try_into().expect("three directions"))
}

/// Per-pair report row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: String,
    pub kappa_re: f64,
    pub kappa_im: f64,
    pub residual: f64,
}

/// Per-direction report row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionReport {
    pub direction: String,
    pub residual: f64,
}

pub fn curvature_report(theta: &CurvatureForm, cal: &Calibration) -> Result<Vec<PairReport>> {
    Pair::ALL
        .iter()
        .map(|&p| {
            let fit = constant_fit(theta.get(p), cal)?;
            Ok(PairReport {
                pair: p.name().to_string(),
                kappa_re: fit.kappa_re,
                kappa_im: fit.kappa_im,
                residual: fit.residual,
            })
        })
        .collect()
}

pub fn residual_report(res: &[f64; 3]) -> Vec<DirectionReport> {
    Direction::ALL
        .iter()
        .map(|d| DirectionReport {
            direction: d.name().to_string(),
            residual: res[d.index()],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_table_is_antisymmetric_and_matches_structure_constants() {
        let c = 2;
        for a in Direction::ALL {
            for b in Direction::ALL {
                let ab = Direction::bracket(a, b, c);
                let ba = Direction::bracket(b, a, c);
                match (ab, ba) {
                    (None, None) => {}
                    (Some((x, d1)), Some((y, d2))) => {
                        assert_eq!(d1, d2);
                        assert_eq!(x, -y);
                        assert_eq!(Direction::structure_constant(d1.index(), a.index(), b.index(), c), x);
                    }
                    _ => panic!("bracket table not antisymmetric at {a}{b}"),
                }
            }
        }
        assert_eq!(Direction::structure_constant(2, 0, 1, 1), -1);
    }
}
