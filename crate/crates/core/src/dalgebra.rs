//! The algebra `D^c_{μν}` of twisted functions on `ℝ × T × Z`.
//!
//! Fiber `p` of an element is stored on `x ∈ [0, 1)`; elsewhere it is
//! defined by `φ(x+k, y, p) = e(ckp(y − pν)) φ(x, y, p)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gauge::Direction;
use crate::linear_element;
use crate::numerics::{
    analyze, conj_flip, conv_acc, e, field_defect, series_at, Extender, Field, Layout, C, I, ONE,
    ZERO,
};
use crate::params::{DefectMetric, Setup};

#[derive(Debug, Clone)]
pub struct DElement {
    pub(crate) setup: Arc<Setup>,
    pub(crate) field: Field,
    pub(crate) budget: f64,
}

linear_element!(DElement);

impl DElement {
    pub(crate) fn with_field(&self, field: Field, budget: f64) -> Self {
        DElement {
            setup: self.setup.clone(),
            field,
            budget,
        }
    }

    pub(crate) fn from_parts(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        DElement {
            setup: setup.clone(),
            field,
            budget,
        }
    }

    pub fn zero(setup: &Arc<Setup>) -> Self {
        DElement {
            setup: setup.clone(),
            field: Field::zeros(setup.p_max(), setup.d_grid.n, setup.modes()),
            budget: 0.0,
        }
    }

    /// Stored coefficient of y-mode `n` at grid point `j` of fiber `p`.
    pub fn coeff(&self, p: i64, j: usize, n: i64) -> C {
        if p.abs() > self.field.fmax || n.abs() > self.setup.r {
            return ZERO;
        }
        self.field.at(p, j)[(n + self.setup.r) as usize]
    }

    /// Fibers holding nonzero data.
    pub fn support(&self) -> Vec<i64> {
        self.field.active_fibers()
    }
}

fn phase_vec(setup: &Setup, shift: f64) -> Vec<C> {
    let r = setup.r;
    (0..setup.modes() as i64).map(|i| e((i - r) as f64 * shift)).collect()
}

fn mul_rows(row: &mut [C], ph: &[C]) {
    for (z, p) in row.iter_mut().zip(ph) {
        *z *= p;
    }
}

/// The unit `φ(x, y, p) = δ_{p,0}`.
pub fn d_identity(setup: &Arc<Setup>) -> DElement {
    let mut out = DElement::zero(setup);
    let r = setup.r as usize;
    for j in 0..setup.d_grid.n {
        out.field.at_mut(0, j)[r] = ONE;
    }
    out
}

/// Samples `sampler` on the fundamental domain and reports how far it is
/// from satisfying the twist at `k = ±1`.
pub fn d_from_function(
    setup: &Arc<Setup>,
    sampler: impl Fn(f64, f64, i64) -> C,
) -> Result<(DElement, f64)> {
    let mut out = DElement::zero(setup);
    let m = setup.modes();
    let c = setup.params.c as f64;
    let nu = setup.params.nu;
    let mut twist: f64 = 0.0;
    let mut samples = vec![ZERO; m];
    for p in -setup.p_max()..=setup.p_max() {
        let pf = p as f64;
        for j in 0..setup.d_grid.n {
            let x = setup.d_grid.x(j);
            for (l, s) in samples.iter_mut().enumerate() {
                let y = l as f64 / m as f64;
                let v = sampler(x, y, p);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFiniteSample { x, y, fiber: p });
                }
                *s = v;
                for k in [-1.0, 1.0] {
                    let w = sampler(x + k, y, p);
                    let want = e(c * k * pf * (y - pf * nu)) * v;
                    twist = twist.max((w - want).norm());
                }
            }
            out.field.at_mut(p, j).copy_from_slice(&analyze(setup, &samples));
        }
    }
    Ok((out, twist))
}

/// Value at an arbitrary point; x is reduced to the fundamental domain by
/// the twist and interpolated.
pub fn d_eval(phi: &DElement, x: f64, y: f64, p: i64) -> C {
    if p.abs() > phi.field.fmax || phi.field.fiber_is_zero(p) {
        return ZERO;
    }
    let ext = Extender::new(&phi.setup, Layout::D, p, phi.field.fiber(p));
    let (modes, _) = ext.at_points(&[x]);
    series_at(&modes, phi.setup.r, y)
}

/// `(ΦΨ)(x,y,p) = Σ_q Φ(x,y,q) Ψ(x − 2qμ, y − 2qν, p − q)`
pub fn d_mul(a: &DElement, b: &DElement) -> Result<DElement> {
    a.check_same(b)?;
    let s = &a.setup;
    let pm = s.p_max();
    let n = s.d_grid.n;
    let nm = s.modes();
    let mu = s.params.mu;
    let nu = s.params.nu;
    let mut out = Field::zeros(pm, n, nm);
    let mut budget = a.budget + b.budget;
    let fb = b.field.active_fibers();
    let lost_pair = a.field.mode_sup() * b.field.mode_sup();
    for q in a.field.active_fibers() {
        let ph = phase_vec(s, -2.0 * q as f64 * nu);
        for &pb in &fb {
            let p = q + pb;
            if p.abs() > pm {
                budget += lost_pair;
                continue;
            }
            let ext = Extender::new(s, Layout::D, pb, b.field.fiber(pb));
            let mut blk = ext.shifted(-2.0 * q as f64 * mu, 0, n);
            budget += blk.dropped;
            let mut dropped: f64 = 0.0;
            for j in 0..n {
                let row = &mut blk.data[j * nm..(j + 1) * nm];
                mul_rows(row, &ph);
                dropped = dropped.max(conv_acc(out.at_mut(p, j), a.field.at(q, j), row, 0, ONE));
            }
            budget += dropped;
        }
    }
    Ok(a.with_field(out, budget))
}

/// `Φ*(x,y,p) = conj Φ(x − 2pμ, y − 2pν, −p)`
pub fn d_star(a: &DElement) -> DElement {
    let s = &a.setup;
    let n = s.d_grid.n;
    let nm = s.modes();
    let mut out = Field::zeros(a.field.fmax, n, nm);
    let mut budget = a.budget;
    for src in a.field.active_fibers() {
        let p = -src;
        let ph = phase_vec(s, -2.0 * p as f64 * s.params.nu);
        let ext = Extender::new(s, Layout::D, src, a.field.fiber(src));
        let mut blk = ext.shifted(-2.0 * p as f64 * s.params.mu, 0, n);
        budget += blk.dropped;
        for j in 0..n {
            let row = &mut blk.data[j * nm..(j + 1) * nm];
            mul_rows(row, &ph);
            conj_flip(row, out.at_mut(p, j));
        }
    }
    a.with_field(out, budget)
}

/// `τ_D(φ) = ∫_{T²} φ(x, y, 0)`
pub fn d_trace(a: &DElement) -> C {
    let r = a.setup.r as usize;
    let n = a.setup.d_grid.n;
    let sum: C = (0..n).map(|j| a.field.at(0, j)[r]).sum();
    sum / n as f64
}

/// The derivation `δ_dir` generated by the Heisenberg action.
pub fn delta(dir: Direction, a: &DElement) -> DElement {
    let s = &a.setup;
    let n = s.d_grid.n;
    let nm = s.modes();
    let r = s.r;
    let c = s.params.c as f64;
    let mu = s.params.mu;
    let mut out = Field::zeros(a.field.fmax, n, nm);
    for p in a.field.active_fibers() {
        let pf = p as f64;
        match dir {
            Direction::X => {
                let d = Extender::new(s, Layout::D, p, a.field.fiber(p)).derivative();
                for (o, v) in out.fiber_mut(p).iter_mut().zip(d) {
                    *o = -v;
                }
            }
            Direction::Y => {
                for j in 0..n {
                    let x = s.d_grid.x(j);
                    let mult = I * (TAU * c * pf * (x - pf * mu));
                    let src = a.field.at(p, j);
                    for (m, o) in out.at_mut(p, j).iter_mut().enumerate() {
                        let k = (m as i64 - r) as f64;
                        *o = src[m] * (mult - I * (TAU * k));
                    }
                }
            }
            Direction::Z => {
                let f = I * (TAU * pf);
                for (o, v) in out.fiber_mut(p).iter_mut().zip(a.field.fiber(p)) {
                    *o = v * f;
                }
            }
        }
    }
    a.with_field(out, a.budget)
}

/// An element `(r, s, t)` of the Heisenberg group with product
/// `(r,s,t)(r',s',t') = (r+r', s+s', t+t'+c·s·r')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisElement {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl HeisElement {
    pub const IDENTITY: HeisElement = HeisElement {
        r: 0.0,
        s: 0.0,
        t: 0.0,
    };

    pub fn new(r: f64, s: f64, t: f64) -> Self {
        HeisElement { r, s, t }
    }

    pub fn compose(self, o: HeisElement, c: i64) -> HeisElement {
        HeisElement {
            r: self.r + o.r,
            s: self.s + o.s,
            t: self.t + o.t + c as f64 * self.s * o.r,
        }
    }

    /// `exp(h·dir)` for a basis vector of the Lie algebra.
    pub fn exp(dir: Direction, h: f64) -> HeisElement {
        match dir {
            Direction::X => HeisElement::new(h, 0.0, 0.0),
            Direction::Y => HeisElement::new(0.0, h, 0.0),
            Direction::Z => HeisElement::new(0.0, 0.0, h),
        }
    }
}

/// `α_g φ(x,y,p) = e(p(t + cs(x − pμ − r))) φ(x − r, y − s, p)`
pub fn heis_act(g: HeisElement, a: &DElement) -> DElement {
    let s = &a.setup;
    let n = s.d_grid.n;
    let nm = s.modes();
    let c = s.params.c as f64;
    let mu = s.params.mu;
    let mut out = Field::zeros(a.field.fmax, n, nm);
    let mut budget = a.budget;
    let ph = phase_vec(s, -g.s);
    for p in a.field.active_fibers() {
        let pf = p as f64;
        let ext = Extender::new(s, Layout::D, p, a.field.fiber(p));
        let mut blk = ext.shifted(-g.r, 0, n);
        budget += blk.dropped;
        for j in 0..n {
            let x = s.d_grid.x(j);
            let scalar = e(pf * (g.t + c * g.s * (x - pf * mu - g.r)));
            let row = &mut blk.data[j * nm..(j + 1) * nm];
            for (o, (v, q)) in out.at_mut(p, j).iter_mut().zip(row.iter().zip(&ph)) {
                *o = v * q * scalar;
            }
        }
    }
    a.with_field(out, budget)
}

/// Defect between `δ_dir φ` and the central difference of the group action
/// along `exp(±h·dir)`.
pub fn delta_fd_check(dir: Direction, a: &DElement, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::OutOfRange(format!("finite-difference step {h} not in (0, 1e-2]")));
    }
    let plus = heis_act(HeisElement::exp(dir, h), a);
    let minus = heis_act(HeisElement::exp(dir, -h), a);
    let fd = plus.sub(&minus)?.scale(C::new(0.5 / h, 0.0));
    Ok(fd.defect(&delta(dir, a))?.value())
}

/// Re-evaluates the element off its fundamental domain and measures the
/// twist relation at `k = ±1` on every `stride`-th grid point.
pub fn d_twist_defect(a: &DElement, stride: usize) -> f64 {
    let s = &a.setup;
    let c = s.params.c as f64;
    let nu = s.params.nu;
    let m = s.modes();
    let mut worst: f64 = 0.0;
    for p in a.field.active_fibers() {
        let pf = p as f64;
        let ext = Extender::new(s, Layout::D, p, a.field.fiber(p));
        let xs: Vec<f64> = (0..s.d_grid.n).step_by(stride.max(1)).map(|j| s.d_grid.x(j) + 0.37 * s.d_grid.h).collect();
        let (base, _) = ext.at_points(&xs);
        for k in [-1.0, 1.0] {
            let shifted: Vec<f64> = xs.iter().map(|x| x + k).collect();
            let (vals, _) = ext.at_points(&shifted);
            for i in 0..xs.len() {
                for l in 0..m {
                    let y = l as f64 / m as f64;
                    let v0 = series_at(&base[i * m..(i + 1) * m], s.r, y);
                    let v1 = series_at(&vals[i * m..(i + 1) * m], s.r, y);
                    worst = worst.max((v1 - e(c * k * pf * (y - pf * nu)) * v0).norm());
                }
            }
        }
    }
    worst
}

/// Sup-norm defect between two elements, as a metric.
pub fn d_defect(a: &DElement, b: &DElement) -> Result<DefectMetric> {
    a.check_same(b)?;
    Ok(field_defect(&a.setup, &a.field, &b.field))
}
