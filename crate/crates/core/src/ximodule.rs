//! The bimodule `Ξ` of rapidly decaying functions on `ℝ × T`, stored on the
//! window `[-L, L]` and zero outside it.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::dalgebra::DElement;
use crate::ealgebra::EElement;
use crate::error::{Error, Result};
use crate::harness::Session;
use crate::linear_element;
use crate::numerics::{analyze, conj_flip, conv_acc, e, series_at, Extender, Field, Layout, C, ONE, ZERO};
use crate::params::Setup;

#[derive(Debug, Clone)]
pub struct XiElement {
    pub(crate) setup: Arc<Setup>,
    pub(crate) field: Field,
    pub(crate) budget: f64,
    declared_tail: f64,
}

linear_element!(XiElement);

impl XiElement {
    pub(crate) fn with_field(&self, field: Field, budget: f64) -> Self {
        let declared_tail = edge_mass(&self.setup, &field);
        XiElement {
            setup: self.setup.clone(),
            field,
            budget,
            declared_tail,
        }
    }

    pub(crate) fn from_field(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        let declared_tail = edge_mass(setup, &field);
        XiElement {
            setup: setup.clone(),
            field,
            budget,
            declared_tail,
        }
    }

    pub fn zero(setup: &Arc<Setup>) -> Self {
        XiElement {
            setup: setup.clone(),
            field: Field::zeros(0, setup.xi_grid.points(), setup.modes()),
            budget: 0.0,
            declared_tail: 0.0,
        }
    }

    /// Bound on the magnitude of the function at and beyond the window edge.
    pub fn declared_tail(&self) -> f64 {
        self.declared_tail
    }

    /// Stored coefficient of y-mode `n` at window point `i`.
    pub fn coeff(&self, i: usize, n: i64) -> C {
        if n.abs() > self.setup.r {
            return ZERO;
        }
        self.field.at(0, i)[(n + self.setup.r) as usize]
    }

    pub(crate) fn row(&self, i: usize) -> &[C] {
        self.field.at(0, i)
    }

    /// Window indices outside of which every value is below `1e-20` of the
    /// peak; products against this element ignore the rest.
    pub(crate) fn active_range(&self) -> Option<(usize, usize)> {
        let mass: Vec<f64> = self
            .field
            .data
            .chunks(self.field.nm)
            .map(|v| v.iter().map(|z| z.norm()).sum())
            .collect();
        let peak = mass.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return None;
        }
        let cut = peak * 1e-20;
        let lo = mass.iter().position(|&m| m > cut)?;
        let hi = mass.iter().rposition(|&m| m > cut)?;
        Some((lo, hi))
    }

    /// `∫_{ℝ×T} |f|²` by the rectangle rule (spectrally accurate for
    /// functions decayed at the window edge).
    pub fn l2_norm_sq(&self) -> f64 {
        let h = self.setup.xi_grid.h;
        self.field.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * h
    }
}

fn edge_mass(setup: &Setup, field: &Field) -> f64 {
    let width = setup.order().min(field.nx);
    let nm = field.nm;
    let mut worst: f64 = 0.0;
    for i in (0..width).chain(field.nx - width..field.nx) {
        let m: f64 = field.data[i * nm..(i + 1) * nm].iter().map(|z| z.norm()).sum();
        worst = worst.max(m);
    }
    worst
}

fn phase_vec(setup: &Setup, shift: f64) -> Vec<C> {
    let r = setup.r;
    (0..setup.modes() as i64).map(|i| e((i - r) as f64 * shift)).collect()
}

fn check_tail(out: &XiElement) -> Result<()> {
    let limit = out.setup.trunc.tol_algebra / 10.0;
    if out.declared_tail >= limit {
        return Err(Error::TailOverflow {
            tail: out.declared_tail,
            limit,
        });
    }
    Ok(())
}

fn same_setup(a: &Setup, b: &Setup) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::ConfigMismatch)
    }
}

/// Samples `f(x, y)` on the window grid.
pub fn xi_from_function(setup: &Arc<Setup>, f: impl Fn(f64, f64) -> C) -> Result<XiElement> {
    let m = setup.modes();
    let mut field = Field::zeros(0, setup.xi_grid.points(), m);
    let mut samples = vec![ZERO; m];
    for i in 0..setup.xi_grid.points() {
        let x = setup.xi_grid.x(i);
        for (l, s) in samples.iter_mut().enumerate() {
            let y = l as f64 / m as f64;
            let v = f(x, y);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFiniteSample { x, y, fiber: 0 });
            }
            *s = v;
        }
        field.at_mut(0, i).copy_from_slice(&analyze(setup, &samples));
    }
    Ok(XiElement::from_field(setup, field, 0.0))
}

/// `f(x, y) = profile(x)·e(n0·y)` sampled on the window grid.
pub fn xi_from_profile(setup: &Arc<Setup>, n0: i64, profile: impl Fn(f64) -> C) -> Result<XiElement> {
    if n0.abs() > setup.r {
        return Err(Error::OutOfRange(format!("mode {n0} outside ±{}", setup.r)));
    }
    let mut field = Field::zeros(0, setup.xi_grid.points(), setup.modes());
    let idx = (n0 + setup.r) as usize;
    for i in 0..setup.xi_grid.points() {
        let x = setup.xi_grid.x(i);
        let v = profile(x);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFiniteSample { x, y: 0.0, fiber: 0 });
        }
        field.at_mut(0, i)[idx] = v;
    }
    Ok(XiElement::from_field(setup, field, 0.0))
}

/// `f(x,y) = (2a)^{1/4} exp(−πa(x − x0)²) e(n0·y)`, unit L² norm.
pub fn gaussian_vector(setup: &Arc<Setup>, a: f64, n0: i64, x0: f64) -> Result<XiElement> {
    if !(a >= 0.25 && a.is_finite()) {
        return Err(Error::OutOfRange(format!("gaussian width a = {a} must be >= 1/4")));
    }
    if n0.abs() > setup.r {
        return Err(Error::OutOfRange(format!("mode {n0} outside ±{}", setup.r)));
    }
    let l = setup.xi_grid.edge();
    if !(x0.abs() <= l / 2.0) {
        return Err(Error::OutOfRange(format!("centre {x0} outside ±L/2 = ±{}", l / 2.0)));
    }
    let norm = (2.0 * a).powf(0.25);
    let m = setup.modes();
    let mut field = Field::zeros(0, setup.xi_grid.points(), m);
    let idx = (n0 + setup.r) as usize;
    for i in 0..setup.xi_grid.points() {
        let x = setup.xi_grid.x(i);
        field.at_mut(0, i)[idx] = C::new(norm * (-PI * a * (x - x0).powi(2)).exp(), 0.0);
    }
    let edge = l - x0.abs();
    let tail = norm * (-PI * a * edge * edge).exp();
    Ok(XiElement {
        setup: setup.clone(),
        field,
        budget: 0.0,
        declared_tail: tail,
    })
}

/// Interpolated value; zero outside the window.
pub fn xi_eval(f: &XiElement, x: f64, y: f64) -> C {
    let edge = f.setup.xi_grid.edge();
    if x.abs() > edge {
        return ZERO;
    }
    let ext = Extender::new(&f.setup, Layout::Window, 0, &f.field.data);
    let (modes, _) = ext.at_points(&[x]);
    series_at(&modes, f.setup.r, y)
}

/// Right action `(f·φ)(x,y) = Σ_p conj φ(x+2pμ, y+2pν, p) f(x+2pμ, y+2pν)`.
pub fn act_d(f: &XiElement, phi: &DElement) -> Result<XiElement> {
    same_setup(&f.setup, phi.setup())?;
    let s = &f.setup;
    let nm = s.modes();
    let half = s.xi_grid.half as i64;
    let points = s.xi_grid.points();
    let mu = s.params.mu;
    let nu = s.params.nu;
    let h = s.xi_grid.h;
    let mut out = Field::zeros(0, points, nm);
    let mut budget = f.budget + phi.truncation_budget();
    let Some((lo, hi)) = f.active_range() else {
        return Ok(f.with_field(out, budget));
    };
    let fext = Extender::new(s, Layout::Window, 0, &f.field.data);
    let mut bar = vec![ZERO; nm];
    for p in phi.support() {
        let shift = 2.0 * p as f64 * mu;
        // only points whose shifted argument lands in f's active range
        let i0 = ((lo as f64 - shift / h).floor() as i64 - 1).max(0);
        let i1 = ((hi as f64 - shift / h).ceil() as i64 + 1).min(points as i64 - 1);
        if i0 > i1 {
            continue;
        }
        let count = (i1 - i0 + 1) as usize;
        let ph = phase_vec(s, 2.0 * p as f64 * nu);
        let dext = Extender::new(s, Layout::D, p, phi.field().fiber(p));
        let mut dv = dext.shifted(shift, i0 - half, count);
        let mut fv = fext.shifted(shift, i0, count);
        budget += dv.dropped;
        let mut dropped: f64 = 0.0;
        for t in 0..count {
            let drow = &mut dv.data[t * nm..(t + 1) * nm];
            let frow = &mut fv.data[t * nm..(t + 1) * nm];
            for ((a, b), q) in drow.iter_mut().zip(frow.iter_mut()).zip(&ph) {
                *a *= q;
                *b *= q;
            }
            conj_flip(drow, &mut bar);
            let i = (i0 + t as i64) as usize;
            dropped = dropped.max(conv_acc(out.at_mut(0, i), &bar, frow, 0, ONE));
        }
        budget += dropped;
    }
    let res = f.with_field(out, budget);
    check_tail(&res)?;
    Ok(res)
}

/// `<f,g>_D(x,y,p) = Σ_k ē(ckp(y − pν)) f(x+k, y) ḡ(x − 2pμ + k, y − 2pν)`
pub fn inner_d(f: &XiElement, g: &XiElement) -> Result<DElement> {
    same_setup(&f.setup, &g.setup)?;
    let s = &f.setup;
    let nm = s.modes();
    let n = s.d_grid.n;
    let half = s.xi_grid.half as i64;
    let h = s.xi_grid.h;
    let c = s.params.c;
    let mu = s.params.mu;
    let nu = s.params.nu;
    let pm = s.p_max();
    let km = s.k_max();
    let mut out = Field::zeros(pm, n, nm);
    let mut budget = f.budget + g.budget;
    let (Some((flo, fhi)), Some((glo, ghi))) = (f.active_range(), g.active_range()) else {
        return Ok(DElement::from_parts(s, out, budget));
    };
    let fext = Extender::new(s, Layout::Window, 0, &f.field.data);
    let gext = Extender::new(s, Layout::Window, 0, &g.field.data);
    let mut bar = vec![ZERO; nm];
    for k in -km..=km {
        // f(x + k) for x in [0, 1): window indices half + k·N ..
        let start = half + k * n as i64;
        if start + n as i64 - 1 < flo as i64 || start > fhi as i64 {
            continue;
        }
        let fv = fext.shifted(0.0, start, n);
        for p in -pm..=pm {
            let shift = -2.0 * p as f64 * mu;
            let gstart = start as f64 + shift / h;
            if gstart + n as f64 + 1.0 < glo as f64 || gstart - 1.0 > ghi as f64 {
                continue;
            }
            let mut gv = gext.shifted(shift, start, n);
            let ph = phase_vec(s, -2.0 * p as f64 * nu);
            let factor = e((c * k * p * p) as f64 * nu);
            let mut dropped: f64 = 0.0;
            for j in 0..n {
                let grow = &mut gv.data[j * nm..(j + 1) * nm];
                for (z, q) in grow.iter_mut().zip(&ph) {
                    *z *= q;
                }
                conj_flip(grow, &mut bar);
                dropped = dropped.max(conv_acc(
                    out.at_mut(p, j),
                    &fv.data[j * nm..(j + 1) * nm],
                    &bar,
                    -c * k * p,
                    factor,
                ));
            }
            budget += dropped;
        }
    }
    Ok(DElement::from_parts(s, out, budget))
}

/// `<f,g>_E(x,y,k) = Σ_p e(−ckp(y − pν)) f(x − 2pμ, y − 2pν) ḡ(x − 2pμ + k, y − 2pν)`
pub fn inner_e(f: &XiElement, g: &XiElement) -> Result<EElement> {
    same_setup(&f.setup, &g.setup)?;
    let s = &f.setup;
    let nm = s.modes();
    let n = s.e_grid.n;
    let c = s.params.c;
    let mu = s.params.mu;
    let nu = s.params.nu;
    let pm = s.p_max();
    let mut out = Field::zeros(pm, n, nm);
    let mut budget = f.budget + g.budget;
    if f.active_range().is_none() || g.active_range().is_none() {
        return Ok(EElement::from_parts(s, out, budget));
    }
    let fext = Extender::new(s, Layout::Window, 0, &f.field.data);
    let gext = Extender::new(s, Layout::Window, 0, &g.field.data);
    let mut bar = vec![ZERO; nm];
    let edge = s.xi_grid.edge();
    for p in -pm..=pm {
        let shift = -2.0 * p as f64 * mu;
        let xs: Vec<f64> = (0..n).map(|j| s.e_grid.x(j) + shift).collect();
        if xs[0] > edge || xs[n - 1] < -edge {
            continue;
        }
        let ph = phase_vec(s, -2.0 * p as f64 * nu);
        let (mut fv, _) = fext.at_points(&xs);
        for row in fv.chunks_mut(nm) {
            for (z, q) in row.iter_mut().zip(&ph) {
                *z *= q;
            }
        }
        for k in -pm..=pm {
            let gx: Vec<f64> = xs.iter().map(|x| x + k as f64).collect();
            if gx[0] > edge || gx[n - 1] < -edge {
                continue;
            }
            let (mut gv, _) = gext.at_points(&gx);
            let factor = e((c * k * p * p) as f64 * nu);
            let mut dropped: f64 = 0.0;
            for j in 0..n {
                let grow = &mut gv[j * nm..(j + 1) * nm];
                for (z, q) in grow.iter_mut().zip(&ph) {
                    *z *= q;
                }
                conj_flip(grow, &mut bar);
                dropped = dropped.max(conv_acc(
                    out.at_mut(k, j),
                    &fv[j * nm..(j + 1) * nm],
                    &bar,
                    -c * k * p,
                    factor,
                ));
            }
            budget += dropped;
        }
    }
    Ok(EElement::from_parts(s, out, budget))
}

/// Left action of `E`, gated on the convention oracles having passed in
/// `session`.
pub fn act_e(session: &Session, psi: &EElement, f: &XiElement) -> Result<XiElement> {
    session.require_conventions()?;
    act_e_candidate(psi, f)
}

/// The candidate left action `(ψ·f)(x,y) = Σ_k ψ(x,y,k) f(x+k, y)` without
/// the session gate; the convention oracles themselves call this.
pub fn act_e_candidate(psi: &EElement, f: &XiElement) -> Result<XiElement> {
    same_setup(&f.setup, psi.setup())?;
    let s = &f.setup;
    let nm = s.modes();
    let points = s.xi_grid.points() as i64;
    let spacing = (1.0 / s.xi_grid.h).round() as i64;
    let mut out = Field::zeros(0, points as usize, nm);
    let mut budget = f.budget + psi.truncation_budget();
    let Some((lo, hi)) = f.active_range() else {
        return Ok(f.with_field(out, budget));
    };
    let fext = Extender::new(s, Layout::Window, 0, &f.field.data);
    for k in psi.support() {
        // f(x_i + k) lives at window index i + k·spacing
        let i0 = (lo as i64 - k * spacing).max(0);
        let i1 = (hi as i64 - k * spacing).min(points - 1);
        if i0 > i1 {
            continue;
        }
        let count = (i1 - i0 + 1) as usize;
        let fv = fext.shifted(0.0, i0 + k * spacing, count);
        let xs: Vec<f64> = (i0..=i1).map(|i| s.xi_grid.x(i as usize)).collect();
        let eext = Extender::new(s, Layout::E, k, psi.field().fiber(k));
        let (pv, dropped_ext) = eext.at_points(&xs);
        budget += dropped_ext;
        let mut dropped: f64 = 0.0;
        for t in 0..count {
            let i = (i0 + t as i64) as usize;
            dropped = dropped.max(conv_acc(
                out.at_mut(0, i),
                &pv[t * nm..(t + 1) * nm],
                &fv.data[t * nm..(t + 1) * nm],
                0,
                ONE,
            ));
        }
        budget += dropped;
    }
    Ok(f.with_field(out, budget))
}
