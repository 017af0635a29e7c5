//! The algebra `E^c_{μν}` acting on `Ξ` from the left.
//!
//! Fiber `k` is stored on `x ∈ [0, 2μ)` and extended by
//! `ψ(x − 2qμ, y − 2qν, k) = e(ckq(y − qν)) ψ(x, y, k)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dalgebra::d_trace;
use crate::error::{Error, Result};
use crate::gauge::Direction;
use crate::linear_element;
use crate::numerics::{
    analyze, conj_flip, conv_acc_split, e, series_at, synth, Extender, Field, Layout, C, I, ONE,
    ZERO,
};
use crate::params::Setup;
use crate::samples;
use crate::ximodule::{inner_d, inner_e, xi_from_profile, XiElement};

#[derive(Debug, Clone)]
pub struct EElement {
    pub(crate) setup: Arc<Setup>,
    pub(crate) field: Field,
    pub(crate) budget: f64,
}

linear_element!(EElement);

impl EElement {
    pub(crate) fn with_field(&self, field: Field, budget: f64) -> Self {
        EElement {
            setup: self.setup.clone(),
            field,
            budget,
        }
    }

    pub(crate) fn from_parts(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        EElement {
            setup: setup.clone(),
            field,
            budget,
        }
    }

    pub fn zero(setup: &Arc<Setup>) -> Self {
        EElement {
            setup: setup.clone(),
            field: Field::zeros(setup.p_max(), setup.e_grid.n, setup.modes()),
            budget: 0.0,
        }
    }

    /// Stored coefficient of y-mode `n` at grid point `j` of fiber `k`.
    pub fn coeff(&self, k: i64, j: usize, n: i64) -> C {
        if k.abs() > self.field.fmax || n.abs() > self.setup.r {
            return ZERO;
        }
        self.field.at(k, j)[(n + self.setup.r) as usize]
    }

    pub fn support(&self) -> Vec<i64> {
        self.field.active_fibers()
    }

    /// `|ψ* + ψ|` on the grid.
    pub fn skew_defect(&self) -> f64 {
        field_sup(&self.setup, &e_star(self).add(self).expect("same setup").field)
    }

    /// `|ψ* − ψ|` on the grid.
    pub fn self_adjoint_defect(&self) -> f64 {
        field_sup(&self.setup, &e_star(self).sub(self).expect("same setup").field)
    }
}

fn field_sup(setup: &Setup, f: &Field) -> f64 {
    let zero = Field::zeros(f.fmax, f.nx, f.nm);
    crate::numerics::field_defect(setup, f, &zero).value()
}

/// Measured normalization of `τ_E`: `τ_E(ψ) = C ∫_0^{2μ}∫_T ψ(x, y, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constant: f64,
    /// Largest relative deviation of a single pair's implied constant from
    /// the mean.
    pub spread: f64,
    pub samples: usize,
}

impl Calibration {
    /// A calibration with a given constant, for tests that fix it by hand.
    pub fn assumed(constant: f64) -> Self {
        Calibration {
            constant,
            spread: 0.0,
            samples: 0,
        }
    }
}

/// The unit `ψ(x, y, k) = δ_{k,0}`.
pub fn e_identity(setup: &Arc<Setup>) -> EElement {
    let mut out = EElement::zero(setup);
    let r = setup.r as usize;
    for j in 0..setup.e_grid.n {
        out.field.at_mut(0, j)[r] = ONE;
    }
    out
}

/// Samples `sampler` on `[0, 2μ)` and reports its twist defect at `q = ±1`.
pub fn e_from_function(
    setup: &Arc<Setup>,
    sampler: impl Fn(f64, f64, i64) -> C,
) -> Result<(EElement, f64)> {
    let mut out = EElement::zero(setup);
    let m = setup.modes();
    let c = setup.params.c as f64;
    let mu = setup.params.mu;
    let nu = setup.params.nu;
    let mut twist: f64 = 0.0;
    let mut samples = vec![ZERO; m];
    for k in -setup.p_max()..=setup.p_max() {
        let kf = k as f64;
        for j in 0..setup.e_grid.n {
            let x = setup.e_grid.x(j);
            for (l, s) in samples.iter_mut().enumerate() {
                let y = l as f64 / m as f64;
                let v = sampler(x, y, k);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFiniteSample { x, y, fiber: k });
                }
                *s = v;
                for q in [-1.0, 1.0] {
                    let w = sampler(x - 2.0 * q * mu, y - 2.0 * q * nu, k);
                    let want = e(c * kf * q * (y - q * nu)) * v;
                    twist = twist.max((w - want).norm());
                }
            }
            out.field.at_mut(k, j).copy_from_slice(&analyze(setup, &samples));
        }
    }
    Ok((out, twist))
}

pub fn e_eval(psi: &EElement, x: f64, y: f64, k: i64) -> C {
    if k.abs() > psi.field.fmax || psi.field.fiber_is_zero(k) {
        return ZERO;
    }
    let ext = Extender::new(&psi.setup, Layout::E, k, psi.field.fiber(k));
    let (modes, _) = ext.at_points(&[x]);
    series_at(&modes, psi.setup.r, y)
}

/// `(ψχ)(x,y,m) = Σ_k ψ(x,y,k) χ(x+k, y, m−k)`
pub fn e_mul(a: &EElement, b: &EElement) -> Result<EElement> {
    a.check_same(b)?;
    let s = &a.setup;
    let km = s.p_max();
    let n = s.e_grid.n;
    let nm = s.modes();
    let nf = (2 * km + 1) as usize;
    // accumulate in split real/imaginary planes, one per output fiber
    let mut acc_re = vec![0.0; nf * n * nm];
    let mut acc_im = vec![0.0; nf * n * nm];
    let mut y_re = vec![0.0; n * nm];
    let mut y_im = vec![0.0; n * nm];
    let mut budget = a.budget + b.budget;
    let fb = b.field.active_fibers();
    let lost_pair = a.field.mode_sup() * b.field.mode_sup();
    for k in a.field.active_fibers() {
        for &kb in &fb {
            let m = k + kb;
            if m.abs() > km {
                budget += lost_pair;
                continue;
            }
            let ext = Extender::new(s, Layout::E, kb, b.field.fiber(kb));
            let blk = ext.shifted(k as f64, 0, n);
            budget += blk.dropped;
            for (i, z) in blk.data.iter().enumerate() {
                y_re[i] = z.re;
                y_im[i] = z.im;
            }
            let base = (m + km) as usize * n * nm;
            let mut dropped: f64 = 0.0;
            for j in 0..n {
                let o = base + j * nm;
                dropped = dropped.max(conv_acc_split(
                    &mut acc_re[o..o + nm],
                    &mut acc_im[o..o + nm],
                    a.field.at(k, j),
                    &y_re[j * nm..(j + 1) * nm],
                    &y_im[j * nm..(j + 1) * nm],
                ));
            }
            budget += dropped;
        }
    }
    let mut out = Field::zeros(km, n, nm);
    for (d, (re, im)) in out.data.iter_mut().zip(acc_re.iter().zip(&acc_im)) {
        *d = C::new(*re, *im);
    }
    Ok(a.with_field(out, budget))
}

/// `ψ*(x,y,k) = conj ψ(x+k, y, −k)`
pub fn e_star(a: &EElement) -> EElement {
    let s = &a.setup;
    let n = s.e_grid.n;
    let nm = s.modes();
    let mut out = Field::zeros(a.field.fmax, n, nm);
    let mut budget = a.budget;
    for src in a.field.active_fibers() {
        let k = -src;
        let ext = Extender::new(s, Layout::E, src, a.field.fiber(src));
        let blk = ext.shifted(k as f64, 0, n);
        budget += blk.dropped;
        for j in 0..n {
            conj_flip(&blk.data[j * nm..(j + 1) * nm], out.at_mut(k, j));
        }
    }
    a.with_field(out, budget)
}

/// `[a, b] = ab − ba`
pub fn e_commutator(a: &EElement, b: &EElement) -> Result<EElement> {
    e_mul(a, b)?.sub(&e_mul(b, a)?)
}

/// `∫_0^{2μ}∫_T ψ(x, y, 0)` before calibration.
pub fn e_trace_raw(a: &EElement) -> C {
    let r = a.setup.r as usize;
    let h = a.setup.e_grid.h;
    let sum: C = (0..a.setup.e_grid.n).map(|j| a.field.at(0, j)[r]).sum();
    sum * h
}

pub fn e_trace(a: &EElement, cal: &Calibration) -> C {
    e_trace_raw(a) * cal.constant
}

/// `τ_E(ab)` without forming the full product.
pub fn e_trace_product(a: &EElement, b: &EElement, cal: &Calibration) -> Result<C> {
    a.check_same(b)?;
    Ok(TracePartner::new(b).trace_with(a, cal))
}

/// `b` prepared for repeated `τ_E(a·b)`: fiber `k` holds the modes of
/// `b(x + k, y, −k)` in reversed order, so the trace is a plain dot product
/// against `a`.
#[derive(Debug, Clone)]
pub struct TracePartner {
    setup: Arc<Setup>,
    field: Field,
}

impl TracePartner {
    pub fn new(b: &EElement) -> Self {
        let s = &b.setup;
        let n = s.e_grid.n;
        let nm = s.modes();
        let mut field = Field::zeros(b.field.fmax, n, nm);
        for src in b.field.active_fibers() {
            let k = -src;
            let ext = Extender::new(s, Layout::E, src, b.field.fiber(src));
            let blk = ext.shifted(k as f64, 0, n);
            for j in 0..n {
                let row = &blk.data[j * nm..(j + 1) * nm];
                for (d, v) in field.at_mut(k, j).iter_mut().zip(row.iter().rev()) {
                    *d = *v;
                }
            }
        }
        TracePartner { setup: s.clone(), field }
    }

    /// `τ_E(a·b)`. Panics if `a` lives on another configuration.
    pub fn trace_with(&self, a: &EElement, cal: &Calibration) -> C {
        assert!(a.setup.same_as(&self.setup), "trace partner from another configuration");
        let mut acc = ZERO;
        for k in a.field.active_fibers() {
            if self.field.fiber_is_zero(k) {
                continue;
            }
            for (x, y) in a.field.fiber(k).iter().zip(self.field.fiber(k)) {
                acc += x * y;
            }
        }
        acc * self.setup.e_grid.h * cal.constant
    }
}

/// Measures `C` from `τ_E(<f,g>_E) = τ_D(<f,g>_D)` over `pairs` random
/// Gaussian pairs.
pub fn calibrate_trace(setup: &Arc<Setup>, seed: u64, pairs: usize) -> Result<Calibration> {
    let mut ratios = Vec::with_capacity(pairs);
    let mut rng = samples::rng(seed, 0xCA1);
    for _ in 0..pairs {
        let (f, g) = samples::gaussian_pair(setup, &mut rng)?;
        let d = d_trace(&inner_d(&f, &g)?);
        let raw = e_trace_raw(&inner_e(&f, &g)?);
        ratios.push(d / raw);
    }
    let mean: C = ratios.iter().sum::<C>() / pairs as f64;
    let spread = ratios
        .iter()
        .map(|r| (r - mean).norm() / mean.norm())
        .fold(0.0, f64::max);
    if !(spread < 1e-6) || mean.re <= 0.0 {
        return Err(Error::CalibrationInconsistent {
            spread,
            samples: pairs,
        });
    }
    Ok(Calibration {
        constant: mean.re,
        spread,
        samples: pairs,
    })
}

/// `δ̂_dir(ψ) = [∇⁰_dir, ψ]` in closed form:
/// `δ̂_X = −∂_x`, `δ̂_Y = −∂_y − (πci/2μ) k(2x+k)`, `δ̂_Z = −(πik/μ)`.
pub fn e_delta(dir: Direction, a: &EElement) -> EElement {
    let s = &a.setup;
    let n = s.e_grid.n;
    let nm = s.modes();
    let r = s.r;
    let c = s.params.c as f64;
    let mu = s.params.mu;
    let mut out = Field::zeros(a.field.fmax, n, nm);
    for k in a.field.active_fibers() {
        let kf = k as f64;
        match dir {
            Direction::X => {
                let d = Extender::new(s, Layout::E, k, a.field.fiber(k)).derivative();
                for (o, v) in out.fiber_mut(k).iter_mut().zip(d) {
                    *o = -v;
                }
            }
            Direction::Y => {
                for j in 0..n {
                    let x = s.e_grid.x(j);
                    let mult = -I * (PI * c / (2.0 * mu) * kf * (2.0 * x + kf));
                    let src = a.field.at(k, j);
                    for (m, o) in out.at_mut(k, j).iter_mut().enumerate() {
                        let mode = (m as i64 - r) as f64;
                        *o = src[m] * (mult - I * (2.0 * PI * mode));
                    }
                }
            }
            Direction::Z => {
                let f = -I * (PI * kf / mu);
                for (o, v) in out.fiber_mut(k).iter_mut().zip(a.field.fiber(k)) {
                    *o = v * f;
                }
            }
        }
    }
    a.with_field(out, a.budget)
}

/// Power series `Σ ψⁿ/n!`, stopped once a term's sup-norm bound drops
/// below `1e-14`.
pub fn e_exp(a: &EElement) -> Result<EElement> {
    const MAX_TERMS: usize = 400;
    let norm = a.field.mode_sup();
    if norm > 20.0 {
        return Err(Error::ConvergenceBudgetExceeded { norm, terms: 0 });
    }
    let mut sum = e_identity(&a.setup);
    let mut term = sum.clone();
    for n in 1..=MAX_TERMS {
        term = e_mul(&term, a)?.scale(C::new(1.0 / n as f64, 0.0));
        sum = sum.add(&term)?;
        if term.field.mode_sup() < 1e-14 {
            return Ok(sum);
        }
    }
    Err(Error::ConvergenceBudgetExceeded {
        norm,
        terms: MAX_TERMS,
    })
}

/// Re-evaluates off the fundamental domain and measures the twist relation
/// at `q = ±1` on every `stride`-th grid point.
pub fn e_twist_defect(a: &EElement, stride: usize) -> f64 {
    let s = &a.setup;
    let c = s.params.c as f64;
    let mu = s.params.mu;
    let nu = s.params.nu;
    let m = s.modes();
    let mut worst: f64 = 0.0;
    for k in a.field.active_fibers() {
        let kf = k as f64;
        let ext = Extender::new(s, Layout::E, k, a.field.fiber(k));
        let xs: Vec<f64> = (0..s.e_grid.n)
            .step_by(stride.max(1))
            .map(|j| s.e_grid.x(j) + 0.37 * s.e_grid.h)
            .collect();
        let (base, _) = ext.at_points(&xs);
        for q in [-1.0, 1.0] {
            let moved: Vec<f64> = xs.iter().map(|x| x - 2.0 * q * mu).collect();
            let (vals, _) = ext.at_points(&moved);
            for i in 0..xs.len() {
                for l in 0..m {
                    let y = l as f64 / m as f64;
                    let v0 = series_at(&base[i * m..(i + 1) * m], s.r, y);
                    let v1 = series_at(&vals[i * m..(i + 1) * m], s.r, y - 2.0 * q * nu);
                    worst = worst.max((v1 - e(c * kf * q * (y - q * nu)) * v0).norm());
                }
            }
        }
    }
    worst
}

/// Width of the Gaussian probes used by [`from_operator`]. Probes for
/// neighbouring fibers overlap at the 1e-4 level; the overlap is removed by
/// solving the small Toeplitz system of probe values at integer offsets.
pub const PROBE_WIDTH: f64 = 0.25;

/// Recovers the element representing a right-D-linear operator on `Ξ` by
/// applying it to Gaussian probes. Returns the element and the twist
/// defect of the recovered values past `2μ`.
pub fn from_operator(
    setup: &Arc<Setup>,
    k_range: i64,
    op: impl Fn(&XiElement) -> Result<XiElement>,
) -> Result<(EElement, f64)> {
    let kmax = setup.p_max();
    if k_range < 0 || k_range > kmax {
        return Err(Error::OutOfRange(format!("kRange {k_range} outside [0, {kmax}]")));
    }
    let order = setup.order() as i64;
    let half = order / 2;
    let h = setup.xi_grid.h;
    let xi_half = setup.xi_grid.half as i64;
    let spacing = (1.0 / h).round() as i64;
    let nm = setup.modes();
    let mu = setup.params.mu;
    let t_hi = (2.0 * mu / h).ceil() as i64 + half;
    let t_lo = -half;
    let w2 = 2.0 * PROBE_WIDTH * PROBE_WIDTH;
    let nk = (2 * kmax + 1) as usize;
    let nt = (t_hi - t_lo + 1) as usize;

    // probe centred at x_t + k, read at x_t: sees fiber k' through the
    // probe value at offset k' − k
    let leak = DMatrix::from_fn(nk, nk, |a, b| {
        let d = b as f64 - a as f64;
        (-(d * d) / w2).exp()
    });
    let solve = leak
        .try_inverse()
        .ok_or(Error::ProbeIllConditioned { x: 0.0, value: 0.0 })?;

    // rows[k][t] = recovered modes of fiber k at x_t = t·h
    let mut rows = vec![vec![ZERO; nt * nm]; nk];
    let mut reads = vec![ZERO; nk * nm];
    for t in t_lo..=t_hi {
        for (a, k) in (-kmax..=kmax).enumerate() {
            let centre_idx = xi_half + t + k * spacing;
            let centre = setup.xi_grid.x(centre_idx as usize);
            let probe = xi_from_profile(setup, 0, |x| C::new((-(x - centre).powi(2) / w2).exp(), 0.0))?;
            let value = probe.coeff(centre_idx as usize, 0).re;
            if value < 1e-6 {
                return Err(Error::ProbeIllConditioned { x: centre, value });
            }
            let image = op(&probe)?;
            reads[a * nm..(a + 1) * nm].copy_from_slice(image.row((xi_half + t) as usize));
        }
        let o = ((t - t_lo) as usize) * nm;
        for (b, row) in rows.iter_mut().enumerate() {
            let dst = &mut row[o..o + nm];
            for a in 0..nk {
                let w = solve[(b, a)];
                for (d, v) in dst.iter_mut().zip(&reads[a * nm..(a + 1) * nm]) {
                    *d += v * w;
                }
            }
        }
    }

    let mut out = EElement::zero(setup);
    let mut twist: f64 = 0.0;
    let mut w = vec![0.0; order as usize];
    for k in -k_range..=k_range {
        let rows = &rows[(k + kmax) as usize];
        // resample from the x_t nodes onto the E grid
        let fiber = out.field.fiber_mut(k);
        for j in 0..setup.e_grid.n {
            let tt = setup.e_grid.x(j) / h;
            let base = tt.floor();
            crate::numerics::lagrange_weights(order as usize, tt - base, &mut w);
            let base = base as i64;
            let dst = &mut fiber[j * nm..(j + 1) * nm];
            for (sidx, &wi) in w.iter().enumerate() {
                let t = base - half + 1 + sidx as i64;
                let o = ((t - t_lo) as usize) * nm;
                for (d, v) in dst.iter_mut().zip(&rows[o..o + nm]) {
                    *d += v * wi;
                }
            }
        }
        // twist check on the recovered nodes beyond 2μ
        let ext = Extender::new(setup, Layout::E, k, out.field.fiber(k));
        let beyond: Vec<i64> = (t_lo..=t_hi).filter(|&t| t as f64 * h >= 2.0 * mu).collect();
        let xs: Vec<f64> = beyond.iter().map(|&t| t as f64 * h).collect();
        let (vals, _) = ext.at_points(&xs);
        for (i, &t) in beyond.iter().enumerate() {
            let o = ((t - t_lo) as usize) * nm;
            let diff: Vec<C> = vals[i * nm..(i + 1) * nm]
                .iter()
                .zip(&rows[o..o + nm])
                .map(|(a, b)| a - b)
                .collect();
            for v in synth(setup, &diff) {
                twist = twist.max(v.norm());
            }
        }
    }
    Ok((out, twist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ConfigFile;

    fn setup() -> Arc<Setup> {
        ConfigFile::default().validate().unwrap()
    }

    #[test]
    fn identity_laws() {
        let s = setup();
        let id = e_identity(&s);
        assert!(e_star(&id).defect(&id).unwrap().value() < 1e-14);
        assert!((e_eval(&id, 0.3, 0.4, 0) - ONE).norm() < 1e-14);
        assert!((e_trace(&id, &Calibration::assumed(1.0)) - C::new(2.0 * s.params.mu, 0.0)).norm() < 1e-14);
        for d in Direction::ALL {
            assert!(e_delta(d, &id).sup_norm() < 1e-12, "{d:?} {:e}", e_delta(d, &id).sup_norm());
        }
    }

    #[test]
    fn constant_at_k0_is_twist_consistent() {
        let s = setup();
        let (psi, defect) = e_from_function(&s, |_, _, k| if k == 0 { ONE } else { ZERO }).unwrap();
        assert_eq!(defect, 0.0);
        assert!(psi.defect(&e_identity(&s)).unwrap().value() < 1e-14);
    }

    #[test]
    fn exp_of_scalar_is_phase() {
        let s = setup();
        let t = 0.7;
        let u = e_exp(&e_identity(&s).scale(I * t)).unwrap();
        let want = e_identity(&s).scale(C::new(0.0, t).exp());
        assert!(u.defect(&want).unwrap().value() < 1e-13);
        assert!(e_exp(&EElement::zero(&s)).unwrap().defect(&e_identity(&s)).unwrap().value() == 0.0);
        assert!(e_exp(&e_identity(&s).scale(C::new(25.0, 0.0))).is_err());
    }

    #[test]
    fn calibration_constant_is_one() {
        let s = setup();
        let cal = calibrate_trace(&s, 7, 20).unwrap();
        assert!((cal.constant - 1.0).abs() < 1e-8, "{cal:?}");
        assert!(cal.spread < 1e-6);
    }
}
