//! Grid storage, twist extension, interpolation stencils and y-mode
//! arithmetic shared by all three kinds of elements.
//!
//! Every element stores, per fiber, an `nx × nm` block laid out x-major:
//! entry `(j, m)` is the y-Fourier coefficient of mode `m - r` at grid point
//! `j`. Values off the fundamental domain come from the twist relation of the
//! owning algebra, never from wrap-around.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::params::{DefectMetric, Setup};

pub type C = Complex64;

pub const ZERO: C = C::new(0.0, 0.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const I: C = C::new(0.0, 1.0);

/// The character `e(t) = exp(2πi t)`.
#[inline]
pub fn e(t: f64) -> C {
    let (s, c) = (TAU * t).sin_cos();
    C::new(c, s)
}

/// Lagrange weights for nodes `1 - order/2 ..= order/2` evaluated at `t`.
pub fn lagrange_weights(order: usize, t: f64, w: &mut [f64]) {
    let lo = 1 - (order as i64) / 2;
    for (i, wi) in w.iter_mut().enumerate().take(order) {
        let xi = (lo + i as i64) as f64;
        let mut acc = 1.0;
        for l in 0..order {
            if l != i {
                let xl = (lo + l as i64) as f64;
                acc *= (t - xl) / (xi - xl);
            }
        }
        *wi = acc;
    }
}

/// Centered first-derivative weights on nodes `-order/2 ..= order/2`
/// (unit spacing), via Fornberg's recursion.
pub fn fd_weights(order: usize) -> Vec<f64> {
    let half = (order / 2) as i64;
    let nodes: Vec<f64> = (-half..=half).map(|v| v as f64).collect();
    let n = nodes.len();
    let m = 1usize;
    // delta[k][j]: weight of node j for derivative k using all nodes.
    let mut delta = vec![vec![vec![0.0; n]; n]; m + 1];
    delta[0][0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            for k in 0..=m.min(i) {
                let prev = delta[k][i - 1][j];
                let lower = if k > 0 { delta[k - 1][i - 1][j] } else { 0.0 };
                delta[k][i][j] = (nodes[i] * prev - k as f64 * lower) / c3;
            }
        }
        for k in 0..=m.min(i) {
            let prev = delta[k][i - 1][i - 1];
            let lower = if k > 0 { delta[k - 1][i - 1][i - 1] } else { 0.0 };
            delta[k][i][i] = c1 / c2 * (k as f64 * lower - nodes[i - 1] * prev);
        }
        c1 = c2;
    }
    delta[1][n - 1].clone()
}

/// Per-fiber grid data, fibers `-fmax..=fmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub fmax: i64,
    pub nx: usize,
    pub nm: usize,
    pub data: Vec<C>,
}

impl Field {
    pub fn zeros(fmax: i64, nx: usize, nm: usize) -> Self {
        Field {
            fmax,
            nx,
            nm,
            data: vec![ZERO; (2 * fmax + 1) as usize * nx * nm],
        }
    }

    #[inline]
    pub fn fiber_len(&self) -> usize {
        self.nx * self.nm
    }

    #[inline]
    fn offset(&self, f: i64) -> usize {
        debug_assert!(f.abs() <= self.fmax);
        (f + self.fmax) as usize * self.fiber_len()
    }

    pub fn fiber(&self, f: i64) -> &[C] {
        let o = self.offset(f);
        &self.data[o..o + self.fiber_len()]
    }

    pub fn fiber_mut(&mut self, f: i64) -> &mut [C] {
        let o = self.offset(f);
        let len = self.fiber_len();
        &mut self.data[o..o + len]
    }

    #[inline]
    pub fn at(&self, f: i64, j: usize) -> &[C] {
        let o = self.offset(f) + j * self.nm;
        &self.data[o..o + self.nm]
    }

    #[inline]
    pub fn at_mut(&mut self, f: i64, j: usize) -> &mut [C] {
        let o = self.offset(f) + j * self.nm;
        let nm = self.nm;
        &mut self.data[o..o + nm]
    }

    pub fn fibers(&self) -> impl Iterator<Item = i64> {
        -self.fmax..=self.fmax
    }

    pub fn fiber_is_zero(&self, f: i64) -> bool {
        f.abs() > self.fmax || self.fiber(f).iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn active_fibers(&self) -> Vec<i64> {
        self.fibers().filter(|&f| !self.fiber_is_zero(f)).collect()
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.fmax == other.fmax && self.nx == other.nx && self.nm == other.nm
    }

    pub fn map(&self, f: impl Fn(C) -> C) -> Field {
        Field {
            data: self.data.iter().map(|&z| f(z)).collect(),
            ..self.clone()
        }
    }

    pub fn zip(&self, other: &Field, f: impl Fn(C, C) -> C) -> Field {
        debug_assert!(self.same_shape(other));
        Field {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..self.clone()
        }
    }

    /// Largest coefficient modulus summed over modes, over all (fiber, x).
    pub fn mode_sup(&self) -> f64 {
        self.data
            .chunks(self.nm)
            .map(|v| v.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// How an element's values are extended beyond its stored grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `φ(x+k, y, p) = e(ckp(y - pν)) φ(x, y, p)` on the fundamental domain `[0,1)`.
    D,
    /// `ψ(x - 2qμ, y - 2qν, k) = e(ckq(y - qν)) ψ(x, y, k)` on `[0, 2μ)`.
    E,
    /// Zero outside the window `[-L, L]`.
    Window,
}

/// Extension of one fiber, with the stencil machinery that reads it.
pub struct Extender<'a> {
    pub setup: &'a Setup,
    pub layout: Layout,
    pub fiber: i64,
    pub data: &'a [C],
}

/// A contiguous run of extended grid values, x-major, with the overflow
/// mass lost to mode truncation while building it.
pub struct Block {
    pub lo: i64,
    pub nm: usize,
    pub data: Vec<C>,
    pub dropped: f64,
}

impl Block {
    #[inline]
    pub fn at(&self, jj: i64) -> &[C] {
        let o = (jj - self.lo) as usize * self.nm;
        &self.data[o..o + self.nm]
    }
}

impl<'a> Extender<'a> {
    pub fn new(setup: &'a Setup, layout: Layout, fiber: i64, data: &'a [C]) -> Self {
        Extender {
            setup,
            layout,
            fiber,
            data,
        }
    }

    pub fn h(&self) -> f64 {
        match self.layout {
            Layout::D => self.setup.d_grid.h,
            Layout::E => self.setup.e_grid.h,
            Layout::Window => self.setup.xi_grid.h,
        }
    }

    /// Coordinate of extended grid index 0.
    pub fn origin(&self) -> f64 {
        match self.layout {
            Layout::Window => -self.setup.xi_grid.edge(),
            _ => 0.0,
        }
    }

    fn n(&self) -> usize {
        match self.layout {
            Layout::D => self.setup.d_grid.n,
            Layout::E => self.setup.e_grid.n,
            Layout::Window => self.setup.xi_grid.points(),
        }
    }

    /// Extended values for indices `lo..=hi`.
    pub fn block(&self, lo: i64, hi: i64) -> Block {
        let nm = self.setup.modes();
        let n = self.n() as i64;
        let len = (hi - lo + 1).max(0) as usize;
        let mut out = vec![ZERO; len * nm];
        let mut dropped: f64 = 0.0;
        let c = self.setup.params.c;
        let nu = self.setup.params.nu;
        let r = self.setup.r;
        let f = self.fiber;

        let mut jj = lo;
        while jj <= hi {
            let q = jj.div_euclid(n);
            let run_end = ((q + 1) * n - 1).min(hi);
            match self.layout {
                Layout::Window => {
                    if q == 0 {
                        for t in jj..=run_end {
                            let src = &self.data[t as usize * nm..(t as usize + 1) * nm];
                            let o = (t - lo) as usize * nm;
                            out[o..o + nm].copy_from_slice(src);
                        }
                    }
                }
                Layout::D => {
                    // mode m at x + q comes from mode m - cqf at x
                    let s = c * q * f;
                    let ph = e(-((c * q * f * f) as f64) * nu);
                    for t in jj..=run_end {
                        let j = t.rem_euclid(n) as usize;
                        let src = &self.data[j * nm..(j + 1) * nm];
                        let o = (t - lo) as usize * nm;
                        let dst = &mut out[o..o + nm];
                        let mut lost = 0.0;
                        for (si, z) in src.iter().enumerate() {
                            let ti = si as i64 + s;
                            if ti >= 0 && ti < nm as i64 {
                                dst[ti as usize] = ph * z;
                            } else {
                                lost += z.norm();
                            }
                        }
                        dropped = dropped.max(lost);
                    }
                }
                Layout::E => {
                    // mode m at x + 2qμ comes from mode m + cfq at x
                    let s = c * f * q;
                    let base = e(-((c * f * q * q) as f64) * nu);
                    let phases: Vec<C> = (0..nm as i64)
                        .map(|mi| base * e(-2.0 * q as f64 * nu * (mi - r) as f64))
                        .collect();
                    for t in jj..=run_end {
                        let j = t.rem_euclid(n) as usize;
                        let src = &self.data[j * nm..(j + 1) * nm];
                        let o = (t - lo) as usize * nm;
                        let dst = &mut out[o..o + nm];
                        let mut lost = 0.0;
                        for (si, z) in src.iter().enumerate() {
                            let ti = si as i64 - s;
                            if ti >= 0 && ti < nm as i64 {
                                dst[ti as usize] = phases[ti as usize] * z;
                            } else {
                                lost += z.norm();
                            }
                        }
                        dropped = dropped.max(lost);
                    }
                }
            }
            jj = run_end + 1;
        }
        Block {
            lo,
            nm,
            data: out,
            dropped,
        }
    }

    /// Mode vectors at `x_{j0+i} + shift`, `i = 0..count`, where `x_j` is this
    /// layout's grid. All points share one fractional offset, so one stencil
    /// serves the whole run.
    pub fn shifted(&self, shift: f64, j0: i64, count: usize) -> Block {
        let order = self.setup.order();
        let nm = self.setup.modes();
        let t = shift / self.h();
        let base = t.floor();
        let frac = t - base;
        let base = base as i64;
        let half = (order / 2) as i64;
        let mut w = vec![0.0; order];
        lagrange_weights(order, frac, &mut w);
        let exact = frac == 0.0;
        let lo = j0 + base - half + 1;
        let hi = j0 + count as i64 - 1 + base + half;
        let src = self.block(lo, hi);
        let mut out = vec![ZERO; count * nm];
        for i in 0..count {
            let dst = &mut out[i * nm..(i + 1) * nm];
            let centre = j0 + i as i64 + base;
            if exact {
                dst.copy_from_slice(src.at(centre));
                continue;
            }
            for (s, &wi) in w.iter().enumerate() {
                let row = src.at(centre - half + 1 + s as i64);
                for (d, z) in dst.iter_mut().zip(row) {
                    *d += z * wi;
                }
            }
        }
        Block {
            lo: j0,
            nm,
            data: out,
            dropped: src.dropped,
        }
    }

    /// Mode vectors at arbitrary points.
    pub fn at_points(&self, xs: &[f64]) -> (Vec<C>, f64) {
        let nm = self.setup.modes();
        if xs.is_empty() {
            return (Vec::new(), 0.0);
        }
        let order = self.setup.order();
        let half = (order / 2) as i64;
        let h = self.h();
        let o = self.origin();
        let ts: Vec<f64> = xs.iter().map(|&x| (x - o) / h).collect();
        let lo = ts.iter().fold(f64::INFINITY, |a, &b| a.min(b)).floor() as i64 - half + 1;
        let hi = ts.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).floor() as i64 + half;
        let src = self.block(lo, hi);
        let mut out = vec![ZERO; xs.len() * nm];
        let mut w = vec![0.0; order];
        for (i, &t) in ts.iter().enumerate() {
            let base = t.floor();
            let frac = t - base;
            let base = base as i64;
            let dst = &mut out[i * nm..(i + 1) * nm];
            if frac == 0.0 {
                dst.copy_from_slice(src.at(base));
                continue;
            }
            lagrange_weights(order, frac, &mut w);
            for (s, &wi) in w.iter().enumerate() {
                let row = src.at(base - half + 1 + s as i64);
                for (d, z) in dst.iter_mut().zip(row) {
                    *d += z * wi;
                }
            }
        }
        (out, src.dropped)
    }

    /// x-derivative at every stored grid point, ghosts from the extension.
    pub fn derivative(&self) -> Vec<C> {
        let order = self.setup.order();
        let nm = self.setup.modes();
        let n = self.n() as i64;
        let half = (order / 2) as i64;
        let w = fd_weights(order);
        let inv_h = 1.0 / self.h();
        let src = self.block(-half, n - 1 + half);
        let mut out = vec![ZERO; n as usize * nm];
        for j in 0..n {
            let dst = &mut out[j as usize * nm..(j as usize + 1) * nm];
            for (s, &wi) in w.iter().enumerate() {
                if wi == 0.0 {
                    continue;
                }
                let row = src.at(j - half + s as i64);
                let wi = wi * inv_h;
                for (d, z) in dst.iter_mut().zip(row) {
                    *d += z * wi;
                }
            }
        }
        out
    }
}

fn band(v: &[C]) -> Option<(usize, usize)> {
    let lo = v.iter().position(|z| z.re != 0.0 || z.im != 0.0)?;
    let hi = v.iter().rposition(|z| z.re != 0.0 || z.im != 0.0)?;
    Some((lo, hi))
}

/// `out[a + b + shift] += factor · x[a] · y[b]` over stored mode indices,
/// discarding products that land outside the range. Returns a bound on the
/// discarded mass, `Σ |x_a|₁|y_b|₁` with `|z|₁ = |re| + |im|`.
pub fn conv_acc(out: &mut [C], x: &[C], y: &[C], shift: i64, factor: C) -> f64 {
    let nm = out.len() as i64;
    let r = (nm - 1) / 2;
    let (Some((xa, xb)), Some((ya, yb))) = (band(x), band(y)) else {
        return 0.0;
    };
    // prefix sums of |y_b| over the band, for the discarded mass
    let mut prefix = [0.0f64; 130];
    let mut prefix_heap;
    let prefix: &mut [f64] = if yb - ya + 2 <= prefix.len() {
        &mut prefix[..yb - ya + 2]
    } else {
        prefix_heap = vec![0.0; yb - ya + 2];
        &mut prefix_heap
    };
    let mut run = 0.0;
    for (i, z) in y[ya..=yb].iter().enumerate() {
        run += z.l1_norm();
        prefix[i + 1] = run;
    }
    let y_mass = run;
    let mut dropped = 0.0;
    for (a, &xv) in x.iter().enumerate().take(xb + 1).skip(xa) {
        if xv.re == 0.0 && xv.im == 0.0 {
            continue;
        }
        let off = a as i64 - r + shift;
        // target index a + b - r + shift must lie in [0, nm)
        let b_lo = (ya as i64).max(-off);
        let b_hi = (yb as i64).min(nm - 1 - off);
        if b_lo > b_hi {
            dropped += xv.l1_norm() * y_mass;
            continue;
        }
        let (bl, bh) = (b_lo as usize, b_hi as usize);
        let xv = xv * factor;
        let (xr, xi) = (xv.re, xv.im);
        let dst = &mut out[(b_lo + off) as usize..=(b_hi + off) as usize];
        let src = &y[bl..=bh];
        for (o, yv) in dst.iter_mut().zip(src) {
            o.re += xr * yv.re - xi * yv.im;
            o.im += xr * yv.im + xi * yv.re;
        }
        if bl > ya || bh < yb {
            let kept = prefix[bh + 1 - ya] - prefix[bl - ya];
            dropped += x[a].l1_norm() * (y_mass - kept).max(0.0);
        }
    }
    dropped
}

/// [`conv_acc`] with `shift = 0`, `factor = 1` on split real/imaginary
/// rows, for the hot product loops. `y_mass` is `Σ|y_b|₁`.
pub fn conv_acc_split(out_re: &mut [f64], out_im: &mut [f64], x: &[C], y_re: &[f64], y_im: &[f64]) -> f64 {
    let nm = out_re.len() as i64;
    let r = (nm - 1) / 2;
    let Some((xa, xb)) = band(x) else {
        return 0.0;
    };
    let ya = (0..y_re.len()).find(|&i| y_re[i] != 0.0 || y_im[i] != 0.0);
    let Some(ya) = ya else {
        return 0.0;
    };
    let yb = (0..y_re.len()).rev().find(|&i| y_re[i] != 0.0 || y_im[i] != 0.0).expect("nonempty band");
    let mut prefix = [0.0f64; 130];
    let mut prefix_heap;
    let prefix: &mut [f64] = if yb - ya + 2 <= prefix.len() {
        &mut prefix[..yb - ya + 2]
    } else {
        prefix_heap = vec![0.0; yb - ya + 2];
        &mut prefix_heap
    };
    let mut run = 0.0;
    for i in ya..=yb {
        run += y_re[i].abs() + y_im[i].abs();
        prefix[i - ya + 1] = run;
    }
    let y_mass = run;
    let mut dropped = 0.0;
    for (a, &xv) in x.iter().enumerate().take(xb + 1).skip(xa) {
        if xv.re == 0.0 && xv.im == 0.0 {
            continue;
        }
        let off = a as i64 - r;
        let b_lo = (ya as i64).max(-off);
        let b_hi = (yb as i64).min(nm - 1 - off);
        if b_lo > b_hi {
            dropped += xv.l1_norm() * y_mass;
            continue;
        }
        let (bl, bh) = (b_lo as usize, b_hi as usize);
        let (t0, t1) = ((b_lo + off) as usize, (b_hi + off) as usize);
        let (xr, xi) = (xv.re, xv.im);
        let ore = &mut out_re[t0..=t1];
        let oim = &mut out_im[t0..=t1];
        let yr = &y_re[bl..=bh];
        let yi = &y_im[bl..=bh];
        for ((or, oi), (&a_r, &a_i)) in ore.iter_mut().zip(oim.iter_mut()).zip(yr.iter().zip(yi)) {
            *or += xr * a_r - xi * a_i;
            *oi += xr * a_i + xi * a_r;
        }
        if bl > ya || bh < yb {
            let kept = prefix[bh + 1 - ya] - prefix[bl - ya];
            dropped += xv.l1_norm() * (y_mass - kept).max(0.0);
        }
    }
    dropped
}

/// Coefficients of the complex conjugate function: `out[n] = conj(v[-n])`.
pub fn conj_flip(v: &[C], out: &mut [C]) {
    let m = v.len();
    for i in 0..m {
        out[i] = v[m - 1 - i].conj();
    }
}

/// Multiplies mode `n` by `e(n·s)`, i.e. evaluates the series at `y + s`.
pub fn y_translate(v: &mut [C], s: f64, r: i64) {
    if s == 0.0 {
        return;
    }
    let step = e(s);
    let mut ph = e(-(r as f64) * s);
    for z in v.iter_mut() {
        *z *= ph;
        ph *= step;
    }
}

/// Multiplies each mode `n` by `f(n)`.
pub fn scale_modes(v: &mut [C], r: i64, f: impl Fn(i64) -> C) {
    for (i, z) in v.iter_mut().enumerate() {
        *z *= f(i as i64 - r);
    }
}

/// y-sample values at `y_l = l / M` from mode coefficients.
pub fn synth(setup: &Setup, modes: &[C]) -> Vec<C> {
    let m = modes.len();
    let r = setup.r as usize;
    let mut buf = vec![ZERO; m];
    for (i, &z) in modes.iter().enumerate() {
        let n = i as i64 - r as i64;
        buf[n.rem_euclid(m as i64) as usize] = z;
    }
    setup.fft_inv().process(&mut buf);
    buf
}

/// Mode coefficients from samples at `y_l = l / M`.
pub fn analyze(setup: &Setup, samples: &[C]) -> Vec<C> {
    let m = samples.len();
    let r = setup.r;
    let mut buf = samples.to_vec();
    setup.fft_fwd().process(&mut buf);
    let scale = 1.0 / m as f64;
    (0..m as i64)
        .map(|i| buf[(i - r).rem_euclid(m as i64) as usize] * scale)
        .collect()
}

/// Evaluates a mode vector at one `y`.
pub fn series_at(modes: &[C], r: i64, y: f64) -> C {
    let mut acc = ZERO;
    let step = e(y);
    let mut ph = e(-(r as f64) * y);
    for z in modes {
        acc += z * ph;
        ph *= step;
    }
    acc
}

/// Sup over every (fiber, x-point, y-sample) of `|a - b|`.
pub fn field_defect(setup: &Setup, a: &Field, b: &Field) -> DefectMetric {
    let fmax = a.fmax.max(b.fmax);
    let nm = a.nm;
    let mut worst: f64 = 0.0;
    let mut diff = vec![ZERO; nm];
    for f in -fmax..=fmax {
        let za = a.fiber_is_zero(f);
        let zb = b.fiber_is_zero(f);
        if za && zb {
            continue;
        }
        for j in 0..a.nx {
            for (m, d) in diff.iter_mut().enumerate() {
                let va = if f.abs() <= a.fmax { a.at(f, j)[m] } else { ZERO };
                let vb = if f.abs() <= b.fmax { b.at(f, j)[m] } else { ZERO };
                *d = va - vb;
            }
            for v in synth(setup, &diff) {
                worst = worst.max(v.norm());
            }
        }
    }
    DefectMetric(worst)
}
