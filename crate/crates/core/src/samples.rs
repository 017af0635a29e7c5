//! Seeded test-vector factories: Gaussians in `Ξ`, periodized Gaussians in
//! `D` and `E`, skew-adjoint generators and unitaries.
//!
//! Every element is twist-consistent by construction (a sum over the twist
//! orbit of a rapidly decaying seed), so no truncation enters except the
//! orbit cutoff, which sits far below every tolerance.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dalgebra::DElement;
use crate::ealgebra::{e_exp, e_star, EElement};
use crate::error::Result;
use crate::numerics::{analyze, e, Field, C, ZERO};
use crate::params::Setup;
use crate::ximodule::{gaussian_vector, XiElement};

/// Orbit terms kept on each side when periodizing.
const ORBIT: i64 = 8;

/// Deterministic generator for one named stream of a seed.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A unit Gaussian `gaussian_vector(a, n0, x0)` with `a ∈ [2.5, 3.5]`,
/// `|x0| ≤ 1/4`, `n0 ∈ {−1, 0, 1}`. The width keeps every inner-product
/// overlap beyond the fiber cutoff below 1e-9.
pub fn random_gaussian(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> Result<XiElement> {
    let a = rng.random_range(2.5..3.5);
    let x0 = rng.random_range(-0.25..0.25);
    let n0 = rng.random_range(-1..=1);
    gaussian_vector(setup, a, n0, x0)
}

/// Two random Gaussians sharing a y-mode, so `∫ f ḡ` is bounded away from 0.
pub fn gaussian_pair(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> Result<(XiElement, XiElement)> {
    let n0 = rng.random_range(-1..=1);
    let a1 = rng.random_range(2.5..3.5);
    let a2 = rng.random_range(2.5..3.5);
    let x1 = rng.random_range(-0.25..0.25);
    let x2 = x1 + rng.random_range(-0.2..0.2);
    Ok((gaussian_vector(setup, a1, n0, x1)?, gaussian_vector(setup, a2, n0, x2)?))
}

/// A random linear combination of two Gaussians with complex weights.
pub fn random_vector(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> Result<XiElement> {
    let f = random_gaussian(setup, rng)?;
    let g = random_gaussian(setup, rng)?;
    let w = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    f.axpy(w * 0.5, &g)
}

/// A y-profile `Σ_{|n| ≤ nmax} c_n e(ny)` with random complex weights.
#[derive(Debug, Clone)]
pub struct Profile {
    pub coeffs: Vec<(i64, C)>,
}

impl Profile {
    pub fn random(rng: &mut ChaCha8Rng, nmax: i64) -> Self {
        let coeffs = (-nmax..=nmax)
            .map(|n| (n, C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        Profile { coeffs }
    }

    pub fn single(n: i64, w: C) -> Self {
        Profile {
            coeffs: vec![(n, w)],
        }
    }
}

/// Fiber `p` of `Σ_k ē(ckp(y − pν)) h(x+k, y)` with
/// `h(x, y) = exp(−πa(x − x0)²)·profile(y)`. Built directly in mode space.
pub fn periodized_d(setup: &Arc<Setup>, p: i64, a: f64, x0: f64, profile: &Profile) -> DElement {
    let n = setup.d_grid.n;
    let nm = setup.modes();
    let r = setup.r;
    let c = setup.params.c;
    let nu = setup.params.nu;
    let mut field = Field::zeros(setup.p_max(), n, nm);
    for j in 0..n {
        let x = setup.d_grid.x(j);
        let row = field.at_mut(p, j);
        for k in -ORBIT..=ORBIT {
            let g = (-PI * a * (x + k as f64 - x0).powi(2)).exp();
            if g < 1e-300 {
                continue;
            }
            // ē(ckp(y − pν)) shifts mode by −ckp and contributes e(ckp²ν)
            let shift = -c * k * p;
            let ph = e((c * k * p * p) as f64 * nu) * g;
            for &(m, w) in &profile.coeffs {
                let t = m + shift + r;
                if t >= 0 && t < nm as i64 {
                    row[t as usize] += w * ph;
                }
            }
        }
    }
    DElement::from_parts(setup, field, 0.0)
}

/// Random element of `D` supported in fibers `|p| ≤ 1`, y-modes `|n| ≤ 2`
/// before the twist shift.
pub fn random_d(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> DElement {
    let mut out = DElement::zero(setup);
    for p in -1..=1 {
        let a = rng.random_range(1.5..3.0);
        let x0 = rng.random_range(0.0..1.0);
        let prof = Profile::random(rng, 2);
        let part = periodized_d(setup, p, a, x0, &prof).scale(C::new(0.3, 0.0));
        out = out.add(&part).expect("same setup");
    }
    out
}

/// Fiber `k` of `Σ_p ē(ckp(y − pν)) s(x − 2pμ, y − 2pν)` with
/// `s(x, y) = exp(−(x − x0)²/(2σ²))·profile(y)`.
pub fn periodized_e(
    setup: &Arc<Setup>,
    k: i64,
    sigma: f64,
    x0: f64,
    profile: &Profile,
) -> EElement {
    let n = setup.e_grid.n;
    let nm = setup.modes();
    let r = setup.r;
    let c = setup.params.c;
    let mu = setup.params.mu;
    let nu = setup.params.nu;
    let mut field = Field::zeros(setup.p_max(), n, nm);
    for j in 0..n {
        let x = setup.e_grid.x(j);
        let row = field.at_mut(k, j);
        for p in -ORBIT..=ORBIT {
            let u = x - 2.0 * p as f64 * mu - x0;
            let g = (-u * u / (2.0 * sigma * sigma)).exp();
            if g < 1e-300 {
                continue;
            }
            let shift = -c * k * p;
            let ph = e((c * k * p * p) as f64 * nu) * g;
            for &(m, w) in &profile.coeffs {
                // s(·, y − 2pν) multiplies mode m by e(−2pνm)
                let t = m + shift + r;
                if t >= 0 && t < nm as i64 {
                    row[t as usize] += w * ph * e(-2.0 * p as f64 * nu * m as f64);
                }
            }
        }
    }
    EElement::from_parts(setup, field, 0.0)
}

/// Random element of `E` supported in fibers `|k| ≤ 1`. Widths stay at
/// 0.25 or more so that `ψ** = ψ` holds to 1e-9 through interpolation.
pub fn random_e(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> EElement {
    let mut out = EElement::zero(setup);
    for k in -1..=1 {
        let sigma = rng.random_range(0.25..0.35);
        let x0 = rng.random_range(0.0..2.0 * setup.params.mu);
        let prof = Profile::random(rng, 2);
        let part = periodized_e(setup, k, sigma, x0, &prof).scale(C::new(0.3, 0.0));
        out = out.add(&part).expect("same setup");
    }
    out
}

/// `(χ − χ*)/2` for a random `χ`: skew-adjoint by construction.
pub fn random_skew_e(setup: &Arc<Setup>, rng: &mut ChaCha8Rng) -> EElement {
    let chi = random_e(setup, rng);
    chi.sub(&e_star(&chi)).expect("same setup").scale(C::new(0.5, 0.0))
}

/// `e_exp(ψ)` for a random skew `ψ` in fiber 0 with y-modes `|n| ≤ 1` and
/// sup-norm at most `amplitude`.
pub fn random_unitary(setup: &Arc<Setup>, rng: &mut ChaCha8Rng, amplitude: f64) -> Result<EElement> {
    let sigma = rng.random_range(0.25..0.35);
    let x0 = rng.random_range(0.0..2.0 * setup.params.mu);
    let prof = Profile::random(rng, 1);
    let chi = periodized_e(setup, 0, sigma, x0, &prof);
    let skew = chi.sub(&e_star(&chi))?.scale(C::new(0.5, 0.0));
    let norm = skew.sup_norm().max(1e-300);
    e_exp(&skew.scale(C::new(amplitude / norm, 0.0)))
}

/// A y-constant Gaussian bump `exp(−(x − x0)²/(2w²))` at fiber 0 of `E`,
/// periodized: used for scalar-like perturbations.
pub fn bump_e0(setup: &Arc<Setup>, sigma: f64, x0: f64) -> EElement {
    periodized_e(setup, 0, sigma, x0, &Profile::single(0, C::new(1.0, 0.0)))
}

/// Samples a D element from closed-form per-fiber functions, without a
/// twist check. Used by oracles that need data off the grid.
pub fn d_from_fibers(setup: &Arc<Setup>, f: impl Fn(f64, f64, i64) -> C, fibers: &[i64]) -> DElement {
    let m = setup.modes();
    let mut field = Field::zeros(setup.p_max(), setup.d_grid.n, m);
    let mut buf = vec![ZERO; m];
    for &p in fibers {
        for j in 0..setup.d_grid.n {
            let x = setup.d_grid.x(j);
            for (l, b) in buf.iter_mut().enumerate() {
                *b = f(x, l as f64 / m as f64, p);
            }
            field.at_mut(p, j).copy_from_slice(&analyze(setup, &buf));
        }
    }
    DElement::from_parts(setup, field, 0.0)
}

