//! Finite-dimensional search over skew-adjoint perturbations `ρ` of the
//! reference connection: gradients, descent and a sampled minimality sweep.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ealgebra::{e_star, e_trace_product, Calibration, EElement, TracePartner};
use crate::error::{Error, Result};
use crate::gauge::{curvature, omega_energy, ym_from_curvature, ym_operator, ym_value, Connection, Direction};
use crate::numerics::{C, I};
use crate::params::Setup;
use crate::samples::{self, Profile};

/// Bumps per fiber, their width, and the y-modes each bump carries.
const BUMPS: usize = 3;
const BUMP_SIGMA: f64 = 0.3;
const BASIS_MODES: i64 = 2;

/// Gram eigenvalue ratio below which the basis is rejected.
const MIN_GRAM_RATIO: f64 = 1e-12;

/// An orthonormal (for `Re τ_E(a*b)`) family of skew-adjoint elements, used
/// identically in each of the three directions.
#[derive(Debug, Clone)]
pub struct PerturbationBasis {
    pub elements: Vec<EElement>,
    partners: Vec<TracePartner>,
    /// Condition number of the Gram matrix of the raw generators.
    pub condition: f64,
}

impl PerturbationBasis {
    /// Periodized x-bumps at `BUMPS` centres across the fundamental domain,
    /// in fibers `k ∈ {0, ±1}` with y-modes `|n| ≤ 2`, made skew as
    /// `χ − χ*` and `i(χ + χ*)`, then orthonormalized.
    pub fn standard(setup: &Arc<Setup>, cal: &Calibration) -> Result<Self> {
        let mu = setup.params.mu;
        let mut raw = Vec::new();
        for b in 0..BUMPS {
            let x0 = 2.0 * mu * (b as f64 + 0.5) / BUMPS as f64;
            for n in 0..=BASIS_MODES {
                let chi = samples::periodized_e(setup, 0, BUMP_SIGMA, x0, &Profile::single(n, C::new(1.0, 0.0)));
                push_skew(&mut raw, &chi, n != 0)?;
            }
            for n in -BASIS_MODES..=BASIS_MODES {
                let chi = samples::periodized_e(setup, 1, BUMP_SIGMA, x0, &Profile::single(n, C::new(1.0, 0.0)));
                push_skew(&mut raw, &chi, true)?;
            }
        }
        Self::orthonormalize(raw, cal)
    }

    /// Whitens `raw` with the inverse square root of its Gram matrix.
    pub fn orthonormalize(raw: Vec<EElement>, cal: &Calibration) -> Result<Self> {
        let n = raw.len();
        let stars: Vec<EElement> = raw.iter().map(e_star).collect();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let g = e_trace_product(&stars[a], &raw[b], cal)?.re;
                gram[(a, b)] = g;
                gram[(b, a)] = g;
            }
        }
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if !(lmin > MIN_GRAM_RATIO * lmax) {
            return Err(Error::DegenerateBasis { condition });
        }
        let mut elements = Vec::with_capacity(n);
        for i in 0..n {
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            let mut acc = EElement::zero(raw[0].setup());
            for (a, r) in raw.iter().enumerate() {
                acc = acc.axpy(C::new(eig.eigenvectors[(a, i)] * s, 0.0), r)?;
            }
            elements.push(acc);
        }
        let partners = elements.iter().map(TracePartner::new).collect();
        Ok(PerturbationBasis {
            elements,
            partners,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Length of a coefficient vector: one block of `dim` per direction.
    pub fn coeff_len(&self) -> usize {
        3 * self.dim()
    }

    pub fn setup(&self) -> &Arc<Setup> {
        self.elements[0].setup()
    }
}

fn push_skew(out: &mut Vec<EElement>, chi: &EElement, both: bool) -> Result<()> {
    let st = e_star(chi);
    if both {
        out.push(chi.sub(&st)?);
    }
    out.push(chi.add(&st)?.scale(I));
    Ok(())
}

/// Gradient descent settings. `step` is the fallback trial step when the
/// measured curvature along the gradient is not positive; `fd_step` is the
/// displacement used to measure that curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentConfig {
    pub step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
    pub seed: u64,
    /// Consecutive steps sized by the local curvature along `−g`.
    pub cauchy_steps: usize,
    /// Consecutive steps at the fixed size derived from the last two
    /// curvature-sized steps.
    pub constant_steps: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            step: 0.01,
            max_iter: 1000,
            grad_tol: 1e-7,
            fd_step: 1e-6,
            seed: 7,
            cauchy_steps: 4,
            constant_steps: 8,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.step.is_finite()
            && self.cauchy_steps >= 2
            && self.constant_steps >= 1
            && self.max_iter >= 1
            && self.grad_tol > 0.0
            && self.fd_step > 0.0
            && self.fd_step <= 1e-2;
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!("descent config {self:?}")))
        }
    }
}

/// `ρ_d = Σ_a coeffs[d·dim + a]·basis[a]`.
pub fn rho_from_coeffs(basis: &PerturbationBasis, coeffs: &[f64]) -> Result<Connection> {
    let dim = basis.dim();
    if coeffs.len() != 3 * dim {
        return Err(Error::DimensionMismatch {
            expected: 3 * dim,
            got: coeffs.len(),
        });
    }
    if let Some(bad) = coeffs.iter().find(|v| !v.is_finite()) {
        return Err(Error::OutOfRange(format!("non-finite coefficient {bad}")));
    }
    let mut rho = Vec::with_capacity(3);
    for d in 0..3 {
        rho.push(combine(&basis.elements, &coeffs[d * dim..(d + 1) * dim]));
    }
    Connection::new(rho.try_into().expect("three directions"))
}

/// `Σ_a w_a·e_a` accumulated in one buffer.
fn combine(elements: &[EElement], weights: &[f64]) -> EElement {
    let first = &elements[0];
    let mut field = first.field().map(|_| crate::numerics::ZERO);
    let mut budget = 0.0;
    for (el, &w) in elements.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (d, s) in field.data.iter_mut().zip(&el.field().data) {
            *d += s * w;
        }
        budget += w.abs() * el.truncation_budget();
    }
    EElement::from_parts(first.setup(), field, budget)
}

/// Central differences of `YM` along each coefficient.
pub fn ym_gradient(basis: &PerturbationBasis, coeffs: &[f64], fd_step: f64, cal: &Calibration) -> Result<Vec<f64>> {
    if !(fd_step > 0.0 && fd_step <= 1e-2) {
        return Err(Error::OutOfRange(format!("fdStep {fd_step} outside (0, 1e-2]")));
    }
    let mut work = coeffs.to_vec();
    let mut grad = Vec::with_capacity(coeffs.len());
    for i in 0..coeffs.len() {
        work[i] = coeffs[i] + fd_step;
        let up = ym_value(&rho_from_coeffs(basis, &work)?, cal)?;
        work[i] = coeffs[i] - fd_step;
        let down = ym_value(&rho_from_coeffs(basis, &work)?, cal)?;
        work[i] = coeffs[i];
        grad.push((up - down) / (2.0 * fd_step));
    }
    Ok(grad)
}

/// `YM` and its exact gradient: `∂YM/∂c_{d,a} = −2 Re τ_E(G_d b_a)` where
/// `G` is `∇̂*Θ` (trace of a derivation vanishes, so the derivative of `Θ`
/// moves onto `Θ` by parts).
pub fn ym_with_gradient(basis: &PerturbationBasis, coeffs: &[f64], cal: &Calibration) -> Result<(f64, Vec<f64>)> {
    let conn = rho_from_coeffs(basis, coeffs)?;
    let theta = curvature(&conn)?;
    let ym = ym_from_curvature(&theta, cal)?;
    let g = ym_operator(&conn, &theta)?;
    let mut grad = Vec::with_capacity(basis.coeff_len());
    for d in Direction::ALL {
        for p in &basis.partners {
            grad.push(-2.0 * p.trace_with(&g[d.index()], cal).re);
        }
    }
    Ok((ym, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DescentStatus {
    GradTol,
    MaxIter,
    /// No step along the gradient decreased `YM` any more.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentResult {
    pub final_coeffs: Vec<f64>,
    pub final_ym: f64,
    pub history: Vec<f64>,
    pub status: DescentStatus,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

/// Gradient descent with backtracking halving; a step is accepted only if
/// it lowers `YM`. Trial step sizes alternate between runs of curvature
/// steps `|g|²/gᵀHg` (with `Hg` from a gradient difference) and runs of the
/// fixed step `1/(1/α₁ + 1/α₂)` built from the last two of them, which damps
/// the slow zig-zag of steepest descent on ill-conditioned valleys.
pub fn descend(basis: &PerturbationBasis, config: &DescentConfig, init: &[f64], cal: &Calibration) -> Result<DescentResult> {
    config.validate()?;
    let mut x = init.to_vec();
    let (mut ym, mut g) = ym_with_gradient(basis, &x, cal)?;
    let mut history = vec![ym];
    let mut status = DescentStatus::MaxIter;
    let mut iterations = 0;
    let mut phase = Phase::Cauchy { done: 0, last: None };
    while iterations < config.max_iter {
        if inf_norm(&g) < config.grad_tol {
            status = DescentStatus::GradTol;
            break;
        }
        iterations += 1;
        let mut t = match phase {
            Phase::Cauchy { done, last } => {
                let a = cauchy_step(basis, &x, &g, config, cal)?;
                phase = match last {
                    Some(prev) if done + 1 >= config.cauchy_steps => Phase::Constant {
                        done: 0,
                        step: 1.0 / (1.0 / prev + 1.0 / a),
                    },
                    _ => Phase::Cauchy {
                        done: done + 1,
                        last: Some(a),
                    },
                };
                a
            }
            Phase::Constant { done, step } => {
                phase = if done + 1 >= config.constant_steps {
                    Phase::Cauchy { done: 0, last: None }
                } else {
                    Phase::Constant { done: done + 1, step }
                };
                step
            }
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let ym_t = ym_value(&rho_from_coeffs(basis, &trial)?, cal)?;
            if ym_t < ym {
                accepted = Some((trial, ym_t));
                break;
            }
            t *= 0.5;
        }
        let Some((nx, nym)) = accepted else {
            status = DescentStatus::Stalled;
            break;
        };
        let (_, ng) = ym_with_gradient(basis, &nx, cal)?;
        x = nx;
        ym = nym;
        g = ng;
        history.push(ym);
    }
    Ok(DescentResult {
        final_grad_norm: inf_norm(&g),
        final_coeffs: x,
        final_ym: ym,
        history,
        status,
        iterations,
    })
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Cauchy { done: usize, last: Option<f64> },
    Constant { done: usize, step: f64 },
}

/// `|g|²/gᵀHg`, with `Hg` the forward difference of the gradient over a
/// displacement of length `fd_step` along `g`; falls back to `config.step`
/// where the curvature is not positive.
fn cauchy_step(basis: &PerturbationBasis, x: &[f64], g: &[f64], config: &DescentConfig, cal: &Calibration) -> Result<f64> {
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let eps = config.fd_step / gg.sqrt();
    let shifted: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + eps * b).collect();
    let (_, gs) = ym_with_gradient(basis, &shifted, cal)?;
    let ghg: f64 = gs.iter().zip(g).map(|(a, b)| (a - b) * b).sum::<f64>() / eps;
    Ok(if ghg > 0.0 { gg / ghg } else { config.step })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// A uniformly random direction on the unit sphere of coefficient space.
pub fn random_direction(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// One sampled perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub sample: usize,
    pub direction: usize,
    pub scale: f64,
    pub gap: f64,
    pub omega_energy: f64,
}

impl SweepRow {
    pub fn agreement(&self) -> f64 {
        (self.gap - self.omega_energy).abs()
    }
}

/// Samples `ρ = scale·v` for unit directions `v`; each direction is used
/// once at every scale so the scaling of the gap can be read off.
/// `n_samples` counts rows in total.
pub fn minimality_sweep(
    basis: &PerturbationBasis,
    n_samples: usize,
    scales: &[f64],
    seed: u64,
    cal: &Calibration,
) -> Result<Vec<SweepRow>> {
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::OutOfRange(format!("scales {scales:?} must be positive")));
    }
    let ym0 = ym_value(&Connection::trivial(basis.setup()), cal)?;
    let mut rng = samples::rng(seed, 0x5EE9);
    let mut rows = Vec::with_capacity(n_samples);
    let mut dir = Vec::new();
    for i in 0..n_samples {
        let si = i % scales.len();
        if si == 0 {
            dir = random_direction(basis.coeff_len(), &mut rng);
        }
        let scale = scales[si];
        let coeffs: Vec<f64> = dir.iter().map(|a| a * scale).collect();
        let conn = rho_from_coeffs(basis, &coeffs)?;
        rows.push(SweepRow {
            sample: i,
            direction: i / scales.len(),
            scale,
            gap: ym_value(&conn, cal)? - ym0,
            omega_energy: omega_energy(&conn, cal)?,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log gap` against `log scale` for each direction
/// that has at least two positive gaps at scales at most `max_scale`.
pub fn gap_slopes(rows: &[SweepRow], max_scale: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let ndir = rows.iter().map(|r| r.direction + 1).max().unwrap_or(0);
    for d in 0..ndir {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.direction == d && r.scale <= max_scale && r.gap > 0.0)
            .map(|r| (r.scale.ln(), r.gap.ln()))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        out.push(sxy / sxx);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ConfigFile;

    #[test]
    fn config_validation() {
        assert!(DescentConfig::default().validate().is_ok());
        let bad = DescentConfig {
            fd_step: 0.1,
            ..DescentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DescentConfig {
            max_iter: 0,
            ..DescentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_direction_is_unit() {
        let mut rng = samples::rng(1, 1);
        let v = random_direction(20, &mut rng);
        let n: f64 = v.iter().map(|a| a * a).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slopes_of_exact_quadratic() {
        let rows: Vec<SweepRow> = [0.01, 0.1, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| SweepRow {
                sample: i,
                direction: 0,
                scale: s,
                gap: 3.0 * s * s,
                omega_energy: 3.0 * s * s,
            })
            .collect();
        let sl = gap_slopes(&rows, 1.0);
        assert_eq!(sl.len(), 1);
        assert!((sl[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let s = ConfigFile::default().validate().unwrap();
        let cal = Calibration::assumed(1.0);
        let basis = PerturbationBasis::standard(&s, &cal).unwrap();
        assert!(matches!(
            rho_from_coeffs(&basis, &[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
