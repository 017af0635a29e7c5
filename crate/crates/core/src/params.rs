//! Algebra parameters, truncation contract and the validated [`Setup`] every
//! element is built against.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};

/// The triple (c, μ, ν). ħ is fixed at 1 and is not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraParams {
    pub c: i64,
    pub mu: f64,
    pub nu: f64,
}

impl AlgebraParams {
    /// μ = √2/4, ν = √3/5, c = 1.
    pub fn standard() -> Self {
        AlgebraParams {
            c: 1,
            mu: 2f64.sqrt() / 4.0,
            nu: 3f64.sqrt() / 5.0,
        }
    }
}

/// Discretization cutoffs and defect thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub p_max: i64,
    pub k_max: i64,
    pub y_modes: i64,
    pub x_step: f64,
    pub x_window: f64,
    pub interp_order: i64,
    pub tol_algebra: f64,
    pub tol_gauge: f64,
}

impl TruncationSpec {
    pub fn standard() -> Self {
        TruncationSpec {
            p_max: 3,
            k_max: 3,
            y_modes: 33,
            x_step: 1.0 / 64.0,
            x_window: 6.0,
            interp_order: 8,
            tol_algebra: 1e-8,
            tol_gauge: 1e-7,
        }
    }
}

/// On-disk configuration. Keys match the JSON document exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ConfigFile {
    pub c: i64,
    pub mu: f64,
    pub nu: f64,
    pub p_max: i64,
    pub k_max: i64,
    pub y_modes: i64,
    pub x_step: f64,
    pub x_window: f64,
    pub interp_order: i64,
    pub tol_algebra: f64,
    pub tol_gauge: f64,
    pub seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from_parts(AlgebraParams::standard(), TruncationSpec::standard(), 7)
    }
}

impl ConfigFile {
    pub fn from_parts(p: AlgebraParams, t: TruncationSpec, seed: u64) -> Self {
        ConfigFile {
            c: p.c,
            mu: p.mu,
            nu: p.nu,
            p_max: t.p_max,
            k_max: t.k_max,
            y_modes: t.y_modes,
            x_step: t.x_step,
            x_window: t.x_window,
            interp_order: t.interp_order,
            tol_algebra: t.tol_algebra,
            tol_gauge: t.tol_gauge,
            seed,
        }
    }

    pub fn params(&self) -> AlgebraParams {
        AlgebraParams {
            c: self.c,
            mu: self.mu,
            nu: self.nu,
        }
    }

    pub fn trunc(&self) -> TruncationSpec {
        TruncationSpec {
            p_max: self.p_max,
            k_max: self.k_max,
            y_modes: self.y_modes,
            x_step: self.x_step,
            x_window: self.x_window,
            interp_order: self.interp_order,
            tol_algebra: self.tol_algebra,
            tol_gauge: self.tol_gauge,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::ConfigNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<Arc<Setup>> {
        validate(self.params(), self.trunc(), self.seed)
    }
}

/// Uniform grid on a fundamental domain `[0, n·h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// Grid on the module window `[-half·h, half·h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    pub half: usize,
    pub h: f64,
}

impl WindowGrid {
    pub fn points(&self) -> usize {
        2 * self.half + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn edge(&self) -> f64 {
        self.half as f64 * self.h
    }
}

/// A validated configuration with derived grids. Shared by reference
/// between every element built on it.
pub struct Setup {
    pub params: AlgebraParams,
    pub trunc: TruncationSpec,
    pub seed: u64,
    /// Highest stored y-mode; modes run over `-r..=r`.
    pub r: i64,
    pub d_grid: Grid,
    pub e_grid: Grid,
    pub xi_grid: WindowGrid,
    hash: String,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Setup")
            .field("params", &self.params)
            .field("trunc", &self.trunc)
            .field("d_grid", &self.d_grid)
            .field("e_grid", &self.e_grid)
            .field("xi_grid", &self.xi_grid)
            .field("hash", &self.hash)
            .finish()
    }
}

impl Setup {
    pub fn modes(&self) -> usize {
        (2 * self.r + 1) as usize
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn config(&self) -> ConfigFile {
        ConfigFile::from_parts(self.params, self.trunc, self.seed)
    }

    pub fn order(&self) -> usize {
        self.trunc.interp_order as usize
    }

    pub fn p_max(&self) -> i64 {
        self.trunc.p_max
    }

    pub fn k_max(&self) -> i64 {
        self.trunc.k_max
    }

    pub fn same_as(&self, other: &Setup) -> bool {
        std::ptr::eq(self, other) || self.hash == other.hash
    }

    /// Same configuration with `x_step` divided by `factor`.
    pub fn refined(&self, factor: u32) -> Result<Arc<Setup>> {
        let mut t = self.trunc;
        t.x_step /= factor as f64;
        validate(self.params, t, self.seed)
    }

    pub(crate) fn fft_fwd(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_fwd
    }

    pub(crate) fn fft_inv(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_inv
    }
}

/// Checks every invariant of the parameter triple and the truncation
/// contract; all violations are reported together.
pub fn validate(params: AlgebraParams, trunc: TruncationSpec, seed: u64) -> Result<Arc<Setup>> {
    let mut bad = Vec::new();
    let mut fail = |field: &'static str, bound: String| bad.push(Violation { field, bound });

    if params.c < 1 {
        fail("c", format!("must be a positive integer, got {}", params.c));
    }
    if !params.mu.is_finite() || params.mu == 0.0 {
        fail("mu", format!("must be nonzero and finite, got {}", params.mu));
    } else if params.mu < 0.0 {
        fail("mu", format!("negative mu is not supported, got {}", params.mu));
    }
    if !params.nu.is_finite() || params.nu == 0.0 {
        fail("nu", format!("must be nonzero and finite, got {}", params.nu));
    }
    if trunc.p_max < 1 {
        fail("pMax", format!("must be >= 1, got {}", trunc.p_max));
    }
    if trunc.k_max < 1 {
        fail("kMax", format!("must be >= 1, got {}", trunc.k_max));
    }
    let need_modes = 2 * params.c.max(1) * trunc.p_max.max(1) * trunc.k_max.max(1) + 1;
    if trunc.y_modes < 1 || trunc.y_modes % 2 == 0 {
        fail("yModes", format!("must be a positive odd integer, got {}", trunc.y_modes));
    } else if trunc.y_modes < need_modes {
        fail(
            "yModes",
            format!("needs >= {need_modes} (2*c*pMax*kMax+1), got {}", trunc.y_modes),
        );
    }
    let step_ok = trunc.x_step.is_finite() && trunc.x_step > 0.0 && trunc.x_step <= 0.25;
    if !step_ok {
        fail("xStep", format!("must lie in (0, 1/4], got {}", trunc.x_step));
    }
    if trunc.interp_order < 2 || trunc.interp_order % 2 != 0 {
        fail(
            "interpOrder",
            format!("must be an even integer >= 2, got {}", trunc.interp_order),
        );
    }
    let reach = 2.0 * trunc.p_max.max(0) as f64 * params.mu.abs() + trunc.k_max.max(0) as f64;
    if !trunc.x_window.is_finite() || trunc.x_window < reach {
        fail(
            "xWindow",
            format!("needs >= 2*pMax*|mu| + kMax = {reach:.6}, got {}", trunc.x_window),
        );
    }
    if !(trunc.tol_algebra.is_finite() && trunc.tol_algebra > 0.0) {
        fail("tolAlgebra", format!("must be positive, got {}", trunc.tol_algebra));
    }
    if !(trunc.tol_gauge.is_finite() && trunc.tol_gauge > 0.0) {
        fail("tolGauge", format!("must be positive, got {}", trunc.tol_gauge));
    }
    if !bad.is_empty() {
        return Err(Error::InvalidParameter(bad));
    }

    let n_d = (1.0 / trunc.x_step).round().max(1.0) as usize;
    let d_grid = Grid {
        n: n_d,
        h: 1.0 / n_d as f64,
    };
    let n_e = (2.0 * params.mu / trunc.x_step).round().max(2.0) as usize;
    let e_grid = Grid {
        n: n_e,
        h: 2.0 * params.mu / n_e as f64,
    };
    let half = (trunc.x_window / d_grid.h).round() as usize;
    let xi_grid = WindowGrid { half, h: d_grid.h };

    let file = ConfigFile::from_parts(params, trunc, seed);
    let canon = serde_json::to_string(&file)?;
    let digest = Sha256::digest(canon.as_bytes());
    let hash = digest.iter().map(|b| format!("{b:02x}")).collect::<String>();

    let m = trunc.y_modes as usize;
    let mut planner = FftPlanner::new();
    let fft_fwd = planner.plan_fft_forward(m);
    let fft_inv = planner.plan_fft_inverse(m);

    Ok(Arc::new(Setup {
        params,
        trunc,
        seed,
        r: (trunc.y_modes - 1) / 2,
        d_grid,
        e_grid,
        xi_grid,
        hash,
        fft_fwd,
        fft_inv,
    }))
}

/// Sup-norm of a difference over a declared sample set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct DefectMetric(pub f64);

impl DefectMetric {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn max(self, other: DefectMetric) -> DefectMetric {
        DefectMetric(self.0.max(other.0))
    }
}

impl fmt::Display for DefectMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3e}", self.0)
    }
}
