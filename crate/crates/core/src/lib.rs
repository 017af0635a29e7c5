//! Numerical laboratory for the quantum Heisenberg manifold algebra
//! `D^c_{μν}`, its Morita-dual algebra `E^c_{μν}`, the bimodule `Ξ` between
//! them, and the Yang–Mills functional on connections of `Ξ`.
//!
//! Elements store y-Fourier coefficients on an x-grid per fiber; all
//! identities are checked as grid sup-norm defects ([`DefectMetric`]).

// `!(a < b)` is used on purpose so that NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dalgebra;
pub mod ealgebra;
pub mod error;
pub mod gauge;
pub mod harness;
pub mod minimize;
pub mod numerics;
pub mod params;
pub mod serial;
pub mod samples;
pub mod ximodule;

pub use dalgebra::DElement;
pub use ealgebra::{Calibration, EElement};
pub use error::{Error, Result};
pub use gauge::{Connection, CurvatureForm, Direction};
pub use numerics::C;
pub use params::{AlgebraParams, ConfigFile, DefectMetric, Setup, TruncationSpec};
pub use ximodule::XiElement;

/// Shared linear-space plumbing for the three element types. Each type
/// provides `with_field` to rebuild itself around new data.
macro_rules! linear_element {
    ($t:ty) => {
        impl $t {
            pub fn setup(&self) -> &std::sync::Arc<$crate::params::Setup> {
                &self.setup
            }

            /// Coefficient mass discarded by mode or fiber truncation while
            /// building this element, accumulated over its history.
            pub fn truncation_budget(&self) -> f64 {
                self.budget
            }

            pub(crate) fn field(&self) -> &$crate::numerics::Field {
                &self.field
            }

            fn check_same(&self, other: &Self) -> $crate::error::Result<()> {
                if self.setup.same_as(&other.setup) && self.field.same_shape(&other.field) {
                    Ok(())
                } else {
                    Err($crate::error::Error::ConfigMismatch)
                }
            }

            pub fn add(&self, other: &Self) -> $crate::error::Result<Self> {
                self.check_same(other)?;
                Ok(self.with_field(
                    self.field.zip(&other.field, |a, b| a + b),
                    self.budget + other.budget,
                ))
            }

            pub fn sub(&self, other: &Self) -> $crate::error::Result<Self> {
                self.check_same(other)?;
                Ok(self.with_field(
                    self.field.zip(&other.field, |a, b| a - b),
                    self.budget + other.budget,
                ))
            }

            pub fn scale(&self, s: $crate::numerics::C) -> Self {
                self.with_field(self.field.map(|a| a * s), self.budget * s.norm())
            }

            /// `self + s·other`
            pub fn axpy(&self, s: $crate::numerics::C, other: &Self) -> $crate::error::Result<Self> {
                self.check_same(other)?;
                Ok(self.with_field(
                    self.field.zip(&other.field, |a, b| a + s * b),
                    self.budget + s.norm() * other.budget,
                ))
            }

            /// Grid sup-norm of `self - other` over every fiber, x-point and
            /// y-sample.
            pub fn defect(&self, other: &Self) -> $crate::error::Result<$crate::params::DefectMetric> {
                self.check_same(other)?;
                Ok($crate::numerics::field_defect(&self.setup, &self.field, &other.field))
            }

            pub fn sup_norm(&self) -> f64 {
                let zero = self.with_field(self.field.map(|_| $crate::numerics::ZERO), 0.0);
                $crate::numerics::field_defect(&self.setup, &self.field, &zero.field).value()
            }

            pub fn is_zero(&self) -> bool {
                self.field.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
            }
        }
    };
}

pub(crate) use linear_element;
