//! Element serialization: a JSON document whose header identifies the
//! configuration and shape, with the coefficient tensor as base64 of
//! little-endian `f64` pairs `(re, im)`.
//!
//! Tensor order is row-major over `(fiber, mode n, x-index j)` for `D` and
//! `E`, and `(mode n, x-index j)` for `Ξ`.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::dalgebra::DElement;
use crate::ealgebra::EElement;
use crate::error::{Error, Result};
use crate::numerics::{Field, C};
use crate::params::Setup;
use crate::ximodule::XiElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    D,
    E,
    Xi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Header {
    pub kind: ElementKind,
    pub config_hash: String,
    pub p_max: i64,
    pub y_modes: usize,
    pub grid_size: usize,
    pub truncation_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Document {
    header: Header,
    data: String,
}

/// Elements that serialize through [`to_json`] and [`from_json`].
pub trait Serial: Sized {
    const KIND: ElementKind;
    #[doc(hidden)]
    fn parts(&self) -> (&Arc<Setup>, &Field, f64);
    #[doc(hidden)]
    fn build(setup: &Arc<Setup>, field: Field, budget: f64) -> Self;
}

impl Serial for DElement {
    const KIND: ElementKind = ElementKind::D;
    fn parts(&self) -> (&Arc<Setup>, &Field, f64) {
        (self.setup(), self.field(), self.truncation_budget())
    }
    fn build(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        DElement::from_parts(setup, field, budget)
    }
}

impl Serial for EElement {
    const KIND: ElementKind = ElementKind::E;
    fn parts(&self) -> (&Arc<Setup>, &Field, f64) {
        (self.setup(), self.field(), self.truncation_budget())
    }
    fn build(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        EElement::from_parts(setup, field, budget)
    }
}

impl Serial for XiElement {
    const KIND: ElementKind = ElementKind::Xi;
    fn parts(&self) -> (&Arc<Setup>, &Field, f64) {
        (self.setup(), self.field(), self.truncation_budget())
    }
    fn build(setup: &Arc<Setup>, field: Field, budget: f64) -> Self {
        XiElement::zero(setup).with_field(field, budget)
    }
}

fn shape(setup: &Setup, kind: ElementKind) -> (i64, usize) {
    match kind {
        ElementKind::D => (setup.p_max(), setup.d_grid.n),
        ElementKind::E => (setup.p_max(), setup.e_grid.n),
        ElementKind::Xi => (0, setup.xi_grid.points()),
    }
}

/// Serializes an element to a JSON document.
pub fn to_json<T: Serial>(el: &T) -> String {
    let (setup, field, budget) = el.parts();
    let (fmax, nx) = shape(setup, T::KIND);
    let nm = field.nm;
    let mut bytes = Vec::with_capacity(field.data.len() * 16);
    for f in -fmax..=fmax {
        for m in 0..nm {
            for j in 0..nx {
                let z = field.at(f, j)[m];
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    let doc = Document {
        header: Header {
            kind: T::KIND,
            config_hash: setup.hash().to_string(),
            p_max: fmax,
            y_modes: nm,
            grid_size: nx,
            truncation_budget: budget,
        },
        data: STANDARD.encode(bytes),
    };
    serde_json::to_string(&doc).expect("plain data serializes")
}

/// Reads an element written by [`to_json`] for the same configuration.
pub fn from_json<T: Serial>(setup: &Arc<Setup>, text: &str) -> Result<T> {
    let doc: Document = serde_json::from_str(text)?;
    let h = &doc.header;
    if h.kind != T::KIND {
        return Err(Error::Format(format!("expected kind {:?}, found {:?}", T::KIND, h.kind)));
    }
    if h.config_hash != setup.hash() {
        return Err(Error::Format(format!(
            "config hash {} does not match {}",
            h.config_hash,
            setup.hash()
        )));
    }
    let (fmax, nx) = shape(setup, T::KIND);
    let nm = setup.modes();
    if h.p_max != fmax || h.y_modes != nm || h.grid_size != nx {
        return Err(Error::Format(format!(
            "shape (pMax {}, yModes {}, grid {}) does not match (pMax {fmax}, yModes {nm}, grid {nx})",
            h.p_max, h.y_modes, h.grid_size
        )));
    }
    let bytes = STANDARD
        .decode(&doc.data)
        .map_err(|e| Error::Format(format!("base64: {e}")))?;
    let count = (2 * fmax + 1) as usize * nm * nx;
    if bytes.len() != count * 16 {
        return Err(Error::Format(format!("expected {} bytes, found {}", count * 16, bytes.len())));
    }
    let mut field = Field::zeros(fmax, nx, nm);
    let mut chunks = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for f in -fmax..=fmax {
        for m in 0..nm {
            for j in 0..nx {
                let re = chunks.next().expect("length checked");
                let im = chunks.next().expect("length checked");
                field.at_mut(f, j)[m] = C::new(re, im);
            }
        }
    }
    if !h.truncation_budget.is_finite() || field.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Format("non-finite value".into()));
    }
    Ok(T::build(setup, field, h.truncation_budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ConfigFile;
    use crate::samples;

    #[test]
    fn round_trip_is_bit_exact() {
        let s = ConfigFile::default().validate().unwrap();
        let mut rng = samples::rng(3, 0);
        let d = samples::random_d(&s, &mut rng);
        let back: DElement = from_json(&s, &to_json(&d)).unwrap();
        assert_eq!(back.field().data, d.field().data);
        let e = samples::random_e(&s, &mut rng);
        let back: EElement = from_json(&s, &to_json(&e)).unwrap();
        assert_eq!(back.field().data, e.field().data);
        let f = samples::random_vector(&s, &mut rng).unwrap();
        let back: XiElement = from_json(&s, &to_json(&f)).unwrap();
        assert_eq!(back.field().data, f.field().data);
    }

    #[test]
    fn kind_and_config_are_checked() {
        let s = ConfigFile::default().validate().unwrap();
        let d = DElement::zero(&s);
        let text = to_json(&d);
        assert!(matches!(from_json::<EElement>(&s, &text), Err(Error::Format(_))));
        let cfg = ConfigFile {
            seed: 8,
            ..ConfigFile::default()
        };
        let other = cfg.validate().unwrap();
        assert_ne!(other.hash(), s.hash());
        assert!(matches!(from_json::<DElement>(&other, &text), Err(Error::Format(_))));
    }
}
