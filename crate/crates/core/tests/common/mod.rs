#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use qhm_core::ealgebra::calibrate_trace;
use qhm_core::harness::Session;
use qhm_core::{Calibration, ConfigFile, Setup};

pub fn setup() -> Arc<Setup> {
    static SETUP: OnceLock<Arc<Setup>> = OnceLock::new();
    SETUP
        .get_or_init(|| ConfigFile::default().validate().expect("default config"))
        .clone()
}

pub fn calibration() -> Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    *CAL.get_or_init(|| calibrate_trace(&setup(), 7, 20).expect("calibration"))
}

/// A session whose conventions have been validated by the real oracles.
pub fn session() -> Session {
    static SESSION: OnceLock<Session> = OnceLock::new();
    SESSION
        .get_or_init(|| {
            let mut s = Session::new(&setup());
            let rows = s.validate_conventions().expect("oracles run");
            assert!(rows.iter().all(|r| r.pass), "{rows:?}");
            s
        })
        .clone()
}
