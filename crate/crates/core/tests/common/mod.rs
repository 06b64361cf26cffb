#![allow(dead_code)]

pub mod oracle;

use skinforge::{default_surrogate_table, FeasibilitySet, Frequency, ResponseTable};

pub const PITCH: f64 = 3.7e-3;

pub fn f26() -> Frequency {
    Frequency::from_ghz(26.0).unwrap()
}

pub fn surrogate() -> ResponseTable {
    default_surrogate_table(&FeasibilitySet::benchmark(), 71, PITCH, f26()).unwrap()
}
