//! Energy/frequency units.
//!
//! Internally energies are in eV and times in fs. Bath parameters arrive in
//! cm⁻¹ and are converted at the boundary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in eV·fs.
pub const HBAR_EV_FS: f64 = 0.6582119569;

/// Wavenumbers per electron-volt, e / (h c) with exact SI constants.
pub const CM_PER_EV: f64 = 8065.543937349212;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    /// Wavenumber, cm⁻¹.
    #[serde(rename = "cm-1")]
    Wavenumber,
    /// Electron-volt.
    #[serde(rename = "eV")]
    ElectronVolt,
    /// Angular frequency in rad/fs (E/ħ).
    #[serde(rename = "fs-1")]
    InverseFemtosecond,
}

impl Unit {
    fn to_ev_factor(self) -> f64 {
        match self {
            Unit::Wavenumber => 1.0 / CM_PER_EV,
            Unit::ElectronVolt => 1.0,
            Unit::InverseFemtosecond => HBAR_EV_FS,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Wavenumber => "cm-1",
            Unit::ElectronVolt => "eV",
            Unit::InverseFemtosecond => "fs-1",
        })
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cm-1" | "cm^-1" | "cm⁻¹" | "wavenumber" => Ok(Unit::Wavenumber),
            "eV" | "ev" => Ok(Unit::ElectronVolt),
            "fs-1" | "fs^-1" | "fs⁻¹" | "rad/fs" => Ok(Unit::InverseFemtosecond),
            other => Err(Error::Parse(format!("unknown unit `{other}`"))),
        }
    }
}

pub fn convert(value: f64, from: Unit, to: Unit) -> f64 {
    if from == to {
        return value;
    }
    value * from.to_ev_factor() / to.to_ev_factor()
}

/// String-keyed variant of [`convert`] for configuration input.
pub fn convert_named(value: f64, from: &str, to: &str) -> Result<f64> {
    Ok(convert(value, from.parse()?, to.parse()?))
}

#[inline]
pub fn cm_to_ev(value: f64) -> f64 {
    convert(value, Unit::Wavenumber, Unit::ElectronVolt)
}

#[inline]
pub fn ev_to_cm(value: f64) -> f64 {
    convert(value, Unit::ElectronVolt, Unit::Wavenumber)
}
