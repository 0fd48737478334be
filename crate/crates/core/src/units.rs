//! Photometric and pupillometric unit math.
//!
//! Attenuation is expressed in optical density (log10 units): an OD of 0.3
//! passes roughly half of the incident light, 0.6 roughly a quarter. Pupil
//! diameters are millimeters throughout the crate, timestamps are seconds and
//! luminance is cd/m².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attenuation in log10 units, `OD = -log10(T)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpticalDensity(f64);

impl OpticalDensity {
    pub const ZERO: OpticalDensity = OpticalDensity(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::domain(format!(
                "optical density must be finite and non-negative, got {value}"
            )));
        }
        Ok(OpticalDensity(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Fraction of incident light that passes, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transmittance(f64);

impl Transmittance {
    pub const FULL: Transmittance = Transmittance(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::domain(format!(
                "transmittance must lie in (0, 1], got {value}"
            )));
        }
        Ok(Transmittance(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A signed quantity on the log10 axis: illumination differences between
/// the eyes and RAPD scores.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogUnits(pub f64);

impl LogUnits {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for LogUnits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+.2} log units", self.0)
    }
}

/// `T = 10^(-OD)`.
pub fn od_to_transmittance(od: OpticalDensity) -> Transmittance {
    Transmittance(10f64.powf(-od.0))
}

/// `OD = -log10(T)`.
pub fn transmittance_to_od(t: Transmittance) -> OpticalDensity {
    // -log10(1) is -0.0; normalise so the identity case is a clean zero.
    OpticalDensity((-t.0.log10()).max(0.0))
}

/// Fractional constriction `(max - min) / max` of one illumination interval.
pub fn percent_change_ca(max_d: f64, min_d: f64) -> Result<f64> {
    if !(max_d.is_finite() && min_d.is_finite()) || min_d <= 0.0 || max_d <= 0.0 {
        return Err(Error::domain(format!(
            "diameters must be positive, got max {max_d} and min {min_d}"
        )));
    }
    if min_d > max_d {
        return Err(Error::domain(format!(
            "minimum diameter {min_d} exceeds maximum {max_d}"
        )));
    }
    Ok((max_d - min_d) / max_d)
}

/// Per-level score `10·log10(ca_right_illum / ca_left_illum)`.
///
/// The factor of ten is kept as printed in the clinical formula. The final
/// score is an x-intercept, which is unchanged by any uniform positive
/// scaling of the per-level values.
pub fn rapd_score_from_ca(ca_right_illum: f64, ca_left_illum: f64) -> Result<LogUnits> {
    for (side, ca) in [("right", ca_right_illum), ("left", ca_left_illum)] {
        if !ca.is_finite() || ca <= 0.0 {
            return Err(Error::UnresolvableScore(format!(
                "{side}-illumination constriction amplitude is {ca}"
            )));
        }
    }
    Ok(LogUnits(10.0 * (ca_right_illum / ca_left_illum).log10()))
}
