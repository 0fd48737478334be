//! Display-drive to luminance calibration.
//!
//! Headset luminance is not linear in the drive value sent to the display.
//! Measured `(drive, luminance)` pairs are fitted with a logarithmic model
//! `L(v) = a + b·ln(v)`, and the model is inverted to find the drive values
//! that reproduce a neutral density filter of a given transmittance relative
//! to a reference drive.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::units::Transmittance;

pub use crate::stats::pearson_correlation;

/// One photometer reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuminanceSample {
    #[serde(rename = "drive")]
    pub drive_value: f64,
    /// cd/m²
    pub luminance: f64,
}

impl LuminanceSample {
    pub fn new(drive_value: f64, luminance: f64) -> Self {
        LuminanceSample {
            drive_value,
            luminance,
        }
    }
}

/// Fitted `L(v) = offset_a + slope_b·ln(v)` with the drive treated as the
/// unattenuated (OD 0) stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub offset_a: f64,
    pub slope_b: f64,
    pub pearson_r: f64,
    pub reference_drive: f64,
    pub reference_luminance: f64,
}

impl CalibrationModel {
    /// Builds a model from known coefficients.
    pub fn new(offset_a: f64, slope_b: f64, reference_drive: f64, pearson_r: f64) -> Result<Self> {
        if !(slope_b.is_finite() && slope_b > 0.0) || !offset_a.is_finite() {
            return Err(Error::Fit(format!(
                "model must be increasing in drive, got offset {offset_a} slope {slope_b}"
            )));
        }
        if !(reference_drive.is_finite() && reference_drive > 0.0) {
            return Err(Error::domain(format!(
                "reference drive must be positive, got {reference_drive}"
            )));
        }
        let reference_luminance = offset_a + slope_b * reference_drive.ln();
        if reference_luminance <= 0.0 {
            return Err(Error::Fit(format!(
                "model predicts non-positive luminance {reference_luminance} at the reference drive"
            )));
        }
        Ok(CalibrationModel {
            offset_a,
            slope_b,
            pearson_r,
            reference_drive,
            reference_luminance,
        })
    }

    pub fn luminance_at(&self, drive: f64) -> Result<f64> {
        luminance_at(self, drive)
    }

    pub fn drive_for_transmittance(&self, t: Transmittance) -> Result<f64> {
        drive_for_transmittance(self, t)
    }
}

pub fn fit_luminance_model(
    samples: &[LuminanceSample],
    reference_drive: f64,
) -> Result<CalibrationModel> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples
        .iter()
        .find(|s| !(s.drive_value > 0.0 && s.luminance > 0.0 && s.luminance.is_finite()))
    {
        return Err(Error::Fit(format!(
            "drive and luminance must be positive, got ({}, {})",
            bad.drive_value, bad.luminance
        )));
    }
    let first = samples[0].drive_value;
    if samples.iter().all(|s| s.drive_value == first) {
        return Err(Error::Fit("all samples share one drive value".into()));
    }

    let log_drive: Vec<f64> = samples.iter().map(|s| s.drive_value.ln()).collect();
    let luminance: Vec<f64> = samples.iter().map(|s| s.luminance).collect();
    let fit = stats::ordinary_least_squares(&log_drive, &luminance)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let r = stats::pearson_correlation(&log_drive, &luminance)
        .map_err(|e| Error::Fit(e.to_string()))?;
    CalibrationModel::new(fit.intercept, fit.slope, reference_drive, r)
}

pub fn luminance_at(model: &CalibrationModel, drive: f64) -> Result<f64> {
    if !(drive > 0.0 && drive.is_finite()) {
        return Err(Error::domain(format!(
            "drive must be positive, got {drive}"
        )));
    }
    Ok(model.offset_a + model.slope_b * drive.ln())
}

/// Drive value whose predicted luminance is `t` times the reference luminance.
pub fn drive_for_transmittance(model: &CalibrationModel, t: Transmittance) -> Result<f64> {
    let target = t.value() * model.reference_luminance;
    let drive = ((target - model.offset_a) / model.slope_b).exp();
    if !(drive > 0.0 && drive.is_finite()) {
        return Err(Error::OutOfRange {
            what: "target luminance",
            value: target,
            lo: model.offset_a + model.slope_b * f64::MIN_POSITIVE.ln(),
            hi: model.reference_luminance,
        });
    }
    Ok(drive)
}

/// Reads `drive,luminance` rows.
pub fn read_luminance_samples<R: Read>(reader: R) -> Result<Vec<LuminanceSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["drive", "luminance"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `drive,luminance`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for record in rdr.deserialize::<LuminanceSample>() {
        out.push(record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_luminance_samples_file(path: impl AsRef<Path>) -> Result<Vec<LuminanceSample>> {
    read_luminance_samples(std::fs::File::open(path)?)
}
