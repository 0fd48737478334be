//! Recorded or simulated pupil-diameter sessions.

use crate::error::{Error, Result};
use crate::protocol::Eye;

/// Diameter written for samples where the tracker lost the pupil.
pub const BLINK_SENTINEL: f64 = 0.0;

/// One sample: timestamp (s), per-eye transmittance (0 = dark) and per-eye
/// pupil diameter (mm, [`BLINK_SENTINEL`] when invalid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionRow {
    pub timestamp: f64,
    pub illum_right: f64,
    pub illum_left: f64,
    pub pupil_right: f64,
    pub pupil_left: f64,
}

impl SessionRow {
    pub fn pupil(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Right => self.pupil_right,
            Eye::Left => self.pupil_left,
        }
    }

    pub fn illumination(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Right => self.illum_right,
            Eye::Left => self.illum_left,
        }
    }

    fn mirrored(&self) -> SessionRow {
        SessionRow {
            timestamp: self.timestamp,
            illum_right: self.illum_left,
            illum_left: self.illum_right,
            pupil_right: self.pupil_left,
            pupil_left: self.pupil_right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Session {
    pub rows: Vec<SessionRow>,
}

impl Session {
    /// Wraps rows after checking that timestamps strictly increase.
    pub fn new(rows: Vec<SessionRow>) -> Result<Session> {
        if let Some(i) = rows
            .windows(2)
            .position(|w| !(w[1].timestamp > w[0].timestamp))
        {
            return Err(Error::InvalidSession(format!(
                "timestamps not strictly increasing at row {}: {} then {}",
                i + 1,
                rows[i].timestamp,
                rows[i + 1].timestamp
            )));
        }
        Ok(Session { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.timestamp).collect()
    }

    pub fn pupil(&self, eye: Eye) -> Vec<f64> {
        self.rows.iter().map(|r| r.pupil(eye)).collect()
    }

    /// Median spacing between consecutive timestamps.
    pub fn sample_interval(&self) -> Option<f64> {
        if self.rows.len() < 2 {
            return None;
        }
        let mut dts: Vec<f64> = self
            .rows
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .collect();
        dts.sort_by(f64::total_cmp);
        Some(dts[dts.len() / 2])
    }

    /// Left and right columns exchanged.
    pub fn mirrored(&self) -> Session {
        Session {
            rows: self.rows.iter().map(SessionRow::mirrored).collect(),
        }
    }
}
