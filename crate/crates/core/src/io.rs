//! File formats: session CSV, schedule and report JSON.
//!
//! Every writer is deterministic: fixed column order and precision, stable
//! JSON field order, nothing that depends on when or where it ran.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::protocol::{Eye, FixationTarget, Schedule};
use crate::scoring::RapdReport;
use crate::session::{Session, SessionRow};

pub const SESSION_HEADER: [&str; 5] = [
    "timestamp",
    "illum_right",
    "illum_left",
    "pupil_right",
    "pupil_left",
];

/// Writes the five-column session CSV.
pub fn write_session_to<W: Write>(session: &Session, mut out: W) -> Result<()> {
    writeln!(out, "{}", SESSION_HEADER.join(","))?;
    for r in &session.rows {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.4},{:.4}",
            r.timestamp, r.illum_right, r.illum_left, r.pupil_right, r.pupil_left
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_session(session: &Session, path: impl AsRef<Path>) -> Result<()> {
    write_session_to(session, BufWriter::new(File::create(path)?))
}

pub fn read_session_from<R: Read>(input: R) -> Result<Session> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows: Vec<SessionRow> = Vec::new();
    let mut saw_header = false;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if !saw_header {
            let got: Vec<&str> = record.iter().map(str::trim).collect();
            if got != SESSION_HEADER {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "expected header `{}`, got `{}`",
                        SESSION_HEADER.join(","),
                        got.join(",")
                    ),
                });
            }
            saw_header = true;
            continue;
        }
        if record.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let mut v = [0.0f64; 5];
        for (k, field) in record.iter().enumerate() {
            v[k] = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{field}` is not a number", SESSION_HEADER[k]),
            })?;
            if !v[k].is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{}` is not finite", SESSION_HEADER[k]),
                });
            }
        }
        if !(0.0..=1.0).contains(&v[1]) || !(0.0..=1.0).contains(&v[2]) {
            return Err(Error::Parse {
                line,
                message: "illumination must lie in [0, 1]".into(),
            });
        }
        if v[3] < 0.0 || v[4] < 0.0 {
            return Err(Error::Parse {
                line,
                message: "pupil diameters must be non-negative".into(),
            });
        }
        if let Some(prev) = rows.last() {
            if !(v[0] > prev.timestamp) {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "timestamp {} does not increase past {}",
                        v[0], prev.timestamp
                    ),
                });
            }
        }
        rows.push(SessionRow {
            timestamp: v[0],
            illum_right: v[1],
            illum_left: v[2],
            pupil_right: v[3],
            pupil_left: v[4],
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(Session { rows })
}

pub fn read_session(path: impl AsRef<Path>) -> Result<Session> {
    read_session_from(File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start_s: f64,
    pub duration_s: f64,
    pub eye: Eye,
    pub transmittance: f64,
    pub level_x: f64,
    pub repetition: usize,
    /// Display drive realising `transmittance`, present when a calibration
    /// model was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub drive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub pause_s: f64,
    pub dark_adaptation_s: f64,
    pub total_s: f64,
    pub intervals: Vec<IntervalRecord>,
    #[serde(default)]
    pub fixation: FixationTarget,
}

impl ScheduleFile {
    pub fn new(schedule: &Schedule, calibration: Option<&CalibrationModel>) -> Result<Self> {
        let intervals = schedule
            .intervals
            .iter()
            .map(|iv| {
                Ok(IntervalRecord {
                    start_s: iv.start,
                    duration_s: iv.duration,
                    eye: iv.illuminated_eye,
                    transmittance: iv.transmittance.value(),
                    level_x: iv.level_x.0,
                    repetition: iv.repetition_index,
                    drive: calibration
                        .map(|m| m.drive_for_transmittance(iv.transmittance))
                        .transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScheduleFile {
            pause_s: schedule.pause,
            dark_adaptation_s: schedule.dark_adaptation,
            total_s: schedule.total_duration,
            intervals,
            fixation: schedule.fixation.clone(),
        })
    }

    pub fn into_schedule(self) -> Result<Schedule> {
        let raw: Vec<_> = self
            .intervals
            .iter()
            .map(|r| {
                (
                    r.start_s,
                    r.duration_s,
                    r.eye,
                    r.transmittance,
                    r.level_x,
                    r.repetition,
                )
            })
            .collect();
        let schedule =
            Schedule::from_intervals(self.dark_adaptation_s, self.pause_s, &raw, self.fixation)?;
        if (schedule.total_duration - self.total_s).abs() > 1e-6 {
            return Err(Error::Protocol(format!(
                "total_s {} disagrees with the intervals (which end at {})",
                self.total_s, schedule.total_duration
            )));
        }
        Ok(schedule)
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn schedule_to_json(
    schedule: &Schedule,
    calibration: Option<&CalibrationModel>,
) -> Result<String> {
    to_pretty_json(&ScheduleFile::new(schedule, calibration)?)
}

pub fn schedule_from_json(text: &str) -> Result<Schedule> {
    serde_json::from_str::<ScheduleFile>(text)?.into_schedule()
}

pub fn read_schedule(path: impl AsRef<Path>) -> Result<Schedule> {
    schedule_from_json(&std::fs::read_to_string(path)?)
}

pub fn report_to_json(report: &RapdReport) -> Result<String> {
    to_pretty_json(report)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<RapdReport> {
    read_json(path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_pretty_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
