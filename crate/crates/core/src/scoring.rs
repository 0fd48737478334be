//! Constriction amplitudes, per-level RAPD scores and the regression
//! x-intercept that gives the final score.
//!
//! For each level the constriction amplitude (CA) of every interval is the
//! mean of the direct and consensual pupil's `(max - min) / max`. The CAs of
//! the three right-eye and three left-eye repetitions are averaged, and the
//! level score is `10·log10(CA_right_illum / CA_left_illum)`. A straight line
//! fitted through the level scores against `x` crosses zero at the final
//! score; negative values point to the left eye, positive to the right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Eye, Schedule};
use crate::session::Session;
use crate::signal::{clean_session, segment_intervals, IntervalWindow, SignalParams};
use crate::stats::{self, LineFit};
use crate::units::{percent_change_ca, rapd_score_from_ca, LogUnits};

/// |final score| at or above which a subject is RAPD positive.
pub const RAPD_THRESHOLD: f64 = 0.3;

/// Slopes flatter than this cannot locate an intercept.
pub const SLOPE_FLOOR: f64 = 1e-6;

const LEVEL_EPS: f64 = 1e-9;

/// Which pupil's constriction enters the level score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaMode {
    /// Mean of direct and consensual responses.
    #[default]
    Averaged,
    /// Illuminated eye only.
    DirectOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaMeasurement {
    pub level_x: LogUnits,
    pub repetition: usize,
    pub illuminated_eye: Eye,
    pub ca_direct: f64,
    pub ca_consensual: f64,
    pub ca_mean: f64,
}

impl CaMeasurement {
    pub fn value(&self, mode: CaMode) -> f64 {
        match mode {
            CaMode::Averaged => self.ca_mean,
            CaMode::DirectOnly => self.ca_direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScore {
    #[serde(rename = "x")]
    pub level_x: f64,
    pub score: f64,
    #[serde(rename = "ca_right")]
    pub ca_right_illum: f64,
    #[serde(rename = "ca_left")]
    pub ca_left_illum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Negative,
    PositiveLeft,
    PositiveRight,
}

impl Classification {
    pub fn is_positive(self) -> bool {
        self != Classification::Negative
    }

    pub fn affected_eye(self) -> Option<Eye> {
        match self {
            Classification::Negative => None,
            Classification::PositiveLeft => Some(Eye::Left),
            Classification::PositiveRight => Some(Eye::Right),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Negative => "negative",
            Classification::PositiveLeft => "positive_left",
            Classification::PositiveRight => "positive_right",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLevel {
    pub x: f64,
    pub reason: String,
}

/// Settings recorded alongside a report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    #[serde(flatten)]
    pub signal: SignalParams,
    pub ca_mode: CaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapdReport {
    pub level_scores: Vec<LevelScore>,
    pub slope: f64,
    pub y_intercept: f64,
    pub final_score: f64,
    pub classification: Classification,
    pub dropped_levels: Vec<DroppedLevel>,
    pub pipeline_params: PipelineParams,
}

impl RapdReport {
    /// Checks that the report carries a fit that locates an intercept.
    pub fn check_fit(&self) -> Result<()> {
        if self.level_scores.len() < 2 {
            return Err(Error::MissingFit(format!(
                "{} level score(s)",
                self.level_scores.len()
            )));
        }
        if !(self.slope.is_finite() && self.y_intercept.is_finite() && self.final_score.is_finite())
            || self.slope.abs() < SLOPE_FLOOR
        {
            return Err(Error::MissingFit(format!(
                "slope {} intercept {}",
                self.slope, self.y_intercept
            )));
        }
        Ok(())
    }
}

/// Direct and consensual CA for each window.
pub fn compute_ca(windows: &[IntervalWindow]) -> Result<Vec<CaMeasurement>> {
    windows
        .iter()
        .map(|w| {
            let iv = &w.interval;
            let ca = |eye: Eye| {
                percent_change_ca(w.max_diameter(eye), w.min_diameter(eye)).map_err(|e| {
                    Error::domain(format!(
                        "level {} repetition {} ({} eye lit), {eye} pupil: {e}",
                        iv.level_index, iv.repetition_index, iv.illuminated_eye
                    ))
                })
            };
            let ca_direct = ca(iv.illuminated_eye)?;
            let ca_consensual = ca(iv.illuminated_eye.other())?;
            Ok(CaMeasurement {
                level_x: iv.level_x,
                repetition: iv.repetition_index,
                illuminated_eye: iv.illuminated_eye,
                ca_direct,
                ca_consensual,
                ca_mean: (ca_direct + ca_consensual) / 2.0,
            })
        })
        .collect()
}

pub fn aggregate_level(measurements: &[CaMeasurement], level_x: LogUnits) -> Result<LevelScore> {
    aggregate_level_with(measurements, level_x, CaMode::Averaged)
}

/// Averages CA over repetitions on each side, then takes the log ratio.
pub fn aggregate_level_with(
    measurements: &[CaMeasurement],
    level_x: LogUnits,
    mode: CaMode,
) -> Result<LevelScore> {
    let side_mean = |eye: Eye| {
        let values: Vec<f64> = measurements
            .iter()
            .filter(|m| (m.level_x.0 - level_x.0).abs() < LEVEL_EPS && m.illuminated_eye == eye)
            .map(|m| m.value(mode))
            .collect();
        if values.is_empty() {
            return Err(Error::LevelDropout {
                level_x: level_x.0,
                reason: format!("no usable {eye}-eye repetitions"),
            });
        }
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    };
    let ca_right_illum = side_mean(Eye::Right)?;
    let ca_left_illum = side_mean(Eye::Left)?;
    let score =
        rapd_score_from_ca(ca_right_illum, ca_left_illum).map_err(|e| Error::LevelDropout {
            level_x: level_x.0,
            reason: e.to_string(),
        })?;
    Ok(LevelScore {
        level_x: level_x.0,
        score: score.0,
        ca_right_illum,
        ca_left_illum,
    })
}

/// Least-squares line of score against level.
pub fn fit_rapd_line(level_scores: &[LevelScore]) -> Result<LineFit> {
    let usable: Vec<&LevelScore> = level_scores
        .iter()
        .filter(|l| l.score.is_finite() && l.level_x.is_finite())
        .collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientData {
            usable: usable.len(),
        });
    }
    let xs: Vec<f64> = usable.iter().map(|l| l.level_x).collect();
    let ys: Vec<f64> = usable.iter().map(|l| l.score).collect();
    stats::ordinary_least_squares(&xs, &ys)
}

/// Where the fitted line crosses zero.
pub fn final_rapd_score(slope: f64, y_intercept: f64) -> Result<LogUnits> {
    if !(slope.abs() >= SLOPE_FLOOR) {
        return Err(Error::FlatResponse { slope });
    }
    Ok(LogUnits(-y_intercept / slope))
}

pub fn classify(final_score: LogUnits) -> Classification {
    let s = final_score.0;
    if s <= -RAPD_THRESHOLD {
        Classification::PositiveLeft
    } else if s >= RAPD_THRESHOLD {
        Classification::PositiveRight
    } else {
        Classification::Negative
    }
}

/// Fits, intercepts and classifies a set of level scores.
pub fn report_from_levels(
    level_scores: Vec<LevelScore>,
    dropped_levels: Vec<DroppedLevel>,
    pipeline_params: PipelineParams,
) -> Result<RapdReport> {
    let fit = fit_rapd_line(&level_scores)?;
    let final_score = final_rapd_score(fit.slope, fit.intercept)?;
    Ok(RapdReport {
        level_scores,
        slope: fit.slope,
        y_intercept: fit.intercept,
        final_score: final_score.0,
        classification: classify(final_score),
        dropped_levels,
        pipeline_params,
    })
}

/// Per-level scores from segmented windows; levels that cannot be scored
/// are returned as dropped with the reason.
pub fn score_levels(
    windows: &[Result<IntervalWindow>],
    schedule: &Schedule,
    mode: CaMode,
) -> (Vec<LevelScore>, Vec<DroppedLevel>) {
    let mut scores = Vec::new();
    let mut dropped = Vec::new();
    for block in &schedule.blocks {
        let x = block.x_level;
        let level_windows: Vec<IntervalWindow> = windows
            .iter()
            .filter_map(|w| w.as_ref().ok())
            .filter(|w| (w.interval.level_x.0 - x.0).abs() < LEVEL_EPS)
            .copied()
            .collect();
        let outcome = compute_ca(&level_windows).and_then(|m| aggregate_level_with(&m, x, mode));
        match outcome {
            Ok(score) => scores.push(score),
            Err(e) => dropped.push(DroppedLevel {
                x: x.0,
                reason: match e {
                    Error::LevelDropout { reason, .. } => reason,
                    other => other.to_string(),
                },
            }),
        }
    }
    (scores, dropped)
}

/// Checks that the session's illumination columns agree with the schedule.
fn check_session_matches(session: &Session, schedule: &Schedule) -> Result<()> {
    for (i, row) in session.rows.iter().enumerate() {
        if row.timestamp > schedule.total_duration + 1e-6 {
            return Err(Error::InvalidSession(format!(
                "row {} at t = {} lies past the schedule end {}",
                i + 1,
                row.timestamp,
                schedule.total_duration
            )));
        }
        let e = schedule.illumination_at(row.timestamp.clamp(0.0, schedule.total_duration))?;
        if (e.right - row.illum_right).abs() > 1e-5 || (e.left - row.illum_left).abs() > 1e-5 {
            return Err(Error::InvalidSession(format!(
                "row {} at t = {}: illumination (right {}, left {}) disagrees with the schedule \
                 (right {}, left {})",
                i + 1,
                row.timestamp,
                row.illum_right,
                row.illum_left,
                e.right,
                e.left
            )));
        }
    }
    Ok(())
}

/// Full pipeline: blink removal, smoothing, segmentation, CA, per-level
/// scores, regression and classification.
pub fn score_session(
    session: &Session,
    schedule: &Schedule,
    params: &PipelineParams,
) -> Result<RapdReport> {
    check_session_matches(session, schedule)?;
    let clean = clean_session(session, &params.signal)?;
    let windows = segment_intervals(&clean, schedule);
    for w in windows.iter().filter_map(|w| w.as_ref().err()) {
        log::debug!("{w}");
    }
    let (scores, dropped) = score_levels(&windows, schedule, params.ca_mode);
    for d in &dropped {
        log::info!("level x = {:+.2} dropped: {}", d.x, d.reason);
    }
    report_from_levels(scores, dropped, *params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_protocol, IlluminationInterval};
    use crate::sim::{simulate_session, PupilModelParams};
    use crate::units::Transmittance;
    use proptest::prelude::*;

    fn window(eye: Eye, right: (f64, f64), left: (f64, f64)) -> IntervalWindow {
        IntervalWindow {
            interval: IlluminationInterval {
                start: 5.0,
                duration: 3.0,
                illuminated_eye: eye,
                transmittance: Transmittance::FULL,
                level_index: 0,
                repetition_index: 0,
                level_x: LogUnits(0.0),
            },
            first_row: 0,
            end_row: 1,
            max_right: right.0,
            min_right: right.1,
            max_left: left.0,
            min_left: left.1,
        }
    }

    fn measurement(x: f64, eye: Eye, ca: f64) -> CaMeasurement {
        CaMeasurement {
            level_x: LogUnits(x),
            repetition: 0,
            illuminated_eye: eye,
            ca_direct: ca,
            ca_consensual: ca,
            ca_mean: ca,
        }
    }

    #[test]
    fn compute_ca_examples() {
        let m = compute_ca(&[window(Eye::Right, (6.0, 4.5), (6.0, 4.5))]).unwrap();
        assert_eq!(
            (m[0].ca_direct, m[0].ca_consensual, m[0].ca_mean),
            (0.25, 0.25, 0.25)
        );

        let m = compute_ca(&[window(Eye::Right, (6.0, 4.5), (5.8, 4.35))]).unwrap();
        assert!((m[0].ca_consensual - 0.25).abs() < 1e-12);
        assert!((m[0].ca_mean - 0.25).abs() < 1e-12);

        let m = compute_ca(&[window(Eye::Left, (6.0, 6.0), (5.0, 5.0))]).unwrap();
        assert_eq!(m[0].ca_mean, 0.0);
        let err = aggregate_level(
            &[
                m[0],
                CaMeasurement {
                    illuminated_eye: Eye::Right,
                    ..m[0]
                },
            ],
            LogUnits(0.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::LevelDropout { .. }));

        assert!(compute_ca(&[window(Eye::Left, (0.0, 0.0), (5.0, 4.0))]).is_err());
    }

    #[test]
    fn direct_and_consensual_are_assigned_by_lit_eye() {
        let m = compute_ca(&[window(Eye::Left, (6.0, 4.8), (6.0, 4.5))]).unwrap()[0];
        assert!((m.ca_direct - 0.25).abs() < 1e-12);
        assert!((m.ca_consensual - 0.2).abs() < 1e-12);
        assert_eq!(m.value(CaMode::DirectOnly), m.ca_direct);
    }

    #[test]
    fn aggregate_examples() {
        let mut ms = Vec::new();
        for _ in 0..3 {
            ms.push(measurement(0.3, Eye::Right, 0.25));
            ms.push(measurement(0.3, Eye::Left, 0.25));
        }
        assert_eq!(aggregate_level(&ms, LogUnits(0.3)).unwrap().score, 0.0);

        let ms = [
            measurement(0.0, Eye::Right, 0.30),
            measurement(0.0, Eye::Left, 0.15),
        ];
        let s = aggregate_level(&ms, LogUnits(0.0)).unwrap();
        assert!((s.score - 3.0103).abs() < 1e-4);

        let ms = [
            measurement(-0.6, Eye::Right, 0.2),
            measurement(-0.6, Eye::Right, 0.25),
            measurement(-0.6, Eye::Right, 0.3),
            measurement(-0.6, Eye::Left, 0.25),
            measurement(-0.6, Eye::Left, 0.25),
            measurement(-0.6, Eye::Left, 0.25),
        ];
        let s = aggregate_level(&ms, LogUnits(-0.6)).unwrap();
        assert!(s.score.abs() < 1e-12);
        assert!((s.ca_right_illum - 0.25).abs() < 1e-15);
    }

    #[test]
    fn aggregate_needs_both_sides() {
        let ms = [measurement(0.0, Eye::Right, 0.3)];
        assert!(matches!(
            aggregate_level(&ms, LogUnits(0.0)),
            Err(Error::LevelDropout { .. })
        ));
    }

    fn levels(points: &[(f64, f64)]) -> Vec<LevelScore> {
        points
            .iter()
            .map(|&(x, y)| LevelScore {
                level_x: x,
                score: y,
                ca_right_illum: 0.2,
                ca_left_illum: 0.2,
            })
            .collect()
    }

    /// OLS by solving the 2×2 normal equations directly.
    fn normal_equations(points: &[(f64, f64)]) -> (f64, f64) {
        let n = points.len() as f64;
        let (sx, sy) = points
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        (slope, intercept)
    }

    #[test]
    fn fit_examples() {
        let exact = [
            (-0.6, -1.2),
            (-0.3, -0.6),
            (0.0, 0.0),
            (0.3, 0.6),
            (0.6, 1.2),
        ];
        let fit = fit_rapd_line(&levels(&exact)).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);

        let shifted: Vec<_> = [-0.6, -0.3, 0.0, 0.3, 0.6]
            .iter()
            .map(|&x| (x, 2.0 * (x + 0.96)))
            .collect();
        let fit = fit_rapd_line(&levels(&shifted)).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.92).abs() < 1e-12);
        let x0 = final_rapd_score(fit.slope, fit.intercept).unwrap().0;
        assert!((x0 + 0.96).abs() < 1e-12);

        // One outlier at x = 0 (raw displacement 0.9 in y).
        let outlier = [
            (-0.6, -1.2),
            (-0.3, -0.6),
            (0.0, 0.9),
            (0.3, 0.6),
            (0.6, 1.2),
        ];
        let (slope, intercept) = normal_equations(&outlier);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 0.18).abs() < 1e-12);
        let fit = fit_rapd_line(&levels(&outlier)).unwrap();
        assert!((fit.slope - slope).abs() < 1e-12 && (fit.intercept - intercept).abs() < 1e-12);
        let shift = final_rapd_score(fit.slope, fit.intercept).unwrap().0.abs();
        assert!((shift - 0.09).abs() < 1e-12);
        assert!(shift < 0.9 / 2.0, "x-intercept moved {shift}");
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_rapd_line(&levels(&[(0.0, 1.0)])),
            Err(Error::InsufficientData { usable: 1 })
        ));
        assert!(matches!(
            fit_rapd_line(&levels(&[(0.3, 1.0), (0.3, 2.0)])),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_rapd_line(&levels(&[(0.3, f64::NAN), (0.0, 2.0)])),
            Err(Error::InsufficientData { usable: 1 })
        ));
    }

    #[test]
    fn final_score_examples() {
        assert_eq!(final_rapd_score(2.0, 0.0).unwrap().0, 0.0);
        assert_eq!(final_rapd_score(2.0, 1.92).unwrap().0, -0.96);
        assert_eq!(final_rapd_score(1.0, -0.49).unwrap().0, 0.49);
        assert!(matches!(
            final_rapd_score(1e-7, 1.0),
            Err(Error::FlatResponse { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(LogUnits(0.0)), Classification::Negative);
        assert_eq!(classify(LogUnits(-0.96)), Classification::PositiveLeft);
        assert_eq!(classify(LogUnits(0.49)), Classification::PositiveRight);
        assert_eq!(classify(LogUnits(0.3)), Classification::PositiveRight);
        assert_eq!(classify(LogUnits(-0.3)), Classification::PositiveLeft);
        assert_eq!(classify(LogUnits(0.2999)), Classification::Negative);
        assert_eq!(classify(LogUnits(-0.2999)), Classification::Negative);
    }

    #[test]
    fn symmetric_simulation_scores_negative() {
        let schedule = build_protocol(3.0).unwrap();
        let s = simulate_session(&PupilModelParams::default(), &schedule, 97.8).unwrap();
        let r = score_session(&s, &schedule, &PipelineParams::default()).unwrap();
        assert_eq!(r.level_scores.len(), 5);
        assert!(r.dropped_levels.is_empty());
        assert!(r.final_score.abs() < 0.05, "{}", r.final_score);
        assert_eq!(r.classification, Classification::Negative);
    }

    #[test]
    fn left_defect_on_protocol_two() {
        let schedule = build_protocol(2.0).unwrap();
        let p = PupilModelParams::default().with_defect(Eye::Left, 0.6);
        let s = simulate_session(&p, &schedule, 97.8).unwrap();
        let r = score_session(&s, &schedule, &PipelineParams::default()).unwrap();
        assert!((r.final_score + 0.6).abs() < 0.1, "{}", r.final_score);
        assert_eq!(r.classification, Classification::PositiveLeft);
    }

    #[test]
    fn noisy_right_defect_with_blinks() {
        let schedule = build_protocol(3.0).unwrap();
        let p = PupilModelParams {
            noise_sd: 0.05,
            blink_rate: 0.2,
            rng_seed: 21,
            ..PupilModelParams::default().with_defect(Eye::Right, 0.3)
        };
        let s = simulate_session(&p, &schedule, 97.8).unwrap();
        let r = score_session(&s, &schedule, &PipelineParams::default()).unwrap();
        assert!((r.final_score - 0.3).abs() < 0.2, "{}", r.final_score);
    }

    #[test]
    fn direct_only_mode_also_scores() {
        let schedule = build_protocol(3.0).unwrap();
        let p = PupilModelParams::default().with_defect(Eye::Right, 0.6);
        let s = simulate_session(&p, &schedule, 97.8).unwrap();
        let params = PipelineParams {
            ca_mode: CaMode::DirectOnly,
            ..Default::default()
        };
        let r = score_session(&s, &schedule, &params).unwrap();
        assert!((r.final_score - 0.6).abs() < 0.1);
        assert_eq!(r.pipeline_params.ca_mode, CaMode::DirectOnly);
    }

    #[test]
    fn wrong_schedule_is_rejected() {
        let schedule = build_protocol(3.0).unwrap();
        let s = simulate_session(&PupilModelParams::default(), &schedule, 97.8).unwrap();
        let err = score_session(&s, &schedule.mirrored(), &PipelineParams::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidSession(_)));
        let other = build_protocol(2.0).unwrap();
        assert!(score_session(&s, &other, &PipelineParams::default()).is_err());
    }

    #[test]
    fn dropped_levels_are_reported() {
        let schedule = build_protocol(3.0).unwrap();
        let mut s = simulate_session(&PupilModelParams::default(), &schedule, 97.8).unwrap();
        // Lose every right-eye interval of the last level.
        for iv in schedule
            .level_intervals(4)
            .filter(|iv| iv.illuminated_eye == Eye::Right)
        {
            for r in s
                .rows
                .iter_mut()
                .filter(|r| r.timestamp >= iv.start && r.timestamp < iv.end())
            {
                r.pupil_right = 0.0;
                r.pupil_left = 0.0;
            }
        }
        let r = score_session(&s, &schedule, &PipelineParams::default()).unwrap();
        assert_eq!(r.level_scores.len(), 4);
        assert_eq!(r.dropped_levels.len(), 1);
        assert_eq!(r.dropped_levels[0].x, 0.6);
        assert!(r.final_score.abs() < 0.05);
    }

    #[test]
    fn report_json_shape() {
        let r = report_from_levels(
            levels(&[(-0.3, -0.6), (0.0, 0.0), (0.3, 0.6)]),
            vec![],
            PipelineParams::default(),
        )
        .unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "level_scores",
            "slope",
            "y_intercept",
            "final_score",
            "classification",
            "dropped_levels",
            "pipeline_params",
        ] {
            assert!(obj.contains_key(key), "{key}");
        }
        let level = v["level_scores"][0].as_object().unwrap();
        let mut keys: Vec<_> = level.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["ca_left", "ca_right", "score", "x"]);
        assert_eq!(v["classification"], "negative");
        assert_eq!(v["pipeline_params"]["smooth_sigma"], 6.0);
        assert_eq!(v["pipeline_params"]["ca_mode"], "averaged");
    }

    proptest! {
        #[test]
        fn intercept_is_invariant_to_positive_scaling(
            ys in proptest::collection::vec(-10.0f64..10.0, 5),
            k in 0.01f64..100.0,
        ) {
            let xs = [0.0, -0.3, -0.6, 0.3, 0.6];
            let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            let base = fit_rapd_line(&levels(&pts)).unwrap();
            prop_assume!(base.slope.abs() > 1e-3);
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, k * y)).collect();
            let fit = fit_rapd_line(&levels(&scaled)).unwrap();
            let a = final_rapd_score(base.slope, base.intercept).unwrap().0;
            let b = final_rapd_score(fit.slope, fit.intercept).unwrap().0;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
