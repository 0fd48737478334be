//! Blink removal, smoothing and per-interval segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Eye, IlluminationInterval, Schedule};
use crate::session::{Session, SessionRow};

/// Minimum fraction of an interval's nominal samples that must survive
/// blink removal for the interval to be measured.
pub const MIN_RETAINED_FRACTION: f64 = 0.25;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalParams {
    /// Sliding-window length in samples (odd, ≥ 3).
    pub blink_window: usize,
    /// Pupil speed (mm/s) above which samples are treated as blink artifact.
    pub blink_velocity: f64,
    /// Gaussian kernel standard deviation in samples.
    pub smooth_sigma: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        SignalParams {
            blink_window: 7,
            blink_velocity: 10.0,
            smooth_sigma: 6.0,
        }
    }
}

/// Flags blink rows: a non-positive diameter in either eye, or a central
/// difference across the window faster than `velocity_limit`. Flagged
/// regions grow by half a window on each side to take the blink shoulders.
pub fn detect_blinks(session: &Session, window: usize, velocity_limit: f64) -> Result<Vec<bool>> {
    if session.is_empty() {
        return Err(Error::EmptySession);
    }
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "blink window must be odd and at least 3, got {window}"
        )));
    }
    if !(velocity_limit.is_finite() && velocity_limit > 0.0) {
        return Err(Error::domain(format!(
            "velocity limit must be positive, got {velocity_limit}"
        )));
    }
    let rows = &session.rows;
    let n = rows.len();
    let half = window / 2;

    let mut flagged: Vec<bool> = rows
        .iter()
        .map(|r| r.pupil_right <= 0.0 || r.pupil_left <= 0.0)
        .collect();
    for i in half..n.saturating_sub(half) {
        let (a, b) = (&rows[i - half], &rows[i + half]);
        let dt = b.timestamp - a.timestamp;
        let fast = |eye: Eye| ((b.pupil(eye) - a.pupil(eye)) / dt).abs() > velocity_limit;
        if fast(Eye::Right) || fast(Eye::Left) {
            flagged[i] = true;
        }
    }

    let mut mask = vec![false; n];
    for (i, _) in flagged.iter().enumerate().filter(|(_, &f)| f) {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        mask[lo..=hi].iter_mut().for_each(|m| *m = true);
    }
    Ok(mask)
}

/// Drops masked rows; survivors keep their order and timestamps.
pub fn remove_rows(session: &Session, mask: &[bool]) -> Result<Session> {
    if mask.len() != session.len() {
        return Err(Error::domain(format!(
            "mask has {} entries for {} rows",
            mask.len(),
            session.len()
        )));
    }
    Ok(Session {
        rows: session
            .rows
            .iter()
            .zip(mask)
            .filter(|(_, &drop)| !drop)
            .map(|(r, _)| *r)
            .collect(),
    })
}

/// Normalised Gaussian weights for offsets `-r..=r`, `r = ceil(3·sigma)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect()
}

/// Gaussian smoothing with the kernel renormalised over the samples that
/// exist near the edges.
pub fn gaussian_smooth(series: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let n = series.len() as isize;
    Ok((0..n)
        .map(|i| {
            let lo = (i - radius).max(0);
            let hi = (i + radius).min(n - 1);
            let (mut acc, mut norm) = (0.0, 0.0);
            for j in lo..=hi {
                let w = kernel[(j - i + radius) as usize];
                acc += w * series[j as usize];
                norm += w;
            }
            acc / norm
        })
        .collect())
}

/// Session after blink removal, with smoothed diameters per eye.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSession {
    pub rows: Vec<SessionRow>,
    pub removed: usize,
    pub smoothed_right: Vec<f64>,
    pub smoothed_left: Vec<f64>,
    /// Nominal sample spacing of the raw recording (s).
    pub sample_interval: f64,
}

impl CleanSession {
    pub fn smoothed(&self, eye: Eye) -> &[f64] {
        match eye {
            Eye::Right => &self.smoothed_right,
            Eye::Left => &self.smoothed_left,
        }
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.timestamp)
    }
}

/// Blink detection, row removal and smoothing.
pub fn clean_session(session: &Session, params: &SignalParams) -> Result<CleanSession> {
    let sample_interval = session
        .sample_interval()
        .ok_or_else(|| Error::InvalidSession("need at least two samples".into()))?;
    let mask = detect_blinks(session, params.blink_window, params.blink_velocity)?;
    let kept = remove_rows(session, &mask)?;
    if kept.is_empty() {
        return Err(Error::EmptySession);
    }
    let removed = session.len() - kept.len();
    Ok(CleanSession {
        smoothed_right: gaussian_smooth(&kept.pupil(Eye::Right), params.smooth_sigma)?,
        smoothed_left: gaussian_smooth(&kept.pupil(Eye::Left), params.smooth_sigma)?,
        rows: kept.rows,
        removed,
        sample_interval,
    })
}

/// Extremes of both pupils during one illumination interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalWindow {
    pub interval: IlluminationInterval,
    /// Row span `[first_row, end_row)` in the clean session.
    pub first_row: usize,
    pub end_row: usize,
    pub max_right: f64,
    pub min_right: f64,
    pub max_left: f64,
    pub min_left: f64,
}

impl IntervalWindow {
    pub fn max_diameter(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Right => self.max_right,
            Eye::Left => self.max_left,
        }
    }

    pub fn min_diameter(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Right => self.min_right,
            Eye::Left => self.min_left,
        }
    }

    /// Row index of the pre-constriction maximum and of the minimum for one eye.
    pub fn extreme_rows(&self, clean: &CleanSession, eye: Eye) -> (usize, usize) {
        let series = clean.smoothed(eye);
        let onset_end = onset_end_row(clean, &self.interval, self.first_row, self.end_row);
        let argmax = (self.first_row..onset_end)
            .max_by(|&a, &b| series[a].total_cmp(&series[b]).then(b.cmp(&a)))
            .unwrap_or(self.first_row);
        let argmin = (self.first_row..self.end_row)
            .min_by(|&a, &b| series[a].total_cmp(&series[b]).then(a.cmp(&b)))
            .unwrap_or(self.first_row);
        (argmax, argmin)
    }
}

fn onset_end_row(
    clean: &CleanSession,
    iv: &IlluminationInterval,
    first: usize,
    end: usize,
) -> usize {
    let mid = iv.start + iv.duration / 2.0 - TIME_EPS;
    first + clean.rows[first..end].partition_point(|r| r.timestamp < mid)
}

/// Windows every schedule interval. An interval that lost too many samples
/// yields an [`Error::IntervalDropout`] in its slot.
pub fn segment_intervals(clean: &CleanSession, schedule: &Schedule) -> Vec<Result<IntervalWindow>> {
    schedule
        .intervals
        .iter()
        .map(|iv| window_for(clean, iv))
        .collect()
}

/// Like [`segment_intervals`] but fails on the first dropout.
pub fn segment(clean: &CleanSession, schedule: &Schedule) -> Result<Vec<IntervalWindow>> {
    segment_intervals(clean, schedule).into_iter().collect()
}

fn window_for(clean: &CleanSession, iv: &IlluminationInterval) -> Result<IntervalWindow> {
    let first = clean
        .rows
        .partition_point(|r| r.timestamp < iv.start - TIME_EPS);
    let end = clean
        .rows
        .partition_point(|r| r.timestamp < iv.end() - TIME_EPS);
    let retained = end - first;
    let expected = (iv.duration / clean.sample_interval).round() as usize;
    let onset_end = onset_end_row(clean, iv, first, end);
    let dropout = || Error::IntervalDropout {
        level_index: iv.level_index,
        repetition: iv.repetition_index,
        eye: iv.illuminated_eye,
        retained,
        expected,
    };
    if (retained as f64) < MIN_RETAINED_FRACTION * expected as f64 || onset_end == first {
        return Err(dropout());
    }
    let extremes = |series: &[f64]| {
        let max = series[first..onset_end]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = series[first..end]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (max, min)
    };
    let (max_right, min_right) = extremes(&clean.smoothed_right);
    let (max_left, min_left) = extremes(&clean.smoothed_left);
    Ok(IntervalWindow {
        interval: *iv,
        first_row: first,
        end_row: end,
        max_right,
        min_right,
        max_left,
        min_left,
    })
}
