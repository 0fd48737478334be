//! Synthetic pupil-light-reflex sessions with an injectable afferent defect.
//!
//! Each eye's luminance first passes a light-adaptation stage: the retina
//! tracks the luminance it sees with time constant `tau_adapt` and signals
//! only the excess, so a stimulus produces a strong onset transient that
//! fades while the eye stays lit. An afferent defect attenuates an eye's
//! signal by `10^(-defect)` exactly as a neutral density filter of the same
//! optical density would. Both eyes' signals are summed into one consensual
//! drive, which sets a steady-state diameter through a logistic function of
//! luminance; the pupil relaxes towards it with separate constriction and
//! redilation time constants after a fixed latency.
//!
//! Because the defect is indistinguishable from a filter, a subject with a
//! left defect of `d` responds identically to both eyes exactly when the
//! right eye is attenuated by `d`, which is the level axis point `x = -d`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Eye, Schedule};
use crate::session::{Session, SessionRow, BLINK_SENTINEL};

/// Reference luminance of the unattenuated stimulus (cd/m²).
pub const DEFAULT_REFERENCE_LUMINANCE: f64 = 97.8;

const NOISE_STREAM: u64 = 1;
const BLINK_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PupilModelParams {
    /// Dark-adapted diameter (mm).
    pub d_max: f64,
    /// Fully constricted diameter (mm).
    pub d_min: f64,
    /// Drive (cd/m²) that produces half of the diameter range.
    pub half_luminance: f64,
    pub steepness: f64,
    pub tau_constrict: f64,
    pub tau_dilate: f64,
    /// Retinal light-adaptation time constant (s).
    pub tau_adapt: f64,
    /// Fraction of the adapted luminance subtracted from the retinal signal;
    /// 1 gives a purely transient response, 0 disables adaptation.
    pub adaptation: f64,
    pub latency: f64,
    /// Constant right-minus-left diameter offset (mm).
    pub anisocoria: f64,
    pub defect_left: f64,
    pub defect_right: f64,
    pub noise_sd: f64,
    /// Blinks per second.
    pub blink_rate: f64,
    pub blink_duration: f64,
    pub sample_rate: f64,
    pub rng_seed: u64,
}

impl Default for PupilModelParams {
    fn default() -> Self {
        PupilModelParams {
            d_max: 7.0,
            d_min: 2.0,
            half_luminance: 100.0,
            steepness: 0.7,
            tau_constrict: 0.3,
            tau_dilate: 0.3,
            tau_adapt: 0.15,
            adaptation: 1.0,
            latency: 0.25,
            anisocoria: 0.0,
            defect_left: 0.0,
            defect_right: 0.0,
            noise_sd: 0.0,
            blink_rate: 0.0,
            blink_duration: 0.2,
            sample_rate: 120.0,
            rng_seed: 0,
        }
    }
}

impl PupilModelParams {
    pub fn with_defect(mut self, eye: Eye, defect: f64) -> Self {
        match eye {
            Eye::Left => self.defect_left = defect,
            Eye::Right => self.defect_right = defect,
        }
        self
    }

    pub fn defect(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Left => self.defect_left,
            Eye::Right => self.defect_right,
        }
    }

    /// Parameters of the eye-swapped subject.
    pub fn mirrored(&self) -> Self {
        PupilModelParams {
            defect_left: self.defect_right,
            defect_right: self.defect_left,
            anisocoria: -self.anisocoria,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_min", self.d_min),
            ("half_luminance", self.half_luminance),
            ("steepness", self.steepness),
            ("tau_constrict", self.tau_constrict),
            ("tau_dilate", self.tau_dilate),
            ("tau_adapt", self.tau_adapt),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("latency", self.latency),
            ("defect_left", self.defect_left),
            ("defect_right", self.defect_right),
            ("noise_sd", self.noise_sd),
            ("blink_rate", self.blink_rate),
            ("blink_duration", self.blink_duration),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.d_max > self.d_min) {
            return Err(Error::domain(format!(
                "d_max ({}) must exceed d_min ({})",
                self.d_max, self.d_min
            )));
        }
        if self.tau_constrict > self.tau_dilate {
            return Err(Error::domain(format!(
                "constriction ({} s) must not be slower than redilation ({} s)",
                self.tau_constrict, self.tau_dilate
            )));
        }
        if !(0.0..=1.0).contains(&self.adaptation) {
            return Err(Error::domain(format!(
                "adaptation must lie in [0, 1], got {}",
                self.adaptation
            )));
        }
        if !self.anisocoria.is_finite() || self.anisocoria.abs() / 2.0 >= self.d_min {
            return Err(Error::domain(format!(
                "anisocoria {} would drive one pupil below zero",
                self.anisocoria
            )));
        }
        Ok(())
    }
}

/// Consensual drive: each eye's luminance attenuated by its afferent defect,
/// then summed.
pub fn effective_drive(params: &PupilModelParams, lum_right: f64, lum_left: f64) -> Result<f64> {
    if !(lum_right >= 0.0 && lum_left >= 0.0) {
        return Err(Error::domain(format!(
            "luminance must be non-negative, got right {lum_right} left {lum_left}"
        )));
    }
    Ok(10f64.powf(-params.defect_right) * lum_right + 10f64.powf(-params.defect_left) * lum_left)
}

/// Logistic-in-log-luminance static pupil size.
pub fn steady_state_diameter(params: &PupilModelParams, drive: f64) -> f64 {
    let drive = drive.max(0.0);
    params.d_min
        + (params.d_max - params.d_min)
            / (1.0 + (drive / params.half_luminance).powf(params.steepness))
}

/// First-order light adaptation of one eye's retinal signal.
#[derive(Debug, Clone, Copy)]
struct Adaptation {
    level: f64,
    gain: f64,
    weight: f64,
}

impl Adaptation {
    fn new(params: &PupilModelParams, dt: f64) -> Self {
        Adaptation {
            level: 0.0,
            gain: 1.0 - (-dt / params.tau_adapt).exp(),
            weight: params.adaptation,
        }
    }

    fn step(&mut self, luminance: f64) -> f64 {
        let signal = (luminance - self.weight * self.level).max(0.0);
        self.level += (luminance - self.level) * self.gain;
        signal
    }
}

fn blink_mask(params: &PupilModelParams, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    if params.blink_rate <= 0.0 || params.blink_duration <= 0.0 {
        return mask;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    rng.set_stream(BLINK_STREAM);
    let gaps = Exp::new(params.blink_rate).expect("blink rate validated positive");
    let span = n as f64 / params.sample_rate;
    let len = (params.blink_duration * params.sample_rate)
        .round()
        .max(1.0) as usize;
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t >= span {
            break;
        }
        let first = (t * params.sample_rate).ceil() as usize;
        for m in mask.iter_mut().skip(first).take(len) {
            *m = true;
        }
    }
    mask
}

/// Simulates one session under `schedule`.
///
/// Noise and blinks come from separate random streams derived from
/// `rng_seed`, so a session and its blink-free twin share the same noise.
pub fn simulate_session(
    params: &PupilModelParams,
    schedule: &Schedule,
    reference_luminance: f64,
) -> Result<Session> {
    params.validate()?;
    if !(reference_luminance.is_finite() && reference_luminance > 0.0) {
        return Err(Error::domain(format!(
            "reference luminance must be positive, got {reference_luminance}"
        )));
    }
    let fs = params.sample_rate;
    let dt = 1.0 / fs;
    let n = (schedule.total_duration * fs).round() as usize + 1;

    let mut adapt_right = Adaptation::new(params, dt);
    let mut adapt_left = Adaptation::new(params, dt);
    let mut illumination = Vec::with_capacity(n);
    let mut drive = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 / fs).min(schedule.total_duration);
        let e = schedule.illumination_at(t)?;
        let right = adapt_right.step(e.right * reference_luminance);
        let left = adapt_left.step(e.left * reference_luminance);
        drive.push(effective_drive(params, right, left)?);
        illumination.push(e);
    }

    let lag = (params.latency * fs).round() as usize;
    let constrict = 1.0 - (-dt / params.tau_constrict).exp();
    let dilate = 1.0 - (-dt / params.tau_dilate).exp();
    let mut diameter = Vec::with_capacity(n);
    let mut d = params.d_max;
    diameter.push(d);
    for i in 1..n {
        let delayed = if i > lag { drive[i - 1 - lag] } else { 0.0 };
        let target = steady_state_diameter(params, delayed);
        let rate = if target < d { constrict } else { dilate };
        d += (target - d) * rate;
        diameter.push(d);
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    noise_rng.set_stream(NOISE_STREAM);
    let noise = (params.noise_sd > 0.0)
        .then(|| Normal::new(0.0, params.noise_sd).expect("noise sd validated"));
    let jitter = |rng: &mut ChaCha8Rng| match &noise {
        Some(dist) => {
            let limit = 3.0 * params.noise_sd;
            dist.sample(rng).clamp(-limit, limit)
        }
        None => 0.0,
    };
    let blinks = blink_mask(params, n);

    let half_aniso = params.anisocoria / 2.0;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let nr = jitter(&mut noise_rng);
        let nl = jitter(&mut noise_rng);
        let (pupil_right, pupil_left) = if blinks[i] {
            (BLINK_SENTINEL, BLINK_SENTINEL)
        } else {
            (diameter[i] + half_aniso + nr, diameter[i] - half_aniso + nl)
        };
        rows.push(SessionRow {
            timestamp: i as f64 / fs,
            illum_right: illumination[i].right,
            illum_left: illumination[i].left,
            pupil_right,
            pupil_left,
        });
    }
    // Timestamps i/fs strictly increase; skip re-validation.
    Ok(Session { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::build_protocol;
    use proptest::prelude::*;

    fn quiet() -> PupilModelParams {
        PupilModelParams::default()
    }

    #[test]
    fn effective_drive_examples() {
        let p = quiet();
        assert_eq!(effective_drive(&p, 97.8, 0.0).unwrap(), 97.8);
        let left3 = quiet().with_defect(Eye::Left, 0.3);
        assert!((effective_drive(&left3, 0.0, 97.8).unwrap() - 49.0).abs() <= 0.3);
        let left6 = quiet().with_defect(Eye::Left, 0.6);
        let v = effective_drive(&left6, 0.0, 97.2).unwrap();
        assert!((v - 24.4).abs() <= 0.3, "{v}");
        assert!((v - 97.2 * 10f64.powf(-0.6)).abs() < 1e-12);
        assert!(effective_drive(&p, -1.0, 0.0).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let p = quiet();
        assert_eq!(steady_state_diameter(&p, 0.0), p.d_max);
        let mid = steady_state_diameter(&p, p.half_luminance);
        assert!((mid - (p.d_max + p.d_min) / 2.0).abs() < 1e-12);
        // Large-drive limit: (1e9)^0.7 ≈ 2e6, so the residual is ~2.5e-6 mm.
        let sat = steady_state_diameter(&p, 1e9 * p.half_luminance);
        assert!((sat - p.d_min).abs() < 0.01);
    }

    #[test]
    fn validation() {
        assert!(quiet().validate().is_ok());
        let bad = PupilModelParams {
            d_min: 8.0,
            ..quiet()
        };
        assert!(bad.validate().is_err());
        let slow = PupilModelParams {
            tau_constrict: 2.0,
            ..quiet()
        };
        assert!(slow.validate().is_err());
        let neg = PupilModelParams {
            defect_left: -0.1,
            ..quiet()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn symmetric_model_gives_identical_pupils() {
        let s = simulate_session(&quiet(), &build_protocol(3.0).unwrap(), 97.8).unwrap();
        assert_eq!(s.len(), 95 * 120 + 1);
        assert!(s.rows.iter().all(|r| r.pupil_right == r.pupil_left));
        assert_eq!(s.rows[0].pupil_right, 7.0);
    }

    #[test]
    fn x0_minima_match_between_eyes() {
        let schedule = build_protocol(3.0).unwrap();
        let s = simulate_session(&quiet(), &schedule, 97.8).unwrap();
        let window_min = |k: usize| {
            let iv = schedule.intervals[k];
            s.rows
                .iter()
                .filter(|r| r.timestamp >= iv.start && r.timestamp < iv.end())
                .map(|r| r.pupil_right)
                .fold(f64::INFINITY, f64::min)
        };
        // Once both eyes have been lit, each interval starts from the mirror
        // image of the state its partner started from.
        for rep in 1..3 {
            let right = window_min(2 * rep);
            let left = window_min(2 * rep + 1);
            assert!((right - left).abs() < 1e-9, "rep {rep}: {right} vs {left}");
        }
        // The very first interval starts from the dark-adapted state instead.
        let (right, left) = (window_min(0), window_min(1));
        assert!((right - left).abs() < 1e-3, "rep 0: {right} vs {left}");
    }

    #[test]
    fn illumination_columns_follow_schedule() {
        let schedule = build_protocol(2.0).unwrap();
        let s = simulate_session(&quiet(), &schedule, 97.8).unwrap();
        for r in &s.rows {
            let e = schedule.illumination_at(r.timestamp).unwrap();
            assert_eq!((r.illum_left, r.illum_right), (e.left, e.right));
            assert!(r.illum_left == 0.0 || r.illum_right == 0.0);
        }
    }

    #[test]
    fn blinks_overwrite_both_eyes() {
        let p = PupilModelParams {
            blink_rate: 0.5,
            rng_seed: 3,
            ..quiet()
        };
        let s = simulate_session(&p, &build_protocol(2.0).unwrap(), 97.8).unwrap();
        let blinked = s.rows.iter().filter(|r| r.pupil_right == 0.0).count();
        assert!(blinked > 0);
        assert!(s
            .rows
            .iter()
            .all(|r| (r.pupil_right == 0.0) == (r.pupil_left == 0.0)));
    }

    #[test]
    fn blink_free_twin_shares_noise() {
        let base = PupilModelParams {
            noise_sd: 0.05,
            rng_seed: 11,
            ..quiet()
        };
        let blinky = PupilModelParams {
            blink_rate: 0.2,
            ..base.clone()
        };
        let schedule = build_protocol(3.0).unwrap();
        let a = simulate_session(&base, &schedule, 97.8).unwrap();
        let b = simulate_session(&blinky, &schedule, 97.8).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            if y.pupil_right != 0.0 {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn mirrored_subject_mirrors_session() {
        let p = PupilModelParams {
            defect_left: 0.6,
            anisocoria: 0.4,
            ..quiet()
        };
        let schedule = build_protocol(2.0).unwrap();
        let s = simulate_session(&p, &schedule, 97.8).unwrap();
        let m = simulate_session(&p.mirrored(), &schedule.mirrored(), 97.8).unwrap();
        assert_eq!(m, s.mirrored());
    }

    #[test]
    fn seeded_sessions_are_bit_identical() {
        let p = PupilModelParams {
            noise_sd: 0.05,
            blink_rate: 0.2,
            rng_seed: 42,
            ..quiet()
        };
        let schedule = build_protocol(2.0).unwrap();
        let a = simulate_session(&p, &schedule, 97.8).unwrap();
        let b = simulate_session(&p, &schedule, 97.8).unwrap();
        assert_eq!(a, b);
        let c = simulate_session(&PupilModelParams { rng_seed: 43, ..p }, &schedule, 97.8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn diameters_stay_in_physiological_band() {
        let p = PupilModelParams {
            noise_sd: 0.05,
            blink_rate: 0.3,
            rng_seed: 5,
            defect_right: 0.9,
            ..quiet()
        };
        let s = simulate_session(&p, &build_protocol(3.0).unwrap(), 97.8).unwrap();
        let lo = p.d_min - 3.0 * p.noise_sd;
        let hi = p.d_max + 3.0 * p.noise_sd;
        for r in &s.rows {
            for d in [r.pupil_right, r.pupil_left] {
                if d == BLINK_SENTINEL {
                    continue;
                }
                assert!(d >= lo && d <= hi, "{d}");
            }
        }
    }

    proptest! {
        #[test]
        fn steady_state_is_monotone(
            d_min in 1.0f64..4.0,
            range in 0.5f64..5.0,
            half in 1.0f64..500.0,
            steep in 0.2f64..3.0,
            a in 0.0f64..1e4,
            b in 0.0f64..1e4,
        ) {
            let p = PupilModelParams {
                d_min,
                d_max: d_min + range,
                half_luminance: half,
                steepness: steep,
                ..PupilModelParams::default()
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(steady_state_diameter(&p, hi) <= steady_state_diameter(&p, lo));
        }
    }
}
