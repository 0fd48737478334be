//! Dichoptic illumination schedules.
//!
//! A schedule starts with a dark-adaptation period and then alternates a
//! full-field white stimulus between the eyes with no switching gap. Five
//! attenuation levels are presented in a fixed order, each as three
//! right/left repetitions. The signed level axis is
//! `x = OD(left) - OD(right)`, so attenuating the right eye gives negative
//! `x` and a left afferent defect is balanced at a negative `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{od_to_transmittance, LogUnits, OpticalDensity, Transmittance};

/// Dark period preceding the first stimulus.
pub const DARK_ADAPTATION_S: f64 = 5.0;

/// Shortest pause that leaves the pupils time to redilate between stimuli.
pub const MIN_PAUSE_S: f64 = 2.0;

pub const REPETITIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Right,
    Left,
}

impl Eye {
    pub fn other(self) -> Eye {
        match self {
            Eye::Right => Eye::Left,
            Eye::Left => Eye::Right,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Right => "right",
            Eye::Left => "left",
        }
    }
}

impl std::fmt::Display for Eye {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two built-in protocols: 3 s and 2 s pause time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    One,
    Two,
}

impl Protocol {
    pub fn pause(self) -> f64 {
        match self {
            Protocol::One => 3.0,
            Protocol::Two => 2.0,
        }
    }

    pub fn schedule(self) -> Schedule {
        build_protocol(self.pause()).expect("built-in pause times are valid")
    }
}

/// One attenuation level and its repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBlock {
    pub x_level: LogUnits,
    pub od_right: OpticalDensity,
    pub od_left: OpticalDensity,
    pub repetitions: usize,
}

impl LevelBlock {
    pub fn new(od_right: f64, od_left: f64, repetitions: usize) -> Result<Self> {
        let od_right = OpticalDensity::new(od_right)?;
        let od_left = OpticalDensity::new(od_left)?;
        if od_right.value() > 0.0 && od_left.value() > 0.0 {
            return Err(Error::Protocol(format!(
                "only one eye may be attenuated in a level, got right {} and left {}",
                od_right.value(),
                od_left.value()
            )));
        }
        if repetitions == 0 {
            return Err(Error::Protocol(
                "a level needs at least one repetition".into(),
            ));
        }
        Ok(LevelBlock {
            x_level: LogUnits(od_left.value() - od_right.value()),
            od_right,
            od_left,
            repetitions,
        })
    }

    pub fn od(&self, eye: Eye) -> OpticalDensity {
        match eye {
            Eye::Right => self.od_right,
            Eye::Left => self.od_left,
        }
    }

    fn mirrored(&self) -> LevelBlock {
        LevelBlock {
            x_level: LogUnits(-self.x_level.0),
            od_right: self.od_left,
            od_left: self.od_right,
            repetitions: self.repetitions,
        }
    }
}

/// One eye lit for one pause time. The fellow eye is dark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationInterval {
    pub start: f64,
    pub duration: f64,
    pub illuminated_eye: Eye,
    pub transmittance: Transmittance,
    pub level_index: usize,
    pub repetition_index: usize,
    pub level_x: LogUnits,
}

impl IlluminationInterval {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Descriptive data about the fixation target shown during the test. It is
/// not a light source and takes no part in the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationTarget {
    pub description: String,
    pub plane_size_cm: f64,
    pub start_distance_m: f64,
    pub end_distance_m: f64,
}

impl Default for FixationTarget {
    fn default() -> Self {
        FixationTarget {
            description: "red X on a plane receding from near to far to relax accommodation"
                .to_string(),
            plane_size_cm: 75.0,
            start_distance_m: 2.0,
            end_distance_m: 100.0,
        }
    }
}

/// Per-eye transmittance at an instant; 0 means the eye is dark.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EyeIllumination {
    pub left: f64,
    pub right: f64,
}

impl EyeIllumination {
    pub fn get(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Right => self.right,
            Eye::Left => self.left,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub dark_adaptation: f64,
    pub pause: f64,
    pub blocks: Vec<LevelBlock>,
    pub intervals: Vec<IlluminationInterval>,
    pub total_duration: f64,
    pub fixation: FixationTarget,
}

/// Builds protocol-1 (`pause = 3`) or protocol-2 (`pause = 2`) style schedules.
pub fn build_protocol(pause: f64) -> Result<Schedule> {
    if !(pause.is_finite() && pause >= MIN_PAUSE_S) {
        return Err(Error::Protocol(format!(
            "pause time {pause} s is shorter than {MIN_PAUSE_S} s; \
             the pupils do not have time to redilate before the next stimulus"
        )));
    }
    ScheduleBuilder::standard(pause).build()
}

/// Custom schedules. Pauses below two seconds are accepted with a warning.
#[derive(Debug, Clone)]
pub struct ScheduleBuilder {
    pause: f64,
    dark_adaptation: f64,
    levels: Vec<(f64, f64, usize)>,
    first_eye: Eye,
}

impl ScheduleBuilder {
    pub fn new(pause: f64) -> Self {
        ScheduleBuilder {
            pause,
            dark_adaptation: DARK_ADAPTATION_S,
            levels: Vec::new(),
            first_eye: Eye::Right,
        }
    }

    /// Both eyes unattenuated, then right 0.3 and 0.6, then left 0.3 and 0.6.
    pub fn standard(pause: f64) -> Self {
        let mut b = ScheduleBuilder::new(pause);
        for (r, l) in [(0.0, 0.0), (0.3, 0.0), (0.6, 0.0), (0.0, 0.3), (0.0, 0.6)] {
            b = b.level(r, l, REPETITIONS);
        }
        b
    }

    pub fn dark_adaptation(mut self, seconds: f64) -> Self {
        self.dark_adaptation = seconds;
        self
    }

    pub fn level(mut self, od_right: f64, od_left: f64, repetitions: usize) -> Self {
        self.levels.push((od_right, od_left, repetitions));
        self
    }

    pub fn first_eye(mut self, eye: Eye) -> Self {
        self.first_eye = eye;
        self
    }

    pub fn build(self) -> Result<Schedule> {
        if !(self.pause.is_finite() && self.pause > 0.0) {
            return Err(Error::Protocol(format!(
                "pause must be positive, got {}",
                self.pause
            )));
        }
        if self.pause < MIN_PAUSE_S {
            log::warn!(
                "pause {} s is below {MIN_PAUSE_S} s; pupils may not redilate between stimuli",
                self.pause
            );
        }
        if !(self.dark_adaptation.is_finite() && self.dark_adaptation >= 0.0) {
            return Err(Error::Protocol(format!(
                "dark adaptation must be non-negative, got {}",
                self.dark_adaptation
            )));
        }
        if self.levels.is_empty() {
            return Err(Error::Protocol(
                "a schedule needs at least one level".into(),
            ));
        }
        let blocks = self
            .levels
            .iter()
            .map(|&(r, l, reps)| LevelBlock::new(r, l, reps))
            .collect::<Result<Vec<_>>>()?;

        let order = [self.first_eye, self.first_eye.other()];
        let mut intervals = Vec::new();
        for (level_index, block) in blocks.iter().enumerate() {
            for repetition_index in 0..block.repetitions {
                for eye in order {
                    let k = intervals.len() as f64;
                    intervals.push(IlluminationInterval {
                        start: self.dark_adaptation + k * self.pause,
                        duration: self.pause,
                        illuminated_eye: eye,
                        transmittance: od_to_transmittance(block.od(eye)),
                        level_index,
                        repetition_index,
                        level_x: block.x_level,
                    });
                }
            }
        }
        let total_duration = self.dark_adaptation + intervals.len() as f64 * self.pause;
        Ok(Schedule {
            dark_adaptation: self.dark_adaptation,
            pause: self.pause,
            blocks,
            intervals,
            total_duration,
            fixation: FixationTarget::default(),
        })
    }
}

impl Schedule {
    /// Reassembles a schedule from an interval list, checking that it is
    /// contiguous and that each level attenuates at most one eye.
    pub fn from_intervals(
        dark_adaptation: f64,
        pause: f64,
        raw: &[(f64, f64, Eye, f64, f64, usize)],
        fixation: FixationTarget,
    ) -> Result<Schedule> {
        if raw.is_empty() {
            return Err(Error::Protocol("schedule has no intervals".into()));
        }
        let mut level_xs: Vec<f64> = Vec::new();
        let mut ods: Vec<[Option<f64>; 2]> = Vec::new();
        let mut reps: Vec<usize> = Vec::new();
        let mut intervals = Vec::with_capacity(raw.len());
        for (k, &(start, duration, eye, transmittance, level_x, repetition)) in
            raw.iter().enumerate()
        {
            let expected = dark_adaptation + k as f64 * pause;
            if (start - expected).abs() > 1e-6 || (duration - pause).abs() > 1e-9 {
                return Err(Error::Protocol(format!(
                    "interval {k} spans [{start}, {}) but a contiguous schedule needs [{expected}, {})",
                    start + duration,
                    expected + pause
                )));
            }
            let t = Transmittance::new(transmittance)?;
            let level_index = match level_xs.iter().position(|&x| (x - level_x).abs() < 1e-9) {
                Some(i) => i,
                None => {
                    level_xs.push(level_x);
                    ods.push([None, None]);
                    reps.push(0);
                    level_xs.len() - 1
                }
            };
            let slot = &mut ods[level_index][eye as usize];
            let od = crate::units::transmittance_to_od(t).value();
            match slot {
                Some(prev) if (*prev - od).abs() > 1e-9 => {
                    return Err(Error::Protocol(format!(
                        "level x = {level_x} uses two different transmittances for the {eye} eye"
                    )))
                }
                _ => *slot = Some(od),
            }
            reps[level_index] = reps[level_index].max(repetition + 1);
            intervals.push(IlluminationInterval {
                start: expected,
                duration: pause,
                illuminated_eye: eye,
                transmittance: t,
                level_index,
                repetition_index: repetition,
                level_x: LogUnits(level_x),
            });
        }
        let blocks = level_xs
            .iter()
            .zip(&ods)
            .zip(&reps)
            .map(|((&x, od), &r)| {
                let implied =
                    od[Eye::Left as usize].unwrap_or(0.0) - od[Eye::Right as usize].unwrap_or(0.0);
                if (implied - x).abs() > 1e-6 {
                    return Err(Error::Protocol(format!(
                        "level x = {x} disagrees with its transmittances (implied {implied})"
                    )));
                }
                // Take the densities from x itself so that a schedule survives
                // a trip through printed transmittances unchanged.
                let block = LevelBlock::new((-x).max(0.0), x.max(0.0), r)?;
                for eye in [Eye::Right, Eye::Left] {
                    if let Some(v) = od[eye as usize] {
                        if (v - block.od(eye).value()).abs() > 1e-6 {
                            return Err(Error::Protocol(format!(
                                "level x = {x}: {eye} eye density {v} does not fit the level"
                            )));
                        }
                    }
                }
                Ok(LevelBlock {
                    x_level: LogUnits(x),
                    ..block
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule {
            dark_adaptation,
            pause,
            blocks,
            total_duration: dark_adaptation + intervals.len() as f64 * pause,
            intervals,
            fixation,
        })
    }

    /// Index of the interval active at `t`, if any. Intervals own their
    /// start instant but not their end.
    pub fn interval_index_at(&self, t: f64) -> Option<usize> {
        if t < self.dark_adaptation - 1e-9 {
            return None;
        }
        let k = ((t - self.dark_adaptation) / self.pause + 1e-9).floor();
        if k < 0.0 {
            return None;
        }
        let k = k as usize;
        (k < self.intervals.len()).then_some(k)
    }

    pub fn illumination_at(&self, t: f64) -> Result<EyeIllumination> {
        if !(t >= 0.0 && t <= self.total_duration) {
            return Err(Error::OutOfRange {
                what: "time",
                value: t,
                lo: 0.0,
                hi: self.total_duration,
            });
        }
        Ok(match self.interval_index_at(t) {
            None => EyeIllumination::default(),
            Some(k) => {
                let iv = &self.intervals[k];
                let mut out = EyeIllumination::default();
                match iv.illuminated_eye {
                    Eye::Right => out.right = iv.transmittance.value(),
                    Eye::Left => out.left = iv.transmittance.value(),
                }
                out
            }
        })
    }

    /// The same timeline with the eyes exchanged.
    pub fn mirrored(&self) -> Schedule {
        Schedule {
            dark_adaptation: self.dark_adaptation,
            pause: self.pause,
            blocks: self.blocks.iter().map(LevelBlock::mirrored).collect(),
            intervals: self
                .intervals
                .iter()
                .map(|iv| IlluminationInterval {
                    illuminated_eye: iv.illuminated_eye.other(),
                    level_x: LogUnits(-iv.level_x.0),
                    ..*iv
                })
                .collect(),
            total_duration: self.total_duration,
            fixation: self.fixation.clone(),
        }
    }

    /// Intervals of one level in presentation order.
    pub fn level_intervals(
        &self,
        level_index: usize,
    ) -> impl Iterator<Item = &IlluminationInterval> {
        self.intervals
            .iter()
            .filter(move |iv| iv.level_index == level_index)
    }
}
