//! Scoring of relative afferent pupillary defects from dichoptic swinging-light
//! recordings.
//!
//! The pipeline runs: [`protocol`] builds the illumination schedule,
//! [`sim`] (or a real headset) produces a [`session::Session`], [`signal`]
//! cleans and segments it, and [`scoring`] turns constriction amplitudes into
//! a final score in log units. [`cohort`] aggregates classifications into
//! accuracy, sensitivity and specificity.

// `!(a > b)` is used deliberately so that NaN inputs fall into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cohort;
pub mod error;
pub mod io;
pub mod plot;
pub mod protocol;
pub mod scoring;
pub mod session;
pub mod signal;
pub mod sim;
pub mod stats;
pub mod units;

pub use calibration::{fit_luminance_model, CalibrationModel, LuminanceSample};
pub use cohort::{evaluate_cohort, CohortMetrics, LabeledOutcome, TrueLabel};
pub use error::{Error, Result};
pub use plot::{emit_plot, PlotSpec};
pub use protocol::{build_protocol, Eye, Protocol, Schedule, ScheduleBuilder};
pub use scoring::{
    classify, final_rapd_score, score_session, Classification, PipelineParams, RapdReport,
};
pub use session::{Session, SessionRow};
pub use signal::SignalParams;
pub use sim::{simulate_session, PupilModelParams};
pub use units::{LogUnits, OpticalDensity, Transmittance};
