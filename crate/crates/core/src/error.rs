//! Error type shared by every stage of the pipeline.

use thiserror::Error;

use crate::protocol::Eye;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A per-level score could not be formed (zero or negative constriction).
    #[error("unresolvable RAPD score: {0}")]
    UnresolvableScore(String),

    #[error("calibration fit failed: {0}")]
    Fit(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid protocol: {0}")]
    Protocol(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("session has no rows")]
    EmptySession,

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error(
        "interval dropout at level {level_index} repetition {repetition} ({eye} eye): \
         {retained} of {expected} samples retained"
    )]
    IntervalDropout {
        level_index: usize,
        repetition: usize,
        eye: Eye,
        retained: usize,
        expected: usize,
    },

    #[error("level x = {level_x:+.2} dropped: {reason}")]
    LevelDropout { level_x: f64, reason: String },

    #[error("insufficient data: {usable} usable level(s), at least 2 required")]
    InsufficientData { usable: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("flat pupillary response: |slope| = {slope:e} is below the degeneracy floor")]
    FlatResponse { slope: f64 },

    #[error("report has no usable regression fit: {0}")]
    MissingFit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid cohort: {0}")]
    Cohort(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
