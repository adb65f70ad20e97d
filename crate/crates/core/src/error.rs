use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the scheduling library.
///
/// Constraint violations of a well-formed schedule are *not* errors; they are
/// returned as data by [`crate::feasibility::check_constraints`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("assignment exceeds horizon: patient {patient} starts on day {start_day} with {sessions} sessions but the horizon is {horizon} days")]
    HorizonOverflow {
        patient: String,
        start_day: usize,
        sessions: usize,
        horizon: usize,
    },

    #[error("unknown patient id `{0}`")]
    UnknownPatient(String),

    #[error("index out of range: {what} = {value} (valid 1..={max})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("patient `{0}` is listed more than once in the schedule")]
    DuplicatePatient(String),

    #[error("objective undefined for partial schedule: patient `{0}` is unassigned")]
    PartialSchedule(String),

    #[error("pending patient `{0}` is not assigned")]
    PendingUnassigned(String),

    #[error("position has {got} genes but the context expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid scenario set: {0}")]
    InvalidScenarios(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("selection weights must be positive and finite (total = {0})")]
    NonPositiveWeights(f64),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("nothing to report")]
    NothingToReport,

    #[error("unsupported schema version {found} in {path} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::HorizonOverflow { .. } => "horizon_overflow",
            Error::UnknownPatient(_) => "unknown_patient",
            Error::OutOfRange { .. } => "out_of_range",
            Error::DuplicatePatient(_) => "duplicate_patient",
            Error::PartialSchedule(_) => "partial_schedule",
            Error::PendingUnassigned(_) => "pending_unassigned",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidScenarios(_) => "invalid_scenarios",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::NonPositiveWeights(_) => "non_positive_weights",
            Error::Infeasible(_) => "infeasible",
            Error::NothingToReport => "nothing_to_report",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
