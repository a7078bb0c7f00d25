use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report. `module()` names the subsystem that
/// raised it, which the CLI and the C API surface alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("header mismatch in {path}: missing column(s) {missing:?}")]
    HeaderMismatch { path: PathBuf, missing: Vec<String> },

    #[error("malformed delimited text in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(
        "{rejected} of {total} rows rejected ({:.1}% > {:.1}% threshold); first: {first}",
        100.0 * *rejected as f64 / (*total).max(1) as f64,
        100.0 * threshold
    )]
    TooManyRejections {
        rejected: usize,
        total: usize,
        threshold: f64,
        first: String,
    },

    #[error("duplicate interval for consumer {consumer_id} at {timestamp}")]
    DuplicateInterval {
        consumer_id: String,
        timestamp: String,
    },

    #[error("unknown consumer type {0:?}")]
    UnknownConsumerType(String),

    #[error("invalid compact store: {0}")]
    StoreFormat(String),

    #[error("checksum mismatch: header says {expected:08x}, content hashes to {actual:08x}")]
    Checksum { expected: u32, actual: u32 },

    #[error("invalid bin spec: {0}")]
    BinSpec(String),

    #[error("empty distribution: {0}")]
    EmptyDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "no consistent session after {attempts} attempts \
         ({no_occurrence} without joint occurrence, {inconsistent} inconsistent within bins)"
    )]
    AttemptsExhausted {
        attempts: usize,
        no_occurrence: usize,
        inconsistent: usize,
    },

    #[error("mixed profile resolutions: {0} and {1} minutes")]
    MixedResolution(u32, u32),

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("missing forecast column(s): {0}")]
    MissingForecast(String),

    #[error("no data for {0}")]
    EmptyScope(String),

    #[error("weather data does not cover days {start}..={end}")]
    NoWeatherOverlap { start: u32, end: u32 },

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The subsystem the error belongs to.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. }
            | Error::HeaderMismatch { .. }
            | Error::Csv { .. }
            | Error::TooManyRejections { .. }
            | Error::DuplicateInterval { .. }
            | Error::UnknownConsumerType(_)
            | Error::StoreFormat(_)
            | Error::Checksum { .. } => "ingest",
            Error::BinSpec(_) | Error::EmptyDistribution(_) => "empdist",
            Error::AttemptsExhausted { .. }
            | Error::MixedResolution(..)
            | Error::InvalidSession(_) => "ev_scenario",
            Error::MissingForecast(_) | Error::EmptyScope(_) => "pv_scenario",
            Error::NoWeatherOverlap { .. } => "load_analytics",
            Error::MissingInput(_) | Error::Config(_) => "cli",
            Error::InvalidArgument(_) => "core",
        }
    }

    /// Short stable identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingInput(_) => "missing-input",
            Error::HeaderMismatch { .. } => "header-mismatch",
            Error::Csv { .. } => "malformed-input",
            Error::TooManyRejections { .. } => "too-many-rejections",
            Error::DuplicateInterval { .. } => "duplicate-interval",
            Error::UnknownConsumerType(_) => "unknown-consumer-type",
            Error::StoreFormat(_) => "store-format",
            Error::Checksum { .. } => "checksum",
            Error::BinSpec(_) => "bin-spec",
            Error::EmptyDistribution(_) => "empty-distribution",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::AttemptsExhausted { .. } => "attempts-exhausted",
            Error::MixedResolution(..) => "mixed-resolution",
            Error::InvalidSession(_) => "invalid-session",
            Error::MissingForecast(_) => "missing-forecast",
            Error::EmptyScope(_) => "empty-scope",
            Error::NoWeatherOverlap { .. } => "no-weather-overlap",
            Error::Config(_) => "config",
        }
    }
}
