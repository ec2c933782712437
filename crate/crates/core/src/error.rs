use thiserror::Error;

/// Errors raised across the simulation, detection and estimation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadarError {
    /// Shapes or counts that do not fit together (matrix dimensions, block counts, grid sizes).
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// A matrix that must be inverted is singular or too badly conditioned.
    #[error("singular system: {0}")]
    Singular(String),

    /// CFAR calibration could not reach the requested false-alarm rate.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Scenario file rejected during validation; `path` is the offending field.
    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RadarError {
    fn from(e: std::io::Error) -> Self {
        RadarError::Io(e.to_string())
    }
}

pub type Result<T, E = RadarError> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(RadarError::Config(msg.into()))
}

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(RadarError::Domain(msg.into()))
}
