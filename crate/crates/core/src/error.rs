use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Longitudinal speed below the admissible minimum; the slip angles divide by it.
    #[error("longitudinal speed {v_lon} m/s is below the admissible minimum {v_min} m/s")]
    Domain { v_lon: f64, v_min: f64 },

    #[error("degenerate waypoint pair: displacement {0:e} m is too small")]
    DegenerateWaypoint(f64),

    #[error("empty reference trajectory")]
    EmptyTrajectory,

    #[error("obstacle projection failed: reference point coincides with the obstacle center")]
    ProjectionFailure,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("config error{}: {message}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { message: String, line: Option<usize> },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
