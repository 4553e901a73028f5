use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("emitters {first} and {second} are coincident (separation {separation:e} m)")]
    CoincidentEmitters {
        first: usize,
        second: usize,
        separation: f64,
    },

    #[error("could not place emitter {index} after {attempts} attempts at minimum separation {min_separation:e} m")]
    PlacementFailed {
        index: usize,
        attempts: usize,
        min_separation: f64,
    },

    #[error("coupling matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("exact pole in denominator `{denominator}`")]
    Pole { denominator: &'static str },

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time step {dt:e} s too large, need dt <= {required:e} s")]
    StepTooLarge { dt: f64, required: f64 },

    #[error("time window too short: signal decays only to {remaining:e} (need < 1e-4); use at least {required_points} points")]
    WindowTooShort { remaining: f64, required_points: usize },

    #[error("singular normal equations; consider freezing one of: {0}")]
    SingularJacobian(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format { .. } | Error::Io { .. } | Error::InvalidInput(_) => 2,
            Error::Pair { source, .. } | Error::Realization { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
