use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("age {age} outside the modelled range [{min}, {max}]")]
    AgeOutOfRange { age: u32, min: u32, max: u32 },

    #[error("binomial evolution requires an integer headcount, got {0}")]
    NonIntegerCount(f64),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("Newton ascent did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e}); last iterate {last:?}")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last: Vec<f64>,
    },

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("invalid strategy: {0}")]
    Strategy(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("capital requirement is unbounded: risk still positive at w0 = {w0:e} after {doublings} bracket doublings")]
    Unbounded { w0: f64, doublings: usize },

    #[error("{path}:{line}: {message}")]
    Data {
        path: String,
        line: u64,
        message: String,
    },

    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for problems with user input (files, configuration, data) as opposed
    /// to numerical failures inside a well-posed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::AgeOutOfRange { .. }
                | Error::Parameter(_)
                | Error::Strategy(_)
                | Error::Shape(_)
                | Error::Data { .. }
                | Error::Config { .. }
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
