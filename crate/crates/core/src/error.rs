use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("duplicate observation for strategy `{strategy_id}` in month {month}")]
    DuplicateKey { strategy_id: String, month: String },

    #[error("unknown family label `{0}` (enable custom families to accept it)")]
    UnknownFamily(String),

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate density: component {component} has zero standard deviation; use marginal_density")]
    DegenerateDensity { component: usize },

    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("no model supplied for forecast year {0}")]
    MissingModel(i32),

    #[error("no prior parameters for family `{0}`")]
    MissingFamily(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
